# cython: language_level=3
"""Compiled kernels: batched tridiagonal back-substitution and limited upwind advection."""

from libc.math cimport fabs


def tridiag_solve(const double[::1] lower, const double[:, ::1] cprime,
                  const double[:, ::1] inv_den, const double complex[:, ::1] rhs,
                  double complex[:, ::1] out):
    """Solve prefactored tridiagonal systems, one per column.

    Row ``i`` of column ``m`` reads ``lower[i] x[i-1] + diag[i, m] x[i] +
    upper[i] x[i+1] = rhs[i, m]``; ``cprime`` and ``inv_den`` hold the
    Thomas factorization of that system.
    """
    cdef Py_ssize_t n = rhs.shape[0], nm = rhs.shape[1]
    cdef Py_ssize_t i, m
    cdef double a
    for m in range(nm):
        out[0, m] = rhs[0, m] * inv_den[0, m]
    for i in range(1, n):
        a = lower[i]
        for m in range(nm):
            out[i, m] = (rhs[i, m] - a * out[i - 1, m]) * inv_den[i, m]
    for i in range(n - 2, -1, -1):
        for m in range(nm):
            out[i, m] = out[i, m] - cprime[i, m] * out[i + 1, m]


cdef inline double _limited(double down, double up) nogil:
    cdef double ad, au, v
    if down * up <= 0.0:
        return 0.0
    ad = fabs(down)
    au = fabs(up)
    v = 2.0 * ad
    if (au + 2.0 * ad) / 3.0 < v:
        v = (au + 2.0 * ad) / 3.0
    if 2.0 * au < v:
        v = 2.0 * au
    return v if up > 0.0 else -v


cdef inline double _rval(const double[:, ::1] f, Py_ssize_t i, Py_ssize_t k,
                         Py_ssize_t nr, double sign) nogil:
    if i < 0:
        return sign * f[-i - 1, k]
    if i >= nr:
        return f[nr - 1, k]
    return f[i, k]


def limited_advection(const double[:, ::1] f, const double[:, ::1] ur,
                      const double[:, ::1] uz, double dr, double dz,
                      double sign, double[:, ::1] out):
    """Write ``-(ur d_r f + uz d_z f)`` with Koren-limited upwind differences.

    ``sign`` is the reflection factor of ``f`` across the axis; the outer
    radial boundary uses zero-gradient ghosts and ``z`` is periodic.
    """
    cdef Py_ssize_t nr = f.shape[0], nz = f.shape[1]
    cdef Py_ssize_t i, k, km2, km1, kp1, kp2
    cdef double m2, m1, c0, p1, p2, vel, fp, fm, tend
    for i in range(nr):
        for k in range(nz):
            m2 = _rval(f, i - 2, k, nr, sign)
            m1 = _rval(f, i - 1, k, nr, sign)
            c0 = f[i, k]
            p1 = _rval(f, i + 1, k, nr, sign)
            p2 = _rval(f, i + 2, k, nr, sign)
            vel = ur[i, k]
            if vel >= 0.0:
                fp = c0 + 0.5 * _limited(p1 - c0, c0 - m1)
                fm = m1 + 0.5 * _limited(c0 - m1, m1 - m2)
            else:
                fp = p1 + 0.5 * _limited(c0 - p1, p1 - p2)
                fm = c0 + 0.5 * _limited(m1 - c0, c0 - p1)
            tend = -vel * (fp - fm) / dr

            km2 = (k - 2 + nz) % nz
            km1 = (k - 1 + nz) % nz
            kp1 = (k + 1) % nz
            kp2 = (k + 2) % nz
            m2 = f[i, km2]
            m1 = f[i, km1]
            p1 = f[i, kp1]
            p2 = f[i, kp2]
            vel = uz[i, k]
            if vel >= 0.0:
                fp = c0 + 0.5 * _limited(p1 - c0, c0 - m1)
                fm = m1 + 0.5 * _limited(c0 - m1, m1 - m2)
            else:
                fp = p1 + 0.5 * _limited(c0 - p1, p1 - p2)
                fm = c0 + 0.5 * _limited(m1 - c0, c0 - p1)
            out[i, k] = tend - vel * (fp - fm) / dz
