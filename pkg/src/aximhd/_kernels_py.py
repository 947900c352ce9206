"""Pure numpy versions of the compiled kernels, with identical signatures."""

import numpy as np


def tridiag_solve(lower, cprime, inv_den, rhs, out):
    n = rhs.shape[0]
    out[0] = rhs[0] * inv_den[0]
    for i in range(1, n):
        out[i] = (rhs[i] - lower[i] * out[i - 1]) * inv_den[i]
    for i in range(n - 2, -1, -1):
        out[i] -= cprime[i] * out[i + 1]


def _limited(down, up):
    ad = np.abs(down)
    au = np.abs(up)
    v = np.minimum(np.minimum(2.0 * ad, (au + 2.0 * ad) / 3.0), 2.0 * au)
    v = np.where(up > 0.0, v, -v)
    return np.where(down * up <= 0.0, 0.0, v)


def _upwind_derivative(m2, m1, c0, p1, p2, vel, h):
    fp_pos = c0 + 0.5 * _limited(p1 - c0, c0 - m1)
    fm_pos = m1 + 0.5 * _limited(c0 - m1, m1 - m2)
    fp_neg = p1 + 0.5 * _limited(c0 - p1, p1 - p2)
    fm_neg = c0 + 0.5 * _limited(m1 - c0, c0 - p1)
    return np.where(vel >= 0.0, fp_pos - fm_pos, fp_neg - fm_neg) / h


def limited_advection(f, ur, uz, dr, dz, sign, out):
    f = np.asarray(f)
    ext = np.empty((f.shape[0] + 4, f.shape[1]))
    ext[2:-2] = f
    ext[1] = sign * f[0]
    ext[0] = sign * f[1]
    ext[-2] = f[-1]
    ext[-1] = f[-1]
    dfr = _upwind_derivative(ext[:-4], ext[1:-3], f, ext[3:-1], ext[4:], ur, dr)
    dfz = _upwind_derivative(np.roll(f, 2, axis=1), np.roll(f, 1, axis=1), f,
                             np.roll(f, -1, axis=1), np.roll(f, -2, axis=1), uz, dz)
    out[...] = -(ur * dfr + uz * dfz)
