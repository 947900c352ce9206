"""Meridian-plane grids, axisymmetric scalar fields and their calculus.

The half plane ``0 < r < R`` is sampled at cell centres ``r_i = (i + 1/2) dr``
so no sample sits on the axis; ``z`` is periodic with period ``Lz`` and
sampled at ``z_k = -Lz/2 + k dz``.  Behaviour across the axis is encoded by a
:class:`Parity` tag on every field.
"""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft
from scipy.interpolate import CubicSpline


def fft_workers():
    """Worker count for scipy.fft, capped by ``AXIMHD_WORKERS`` (default 1)."""
    value = os.environ.get("AXIMHD_WORKERS", "1")
    try:
        return max(1, int(value))
    except ValueError:
        return 1


def is_power_of_two(n):
    return isinstance(n, (int, np.integer)) and n > 0 and (n & (n - 1)) == 0


class Parity(enum.Enum):
    """Reflection behaviour of a field across ``r = 0``."""

    EVEN = 1
    ODD = -1

    @property
    def sign(self):
        return float(self.value)

    def flipped(self):
        return Parity.ODD if self is Parity.EVEN else Parity.EVEN


@dataclass(frozen=True)
class GridRZ:
    """Cell-centred grid on ``(0, R] x [-Lz/2, Lz/2)``, periodic in ``z``."""

    Nr: int
    Nz: int
    R: float
    Lz: float

    @property
    def dr(self):
        return self.R / self.Nr

    @property
    def dz(self):
        return self.Lz / self.Nz

    @property
    def shape(self):
        return (self.Nr, self.Nz)

    @cached_property
    def r(self):
        """Radial cell centres, shape ``(Nr,)``."""
        return (np.arange(self.Nr) + 0.5) * self.dr

    @cached_property
    def z(self):
        """Vertical samples, shape ``(Nz,)``."""
        return -0.5 * self.Lz + np.arange(self.Nz) * self.dz

    @cached_property
    def mesh(self):
        """``(r, z)`` broadcast to ``(Nr, Nz)``."""
        return np.meshgrid(self.r, self.z, indexing="ij")

    @cached_property
    def cell_measure(self):
        """Volume of the ring swept by each cell, ``2 pi r_i dr dz``."""
        return 2.0 * np.pi * self.r * self.dr * self.dz

    @cached_property
    def weights(self):
        """Cell measures broadcast to the field shape."""
        return np.broadcast_to(self.cell_measure[:, None], self.shape)

    @property
    def volume(self):
        return np.pi * self.R**2 * self.Lz

    @cached_property
    def kz(self):
        """Angular wavenumbers of the real FFT along ``z``."""
        return 2.0 * np.pi * np.fft.rfftfreq(self.Nz, d=self.dz)

    def field(self, values, parity):
        return ScalarFieldRZ(self, np.asarray(values, dtype=float), parity)

    def zeros(self, parity):
        return ScalarFieldRZ(self, np.zeros(self.shape), parity)


def build_grid(Nr, Nz, R, Lz):
    """Validate the parameters and return a :class:`GridRZ`.

    Raises
    ------
    ValueError
        If ``Nr < 8``, ``Nz`` is not a power of two (or below 8), or an
        extent is not positive.
    """
    if not isinstance(Nr, (int, np.integer)) or Nr < 8:
        raise ValueError(f"Nr must be an integer >= 8, got {Nr!r}")
    if not is_power_of_two(Nz) or Nz < 8:
        raise ValueError(f"Nz must be a power of two >= 8, got {Nz!r}")
    if not (np.isfinite(R) and R > 0):
        raise ValueError(f"R must be positive, got {R!r}")
    if not (np.isfinite(Lz) and Lz > 0):
        raise ValueError(f"Lz must be positive, got {Lz!r}")
    return GridRZ(int(Nr), int(Nz), float(R), float(Lz))


@dataclass(frozen=True)
class ScalarFieldRZ:
    """Samples of an axisymmetric scalar with a declared axis parity."""

    grid: GridRZ
    values: np.ndarray
    parity: Parity

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise ValueError(f"values have shape {self.values.shape}, grid is {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    def with_values(self, values, parity=None):
        return ScalarFieldRZ(self.grid, np.asarray(values, dtype=float),
                             self.parity if parity is None else parity)


@dataclass(frozen=True)
class VelocityRZ:
    """Meridional velocity: radial part odd, vertical part even across the axis."""

    ur: ScalarFieldRZ
    uz: ScalarFieldRZ

    def __post_init__(self):
        if self.ur.parity is not Parity.ODD or self.uz.parity is not Parity.EVEN:
            raise ValueError("velocity needs an odd radial and an even vertical component")


@dataclass(frozen=True)
class Field3D:
    """Triply periodic samples on an ``N x N x Nzb`` box.

    The horizontal period is ``Lh`` on both axes and the vertical period is
    ``Lz``.  Horizontal samples are offset by half a cell so none lies on the
    symmetry axis ``x = y = 0``.
    """

    values: np.ndarray
    Lh: float
    Lz: float = field(default=None)

    def __post_init__(self):
        if self.values.ndim != 3 or self.values.shape[0] != self.values.shape[1]:
            raise ValueError("Field3D needs an N x N x Nz array")
        if self.Lz is None:
            object.__setattr__(self, "Lz", self.Lh)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    @property
    def N(self):
        return self.values.shape[0]

    @property
    def shape(self):
        return self.values.shape

    @property
    def spacing(self):
        return (self.Lh / self.shape[0], self.Lh / self.shape[1], self.Lz / self.shape[2])

    @property
    def cell_volume(self):
        dx, dy, dz = self.spacing
        return dx * dy * dz

    def like(self, values):
        return Field3D(np.asarray(values, dtype=float), self.Lh, self.Lz)


def box_axes(N, Lh, Nzb, Lz):
    """Sample coordinates of a box: horizontal offset by half a cell."""
    dx = Lh / N
    x = -0.5 * Lh + (np.arange(N) + 0.5) * dx
    z = -0.5 * Lz + np.arange(Nzb) * (Lz / Nzb)
    return x, x.copy(), z


def cylindrical_integral(f):
    """Midpoint quadrature of ``f`` against the cylindrical volume element."""
    return float(np.sum(f.values * f.grid.weights))


def dz_spectral(values, grid, order=1):
    """Spectral ``d^order/dz^order`` of real samples, Nyquist dropped for odd orders."""
    spec = sfft.rfft(values, axis=-1, workers=fft_workers())
    mult = (1j * grid.kz) ** order
    if order % 2 == 1 and grid.Nz % 2 == 0:
        mult = mult.copy()
        mult[-1] = 0.0
    return sfft.irfft(spec * mult, n=grid.Nz, axis=-1, workers=fft_workers())


def dr_central(values, grid, sign):
    """Second-order radial derivative with reflected ghosts at the axis.

    Interior and axis rows use central differences with the ghost
    ``f_{-1} = sign * f_0``; the outer row uses the one-sided closure
    ``(4 f_{N-1} - 7 f_{N-2} + 4 f_{N-3} - f_{N-4}) / (2 dr)``, whose
    leading error ``dr^2 f'''/6`` equals that of the central rows, so
    composed derivatives stay second order up to the boundary.
    """
    out = np.empty_like(values)
    h2 = 2.0 * grid.dr
    out[1:-1] = (values[2:] - values[:-2]) / h2
    out[0] = (values[1] - sign * values[0]) / h2
    out[-1] = (4.0 * values[-1] - 7.0 * values[-2] + 4.0 * values[-3] - values[-4]) / h2
    return out


def gradient_rz(f):
    """Return ``(df/dr, df/dz)``; the radial derivative flips parity."""
    g = f.grid
    dfr = dr_central(f.values, g, f.parity.sign)
    dfz = dz_spectral(f.values, g)
    return f.with_values(dfr, f.parity.flipped()), f.with_values(dfz)


def curl_theta(u):
    """Azimuthal vorticity ``d_z u_r - d_r u_z`` (odd)."""
    _, durz = gradient_rz(u.ur)
    duzr, _ = gradient_rz(u.uz)
    return u.ur.with_values(durz.values - duzr.values, Parity.ODD)


def divergence_axisym(u):
    """Discrete ``d_r u_r + u_r / r + d_z u_z`` and its L2 norm.

    Returns
    -------
    (ScalarFieldRZ, float)
    """
    g = u.ur.grid
    durr, _ = gradient_rz(u.ur)
    _, duzz = gradient_rz(u.uz)
    div = durr.values + u.ur.values / g.r[:, None] + duzz.values
    field_ = u.uz.with_values(div, Parity.EVEN)
    return field_, float(np.sqrt(np.sum(div**2 * g.weights)))


def outer_fraction(values, grid, band=0.1):
    """Peak of ``|values|`` over the outer ``band`` of ``[0, R]`` relative to the global peak."""
    peak = np.max(np.abs(values))
    if peak == 0.0:
        return 0.0
    outer = grid.r >= (1.0 - band) * grid.R
    return float(np.max(np.abs(values[outer])) / peak)


def _resample_z(values, n_out):
    n_in = values.shape[-1]
    if n_in == n_out:
        return values
    spec = sfft.rfft(values, axis=-1, workers=fft_workers())
    keep = min(spec.shape[-1], n_out // 2 + 1)
    out = np.zeros(values.shape[:-1] + (n_out // 2 + 1,), dtype=complex)
    out[..., :keep] = spec[..., :keep]
    if n_out < n_in:
        out[..., -1] = out[..., -1].real
    return sfft.irfft(out, n=n_out, axis=-1, workers=fft_workers()) * (n_out / n_in)


DECAY_TOL = 1e-8


def reconstruct_cartesian(f, N, L, decay_tol=DECAY_TOL):
    """Sample an axisymmetric field on a periodic ``N^3`` box.

    Radial values come from a cubic spline through the parity-reflected
    profile; points beyond ``R`` are zero.  The box is periodic with
    horizontal period ``L`` and vertical period ``Lz`` of the grid.

    Raises
    ------
    ValueError
        If the field does not decay below ``decay_tol`` (relative) in the
        outer tenth of ``[0, R]``, ``L < 2R`` or ``N`` is not a power of two.
    """
    g = f.grid
    if not is_power_of_two(N):
        raise ValueError(f"box size must be a power of two, got {N}")
    if L < 2.0 * g.R:
        raise ValueError(f"box period {L} is smaller than 2R = {2 * g.R}")
    frac = outer_fraction(f.values, g)
    if frac > decay_tol:
        raise ValueError(f"field does not decay near r = R (outer/peak = {frac:.3e})")
    vals = _resample_z(f.values, N)
    r_ext = np.concatenate([-g.r[::-1], g.r, g.R + g.r[:3]])
    v_ext = np.concatenate([f.parity.sign * vals[::-1], vals, np.zeros((3, N))])
    spline = CubicSpline(r_ext, v_ext, axis=0)
    x, y, _ = box_axes(N, L, N, g.Lz)
    rho = np.hypot(x[:, None], y[None, :]).ravel()
    out = np.zeros((rho.size, N))
    inside = rho <= g.R
    out[inside] = spline(rho[inside])
    return Field3D(out.reshape(N, N, N), L, g.Lz)


def box_radius(N, L):
    x, y, _ = box_axes(N, L, N, L)
    return np.hypot(x[:, None], y[None, :])


def reconstruct_velocity(u, N, L):
    """Cartesian components ``(u_r x/r, u_r y/r, u_z)`` of a meridional velocity."""
    ur = reconstruct_cartesian(u.ur, N, L)
    uz = reconstruct_cartesian(u.uz, N, L)
    x, y, _ = box_axes(N, L, N, L)
    rho = box_radius(N, L)
    cx = (x[:, None] / rho)[:, :, None]
    cy = (y[None, :] / rho)[:, :, None]
    return ur.like(ur.values * cx), ur.like(ur.values * cy), uz


def reconstruct_azimuthal(b, N, L):
    """Cartesian components ``(-b y/r, b x/r, 0)`` of an azimuthal vector field."""
    bt = reconstruct_cartesian(b, N, L)
    x, y, _ = box_axes(N, L, N, L)
    rho = box_radius(N, L)
    cx = (x[:, None] / rho)[:, :, None]
    cy = (y[None, :] / rho)[:, :, None]
    return bt.like(-bt.values * cy), bt.like(bt.values * cx), bt.like(np.zeros_like(bt.values))
