"""Dyadic frequency analysis on periodic boxes.

Frequencies are physical (``xi = 2 pi n / L``).  The low-pass profile
``chi`` equals 1 on ``[0, 3/4]``, vanishes on ``[4/3, inf)`` and is glued by
the smooth step ``e^{-1/t}``; the band profile is
``phi(xi) = chi(xi / 2) - chi(xi)``, so ``chi + sum_{j>=0} phi(2^-j .)``
telescopes to one exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft
from scipy.interpolate import PchipInterpolator

from .grid import Field3D, ScalarFieldRZ, box_axes, fft_workers
from .norms import PGrid, growth_report, weighted_lp

LOW_EDGE = 0.75
HIGH_EDGE = 4.0 / 3.0
TABLE_SIZE = 4096


def _smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


@dataclass(frozen=True)
class DyadicPartition:
    """Tabulated ``(chi, phi)`` pair with monotone cubic interpolation."""

    table_size: int = TABLE_SIZE

    @staticmethod
    @lru_cache(maxsize=None)
    def default():
        return DyadicPartition()

    @property
    def _interp(self):
        return _chi_interpolant(self.table_size)

    def chi(self, xi):
        xi = np.abs(np.asarray(xi, dtype=float))
        out = np.zeros_like(xi)
        out[xi <= LOW_EDGE] = 1.0
        mid = (xi > LOW_EDGE) & (xi < HIGH_EDGE)
        out[mid] = self._interp(xi[mid])
        return out

    def phi(self, xi):
        return self.chi(np.asarray(xi) / 2.0) - self.chi(xi)

    def delta(self, xi, j):
        """Multiplier of the block ``j >= -1``."""
        if j < -1:
            return np.zeros_like(np.asarray(xi, dtype=float))
        if j == -1:
            return self.chi(xi)
        return self.phi(np.asarray(xi) / 2.0**j)

    def low(self, xi, j):
        """Multiplier of ``S_j = sum_{k <= j-1} Delta_k``; zero for ``j < 0``."""
        if j < 0:
            return np.zeros_like(np.asarray(xi, dtype=float))
        return self.chi(np.asarray(xi) / 2.0**j)

    def multiplier(self, xi, j, kind):
        if kind == "Delta":
            return self.delta(xi, j)
        if kind == "S":
            return self.low(xi, j)
        raise ValueError(f"kind must be 'Delta' or 'S', got {kind!r}")


@lru_cache(maxsize=4)
def _chi_interpolant(n):
    xs = np.linspace(LOW_EDGE, HIGH_EDGE, n)
    ys = _smooth_step((HIGH_EDGE - xs) / (HIGH_EDGE - LOW_EDGE))
    return PchipInterpolator(xs, ys)


def j_max_for(n):
    """Highest block index used on an axis with ``n`` samples."""
    return int(np.log2(n)) - 2


@lru_cache(maxsize=16)
def _box_frequencies(N, Nzb, Lh, Lz):
    kx = 2.0 * np.pi * np.fft.fftfreq(N, d=Lh / N)
    kz = 2.0 * np.pi * np.fft.rfftfreq(Nzb, d=Lz / Nzb)
    kh = np.hypot(kx[:, None], kx[None, :])[:, :, None]
    kzz = np.abs(kz)[None, None, :]
    full = np.sqrt(kh**2 + kzz**2)
    return kx, kz, kh, kzz, full


def box_frequencies(F):
    """``(kx, kz, |xi_h|, |xi_z|, |xi|)`` for the real FFT layout of ``F``."""
    N, _, Nzb = F.shape
    return _box_frequencies(N, Nzb, float(F.Lh), float(F.Lz))


def spectrum(F):
    return sfft.rfftn(F.values, workers=fft_workers())


def from_spectrum(spec, F):
    return F.like(sfft.irfftn(spec, s=F.shape, workers=fft_workers()))


def _parseval_counts(Nzb):
    """Multiplicity of each real-FFT column in the full spectrum."""
    c = np.full(Nzb // 2 + 1, 2.0)
    c[0] = 1.0
    if Nzb % 2 == 0:
        c[-1] = 1.0
    return c


def box_j_max(F):
    return j_max_for(F.N)


def _check_block(F, j):
    jm = box_j_max(F)
    if j > jm:
        raise ValueError(f"block {j} exceeds j_max = {jm} for N = {F.N}")
    if j < -1:
        raise ValueError(f"block index must be >= -1, got {j}")


def lp_project(F, j, kind="Delta", partition=None):
    """Apply ``Delta_j`` or ``S_j`` to a box field."""
    partition = DyadicPartition.default() if partition is None else partition
    _check_block(F, j)
    *_, full = box_frequencies(F)
    return from_spectrum(spectrum(F) * partition.multiplier(full, j, kind), F)


def all_blocks(F, partition=None, j_top=None):
    """List ``[Delta_{-1} F, ..., Delta_{j_top} F]`` (``j_top`` defaults to ``j_max``)."""
    partition = DyadicPartition.default() if partition is None else partition
    j_top = box_j_max(F) if j_top is None else j_top
    *_, full = box_frequencies(F)
    spec = spectrum(F)
    return [from_spectrum(spec * partition.delta(full, j), F) for j in range(-1, j_top + 1)]


def _vertical_freqs_rz(grid):
    return np.abs(grid.kz)


def vertical_block(f, k, kind="Delta", partition=None):
    """Apply the one-dimensional block ``Delta^v_k`` (or ``S^v_k``) in ``z``.

    Accepts meridian fields directly as well as box fields.
    """
    partition = DyadicPartition.default() if partition is None else partition
    if isinstance(f, ScalarFieldRZ):
        kmax = j_max_for(f.grid.Nz)
        if k > kmax or k < -1:
            raise ValueError(f"vertical block {k} outside [-1, {kmax}]")
        m = partition.multiplier(_vertical_freqs_rz(f.grid), k, kind)
        spec = sfft.rfft(f.values, axis=-1, workers=fft_workers())
        return f.with_values(sfft.irfft(spec * m, n=f.grid.Nz, axis=-1, workers=fft_workers()))
    kmax = j_max_for(f.shape[2])
    if k > kmax or k < -1:
        raise ValueError(f"vertical block {k} outside [-1, {kmax}]")
    _, _, _, kzz, _ = box_frequencies(f)
    return from_spectrum(spectrum(f) * partition.multiplier(kzz, k, kind), f)


def vertical_block_values(values, grid, k, partition=None):
    """Array form of :func:`vertical_block` for meridian samples."""
    partition = DyadicPartition.default() if partition is None else partition
    m = partition.delta(_vertical_freqs_rz(grid), k)
    spec = sfft.rfft(values, axis=-1, workers=fft_workers())
    return sfft.irfft(spec * m, n=grid.Nz, axis=-1, workers=fft_workers())


def horizontal_block(F, j, kind="Delta", partition=None):
    """Apply ``Delta^h_j`` (or ``S^h_j``) acting on ``(x, y)`` only."""
    partition = DyadicPartition.default() if partition is None else partition
    jm = box_j_max(F)
    if j > jm or j < -1:
        raise ValueError(f"horizontal block {j} outside [-1, {jm}]")
    _, _, kh, _, _ = box_frequencies(F)
    return from_spectrum(spectrum(F) * partition.multiplier(kh, j, kind), F)


def block_norms(F, p, partition=None):
    """``||Delta_j F||_{L^p}`` for ``j = -1 .. j_max``."""
    return np.array([weighted_lp(b.values, F.cell_volume, p) for b in all_blocks(F, partition)])


def besov_from_blocks(norms, sigma):
    j = np.arange(-1, len(norms) - 1)
    return float(np.max(2.0 ** (j * sigma) * norms))


def besov_norm(F, sigma, p, flavor="iso", partition=None):
    """Besov ``B^sigma_{p,inf}`` norm on the box.

    ``flavor`` is ``"iso"`` or ``("aniso", alpha, beta)``; the anisotropic
    norm is ``sup_{j,k} 2^{j alpha} 2^{k beta} ||Delta^h_j Delta^v_k F||_p``
    and ignores ``sigma``.
    """
    if abs(sigma) > 4:
        raise ValueError(f"|sigma| must be <= 4, got {sigma}")
    partition = DyadicPartition.default() if partition is None else partition
    if flavor == "iso":
        return besov_from_blocks(block_norms(F, p, partition), sigma)
    if isinstance(flavor, tuple) and flavor[0] == "aniso":
        _, alpha, beta = flavor
        _, _, kh, kzz, _ = box_frequencies(F)
        spec = spectrum(F)
        jm, km = box_j_max(F), j_max_for(F.shape[2])
        best = 0.0
        for j in range(-1, jm + 1):
            mh = partition.delta(kh, j)
            for k in range(-1, km + 1):
                blk = from_spectrum(spec * mh * partition.delta(kzz, k), F)
                val = 2.0 ** (j * alpha + k * beta) * weighted_lp(blk.values, F.cell_volume, p)
                best = max(best, val)
        return float(best)
    raise ValueError(f"unknown flavor {flavor!r}")


def block_energy_weights(F, s, partition=None):
    """Per-coefficient weights ``sum_j 2^{2js} phi_j`` and Parseval-scaled power."""
    partition = DyadicPartition.default() if partition is None else partition
    *_, full = box_frequencies(F)
    weight = np.zeros_like(full)
    for j in range(-1, box_j_max(F) + 1):
        weight += 2.0 ** (2 * j * s) * partition.delta(full, j)
    spec = spectrum(F)
    scale = F.cell_volume / F.values.size
    power = np.abs(spec) ** 2 * _parseval_counts(F.shape[2]) * scale
    return weight, power


def square_overlap(F, partition=None):
    """``sum_j ||Delta_j F||^2 / ||F||^2``: the square-sense partition defect."""
    total = np.sum(F.values**2)
    if total == 0:
        return 1.0
    return float(sum(np.sum(b.values**2) for b in all_blocks(F, partition)) / total)


def spectral_excess(F, limit_fraction=0.25):
    """Relative spectral energy outside the alias-free band ``|n_a| <= limit_fraction * N_a``."""
    N, _, Nzb = F.shape
    spec = np.abs(spectrum(F)) ** 2 * _parseval_counts(Nzb)
    nx = np.abs(np.fft.fftfreq(N) * N)
    nz = np.abs(np.fft.rfftfreq(Nzb) * Nzb)
    inside = ((nx[:, None, None] <= limit_fraction * N)
              & (nx[None, :, None] <= limit_fraction * N)
              & (nz[None, None, :] <= limit_fraction * Nzb))
    total = spec.sum()
    if total == 0:
        return 0.0
    *_, full = box_frequencies(F)
    inside &= full <= 1.5 * 2.0 ** box_j_max(F)
    return float(spec[~inside].sum() / total)


MARGIN_TOL = 1e-24


def _require_margin(*fields):
    for F in fields:
        excess = spectral_excess(F)
        if excess > MARGIN_TOL:
            raise ValueError(
                f"input is not band-limited with a dealiasing margin (excess energy {excess:.2e})")


@dataclass(frozen=True)
class BonyParts:
    paraproduct_uv: Field3D
    paraproduct_vu: Field3D
    remainder: Field3D

    def total(self):
        return self.paraproduct_uv.like(self.paraproduct_uv.values + self.paraproduct_vu.values
                                        + self.remainder.values)


def bony_decompose(first, second, partition=None):
    """Split the product ``first * second`` into two paraproducts and a remainder.

    The paraproduct of ``second`` by ``first`` is ``sum_j S_{j-1} first Delta_j second``;
    the remainder collects the products of blocks with ``|i - j| <= 1``, so the
    three parts sum to the product.
    """
    _require_margin(first, second)
    bu = [b.values for b in all_blocks(first, partition)]
    bv = [b.values for b in all_blocks(second, partition)]
    n = len(bu)
    tuv = np.zeros(first.shape)
    tvu = np.zeros(first.shape)
    rem = np.zeros(first.shape)
    low_u = np.zeros(first.shape)
    low_v = np.zeros(first.shape)
    for idx in range(n):
        # S_{j-1} is the sum of blocks up to j-2, i.e. list positions < idx - 1
        if idx >= 2:
            low_u += bu[idx - 2]
            low_v += bv[idx - 2]
        tuv += low_u * bv[idx]
        tvu += low_v * bu[idx]
        for jdx in range(max(0, idx - 1), min(n, idx + 2)):
            rem += bu[idx] * bv[jdx]
    return BonyParts(first.like(tuv), first.like(tvu), first.like(rem))


def _gradient_spec(spec, F):
    kx, kz, *_ = box_frequencies(F)
    return (1j * kx[:, None, None] * spec, 1j * kx[None, :, None] * spec,
            1j * kz[None, None, :] * spec)


def gradient_box(F):
    """Spectral gradient ``(d_x F, d_y F, d_z F)``."""
    spec = spectrum(F)
    return tuple(from_spectrum(g, F) for g in _gradient_spec(spec, F))


def divergence_box(components):
    total = None
    for axis, comp in enumerate(components):
        d = gradient_box(comp)[axis].values
        total = d if total is None else total + d
    return components[0].like(total)


def curl_box(components):
    gx, gy, gz = (gradient_box(comp) for comp in components)
    wx = gy[2].values - gz[1].values
    wy = gz[0].values - gx[2].values
    wz = gx[1].values - gy[0].values
    return tuple(components[0].like(w) for w in (wx, wy, wz))


def divergence_residual(components):
    """``||div u||_2 / sum_a ||d_a u_a||_2`` for components ``u_a`` (zero for the zero field)."""
    parts = [gradient_box(comp)[a].values for a, comp in enumerate(components)]
    scale = sum(np.sqrt(np.sum(p**2)) for p in parts)
    if scale == 0:
        return 0.0
    return float(np.sqrt(np.sum(sum(parts) ** 2)) / scale)


DIVERGENCE_TOL = 1e-8


def commutator_Rq(velocity, scalar, q, partition=None):
    """``S_{q+1} u . grad Delta_q f - Delta_q (u . grad f)`` for ``u = velocity``, ``f = scalar``.

    ``velocity`` is a tuple of three components and must be solenoidal.
    """
    partition = DyadicPartition.default() if partition is None else partition
    res = divergence_residual(velocity)
    if res > DIVERGENCE_TOL:
        raise ValueError(f"velocity is not divergence-free (relative residual {res:.2e})")
    _require_margin(scalar, *velocity)
    *_, full = box_frequencies(scalar)
    spec_v = spectrum(scalar)
    grad_v = _gradient_spec(spec_v, scalar)
    dq = partition.delta(full, q)
    low = partition.low(full, q + 1)
    localized = np.zeros(scalar.shape)
    advect = np.zeros(scalar.shape)
    for comp, gv in zip(velocity, grad_v):
        su = sfft.irfftn(spectrum(comp) * low, s=scalar.shape, workers=fft_workers())
        localized += su * sfft.irfftn(gv * dq, s=scalar.shape, workers=fft_workers())
        advect += comp.values * sfft.irfftn(gv, s=scalar.shape, workers=fft_workers())
    projected = sfft.irfftn(sfft.rfftn(advect, workers=fft_workers()) * dq, s=scalar.shape,
                            workers=fft_workers())
    return scalar.like(localized - projected)


def lambda_frac(F, alpha, direction="full"):
    """Fractional multiplier ``|xi|^alpha`` (or ``|xi_z|^alpha``, ``|xi_h|^alpha``).

    The zero frequency is mapped to zero.  Meridian fields accept only the
    vertical direction.
    """
    if not (0.0 <= alpha <= 2.0):
        raise ValueError(f"alpha must lie in [0, 2], got {alpha}")
    if isinstance(F, ScalarFieldRZ):
        if direction != "vertical":
            raise ValueError("meridian fields support only the vertical direction")
        return F.with_values(lambda_vertical(F.values, F.grid, alpha))
    _, _, kh, kzz, full = box_frequencies(F)
    k = {"full": full, "vertical": kzz, "horizontal": kh}[direction]
    with np.errstate(divide="ignore"):
        m = np.where(k > 0, k**alpha, 0.0)
    return from_spectrum(spectrum(F) * m, F)


def lambda_vertical(values, grid, alpha):
    """``|d_z|^alpha`` applied along the last axis of meridian samples."""
    k = np.abs(grid.kz)
    m = np.where(k > 0, k ** alpha, 0.0) if alpha > 0 else (k > 0).astype(float)
    spec = sfft.rfft(values, axis=-1, workers=fft_workers())
    return sfft.irfft(spec * m, n=grid.Nz, axis=-1, workers=fft_workers())


@dataclass(frozen=True)
class BernsteinRatios:
    """Measured Bernstein ratios for one block.

    ``upper`` is ``||L^a D_j F||_q / (2^{aj + 3j(1/p - 1/q)} ||D_j F||_p)``;
    ``two_sided`` is ``||L^a D_j F||_q / (2^{aj} ||D_j F||_q)``.
    """

    upper: float
    two_sided: float


EMPTY_BLOCK_TOL = 1e-12


def bernstein_check(F, j, alpha, p, q, partition=None):
    block = lp_project(F, j, "Delta", partition) if j is not None else F
    base_p = weighted_lp(block.values, F.cell_volume, p)
    base_q = weighted_lp(block.values, F.cell_volume, q)
    scale = float(np.max(np.abs(F.values)))
    if np.max(np.abs(block.values)) <= EMPTY_BLOCK_TOL * scale or base_p == 0.0 or base_q == 0.0:
        raise ValueError("block is empty; Bernstein ratio undefined")
    lam = lambda_frac(block, alpha, "full") if alpha > 0 else block
    top = weighted_lp(lam.values, F.cell_volume, q)
    inv = lambda x: 0.0 if np.isinf(x) else 1.0 / x
    upper = top / (2.0 ** (alpha * j + 3 * j * (inv(p) - inv(q))) * base_p)
    two = top / (2.0 ** (alpha * j) * base_q)
    return BernsteinRatios(float(upper), float(two))


def random_band_limited(N, Lh, Lz, max_mode, seed, decay=1.0, Nzb=None):
    """Seeded real field ``sum c_n e^{i xi_n . x}`` over ``|n_a| <= max_mode``.

    The coefficient cube depends only on ``(max_mode, seed, decay)``, so the
    same continuous field is sampled at every resolution.
    """
    rng = np.random.default_rng(seed)
    m = max_mode
    size = 2 * m + 1
    coef = rng.standard_normal((size, size, size)) + 1j * rng.standard_normal((size, size, size))
    n = np.arange(-m, m + 1)
    nn = np.sqrt(n[:, None, None] ** 2 + n[None, :, None] ** 2 + n[None, None, :] ** 2)
    coef *= (1.0 + nn) ** (-decay)
    return _synthesize(coef, m, N, Lh, Lz, Nzb)


def _synthesize(coef, m, N, Lh, Lz, Nzb=None):
    Nzb = N if Nzb is None else Nzb
    if 2 * m >= min(N, Nzb):
        raise ValueError("mode cube does not fit the box")
    x, _, z = box_axes(N, Lh, Nzb, Lz)
    n = np.arange(-m, m + 1)
    ex = np.exp(1j * 2 * np.pi * np.outer(n, x) / Lh)
    ez = np.exp(1j * 2 * np.pi * np.outer(n, z) / Lz)
    vals = np.einsum("abc,ai,bj,ck->ijk", coef, ex, ex, ez, optimize=True)
    return Field3D(vals.real.copy(), Lh, Lz)


def random_solenoidal(N, L, max_mode, seed, decay=1.0):
    """Seeded divergence-free vector field via Leray projection of the mode cube."""
    rng = np.random.default_rng(seed)
    m = max_mode
    size = 2 * m + 1
    coefs = [rng.standard_normal((size,) * 3) + 1j * rng.standard_normal((size,) * 3)
             for _ in range(3)]
    n = np.arange(-m, m + 1).astype(float)
    k = np.meshgrid(n, n, n, indexing="ij")
    k2 = sum(c**2 for c in k)
    k2[m, m, m] = 1.0
    dot = sum(kc * c for kc, c in zip(k, coefs))
    nn = np.sqrt(k2)
    out = []
    for kc, c in zip(k, coefs):
        proj = (c - kc * dot / k2) * (1.0 + nn) ** (-decay)
        out.append(_synthesize(proj, m, N, L, L))
    return tuple(out)


def pgrid_growth(F, a, pgrid=None):
    return growth_report(F.values, F.cell_volume, a, pgrid)


__all__ = [
    "DyadicPartition", "PGrid", "lp_project", "vertical_block", "horizontal_block",
    "besov_norm", "bony_decompose", "commutator_Rq", "lambda_frac", "bernstein_check",
    "random_band_limited", "random_solenoidal", "square_overlap", "block_norms",
]
