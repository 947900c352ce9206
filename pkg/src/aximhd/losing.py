"""Passive-scalar testbed for Besov estimates with a decaying regularity index.

A scalar ``rho`` is transported (optionally with vertical diffusion) by a
prescribed divergence-free meridional velocity.  Along the trajectory the
index decays as ``sigma_t = sigma - eta int_0^t rate`` with
``rate = 1 + ||omega||_sqrtL`` and ``eta`` chosen so that ``sigma_T = sigma - eps``.
Besov norms are measured on a periodic box reconstruction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .grid import GridRZ, Parity, ScalarFieldRZ, dr_central, dz_spectral, reconstruct_cartesian
from .littlewood_paley import (DyadicPartition, besov_norm, block_norms, box_frequencies,
                               box_j_max, commutator_Rq, curl_box, from_spectrum, gradient_box,
                               spectrum)
from .norms import PGrid, growth_report, weighted_lp
from .solver import AxisymmetricSolver, BlowUpError, CFLError, lawson_ssp_step

DIVERGENCE_TOL = 1e-8


def cumulative_trapezoid(times, values):
    """Running trapezoid integral, starting at zero (shared by every schedule)."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    out = np.zeros_like(times)
    if times.size > 1:
        out[1:] = np.cumsum(0.5 * np.diff(times) * (values[1:] + values[:-1]))
    return out


@dataclass(frozen=True)
class LosingSchedule:
    """Piecewise-linear ``rate`` samples and the induced index ``sigma_t``."""

    sigma: float
    eps: float
    T: float
    times: np.ndarray
    rate: np.ndarray
    cumulative: np.ndarray
    eta: float

    def integral(self, t):
        """Exact integral of the linear interpolant of ``rate`` over ``[0, t]``."""
        ts, vs, cum = self.times, self.rate, self.cumulative
        t = float(np.clip(t, ts[0], ts[-1]))
        k = int(np.searchsorted(ts, t, side="right")) - 1
        k = min(max(k, 0), len(ts) - 2) if len(ts) > 1 else 0
        if len(ts) == 1 or t == ts[k]:
            return float(cum[k])
        h = t - ts[k]
        slope = (vs[k + 1] - vs[k]) / (ts[k + 1] - ts[k])
        return float(cum[k] + h * vs[k] + 0.5 * slope * h * h)

    def sigma_at(self, t):
        return self.sigma - self.eta * self.integral(t)

    @property
    def sigma_end(self):
        return self.sigma - self.eta * float(self.cumulative[-1])


def sigma_schedule(times, rate, sigma, eps, T=None):
    """Build a :class:`LosingSchedule` from samples of ``rate`` on ``[0, T]``.

    Raises
    ------
    ValueError
        If ``sigma`` is outside ``(-1, 1)``, ``eps`` is negative, ``rate`` is
        not positive, or the final index ``sigma - eps`` is ``<= -1``.
    """
    times = np.asarray(times, dtype=float)
    rate = np.asarray(rate, dtype=float)
    if times.ndim != 1 or times.shape != rate.shape or times.size == 0:
        raise ValueError("times and rate must be matching 1-D sequences")
    if times[0] != 0.0 or np.any(np.diff(times) <= 0):
        raise ValueError("times must start at 0 and increase strictly")
    T = float(times[-1]) if T is None else float(T)
    if not np.isclose(T, times[-1], rtol=0, atol=1e-12 * max(1.0, T)):
        raise ValueError(f"rate samples end at {times[-1]}, not at T = {T}")
    if not (-1.0 < sigma < 1.0):
        raise ValueError(f"sigma must lie in (-1, 1), got {sigma}")
    if eps < 0:
        raise ValueError(f"eps must be non-negative, got {eps}")
    if sigma - eps <= -1.0:
        raise ValueError(f"eps = {eps} too large: final index {sigma - eps} <= -1")
    if np.any(rate <= 0) or not np.all(np.isfinite(rate)):
        raise ValueError("rate must be finite and positive")
    cum = cumulative_trapezoid(times, rate)
    total = float(cum[-1])
    eta = eps / total if total > 0 else 0.0
    return LosingSchedule(float(sigma), float(eps), T, times, rate, cum, eta)


# -- velocities ---------------------------------------------------------------

def _divergence_check(grid, ur, uz):
    div = dr_central(ur, grid, -1.0) + ur / grid.r[:, None] + dz_spectral(uz, grid)
    scale = weighted_lp(np.hypot(ur, uz), grid.weights, 2)
    res = weighted_lp(div, grid.weights, 2) / scale if scale > 0 else 0.0
    if res > DIVERGENCE_TOL:
        raise ValueError(f"velocity is not divergence-free (relative residual {res:.2e})")


@dataclass
class FrozenVelocity:
    """Time-independent meridional velocity ``(u_r, u_z)``."""

    grid: GridRZ
    ur: np.ndarray
    uz: np.ndarray

    def __post_init__(self):
        _divergence_check(self.grid, self.ur, self.uz)

    def __call__(self, t):
        return self.ur, self.uz


@dataclass
class VelocityReplay:
    """Recorded velocity snapshots, linearly interpolated in time."""

    grid: GridRZ
    times: np.ndarray
    ur: Sequence[np.ndarray]
    uz: Sequence[np.ndarray]

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.times) != len(self.ur) or len(self.ur) != len(self.uz):
            raise ValueError("snapshot lists must have equal length")
        for a, b in zip(self.ur, self.uz):
            _divergence_check(self.grid, a, b)

    def __call__(self, t):
        ts = self.times
        if t <= ts[0]:
            return self.ur[0], self.uz[0]
        if t >= ts[-1]:
            return self.ur[-1], self.uz[-1]
        k = int(np.searchsorted(ts, t, side="right")) - 1
        s = (t - ts[k]) / (ts[k + 1] - ts[k])
        return ((1 - s) * self.ur[k] + s * self.ur[k + 1],
                (1 - s) * self.uz[k] + s * self.uz[k + 1])


def shear_velocity(grid, amplitude=3.0, width=1.0):
    """Vertical shear ``u_z = A exp(-(r/width)^2)``, ``u_r = 0``."""
    uz = amplitude * np.exp(-((grid.r / width) ** 2))[:, None] * np.ones(grid.Nz)
    return FrozenVelocity(grid, np.zeros(grid.shape), uz)


def zero_velocity(grid):
    return FrozenVelocity(grid, np.zeros(grid.shape), np.zeros(grid.shape))


def baseline_scalar(grid, width=0.8, mode=2):
    """``exp(-(r/width)^2) cos(mode z)``: no content in the lowest dyadic block."""
    return np.exp(-((grid.r / width) ** 2))[:, None] * np.cos(mode * grid.z)[None, :]


# -- evolution ----------------------------------------------------------------

@dataclass
class PassiveConfig:
    """Initial scalar, velocity source and data for the passive problem.

    ``forcing`` and ``flux`` are callables ``t -> array`` giving ``f`` and
    ``g`` in ``rho_t + u . grad rho - d_zz rho = f + d_z g``; the diffusion
    term is present only when ``diffusion`` is set.
    """

    grid: GridRZ
    rho0: np.ndarray
    velocity: Callable
    forcing: Optional[Callable] = None
    flux: Optional[Callable] = None
    diffusion: bool = False
    scheme: str = "central2"


@dataclass
class PassiveTrajectory:
    """Snapshots of ``rho`` and of the data and velocity statistics."""

    grid: GridRZ
    times: list = field(default_factory=list)
    rho: list = field(default_factory=list)
    forcing: list = field(default_factory=list)
    flux: list = field(default_factory=list)
    rate: list = field(default_factory=list)
    dzu_weighted: list = field(default_factory=list)
    radial_rate_sq: list = field(default_factory=list)


def velocity_statistics(grid, ur, uz, pgrid=None):
    """``(rate, [||d_z u||_p^2 / p^{3/4}]_p, ||u_r / r||_inf^2)`` for one velocity sample."""
    pgrid = PGrid() if pgrid is None else pgrid
    w = grid.weights
    vort = dz_spectral(ur, grid) - dr_central(uz, grid, 1.0)
    rate = 1.0 + growth_report(vort, w, 0.5, pgrid).value
    dzu = np.hypot(dz_spectral(ur, grid), dz_spectral(uz, grid))
    dz_terms = [weighted_lp(dzu, w, p) ** 2 / p**0.75 for p in pgrid]
    rr = float(np.max(np.abs(ur / grid.r[:, None]))) ** 2
    return rate, dz_terms, rr


def evolve_passive(cfg, dt, T, cadence=1, cfl=0.4):
    """Advance the passive scalar to ``T`` with fixed ``dt`` (last step shortened).

    Snapshots are taken at ``t = 0``, every ``cadence`` steps and at ``T``.
    """
    g = cfg.grid
    solver = AxisymmetricSolver(g, scheme=cfg.scheme, cfl=cfl)
    decay = [g.kz**2 if cfg.diffusion else None]
    ikz = 1j * g.kz
    traj = PassiveTrajectory(g)

    def data(t):
        f = cfg.forcing(t) if cfg.forcing is not None else None
        q = cfg.flux(t) if cfg.flux is not None else None
        return f, q

    def snap(t, rho):
        f, q = data(t)
        ur, uz = cfg.velocity(t)
        rate, dz_terms, rr = velocity_statistics(g, ur, uz)
        traj.times.append(t)
        traj.rho.append(rho.copy())
        traj.forcing.append(f)
        traj.flux.append(q)
        traj.rate.append(rate)
        traj.dzu_weighted.append(dz_terms)
        traj.radial_rate_sq.append(rr)

    def rhs(fields, t):
        (rho,) = fields
        ur, uz = cfg.velocity(t)
        out = solver.advect(rho, ur, uz, 1.0)
        f, q = data(t)
        if f is not None:
            out = out + f
        if q is not None:
            out = out + np.fft.irfft(np.fft.rfft(q, axis=-1) * ikz, n=g.Nz, axis=-1)
        return (out,), np.zeros(1)

    rho = np.array(cfg.rho0, dtype=float)
    t = 0.0
    step = 0
    snap(t, rho)
    tol = 1e-12 * max(1.0, T)
    while t < T - tol:
        h = min(dt, T - t)
        ur, uz = cfg.velocity(t)
        rate = solver.advective_rate(ur, uz)
        if h * rate > cfl * (1 + 1e-12):
            raise CFLError(f"CFL number {h * rate:.3f} exceeds {cfl}; use dt <= {cfl / rate:.4e}")
        (rho,), _ = lawson_ssp_step([rho], t, h, rhs, decay)
        if not np.all(np.isfinite(rho)):
            raise BlowUpError(f"non-finite scalar at t = {t + h:.6g}", t=t + h)
        t += h
        step += 1
        if step % cadence == 0 or t >= T - tol:
            snap(t, rho)
    return traj


def growth_factor(times, dz_terms, radial_rate_sq):
    """``U(T) = exp(T + sup_p int ||d_z u||_p^2 / p^{3/4} + int ||u_r/r||_inf^2)``.

    All constants are set to one; the integrals use the shared trapezoid rule.
    """
    times = np.asarray(times, dtype=float)
    dz = np.asarray(dz_terms, dtype=float)
    sup = max(cumulative_trapezoid(times, dz[:, k])[-1] for k in range(dz.shape[1]))
    rr = cumulative_trapezoid(times, radial_rate_sq)[-1]
    return math.exp(times[-1] - times[0] + sup + rr)


@dataclass(frozen=True)
class LosingReport:
    times: np.ndarray
    sigma_t: np.ndarray
    ratios: np.ndarray
    sup_ratio: float
    growth_factor: float
    initial_norm: float


@dataclass(frozen=True)
class TrajectoryBlocks:
    """Dyadic block norms of every snapshot of ``rho``, ``f`` and ``g``."""

    rho: list
    forcing: list
    flux: list


def trajectory_blocks(traj, p=2.0, box_size=64, box_length=None):
    """Box block norms for each snapshot, reusable across loss budgets."""
    g = traj.grid
    L = 2.0 * g.R if box_length is None else box_length
    part = DyadicPartition.default()

    def norms(values):
        if values is None or not np.any(values):
            return None
        return block_norms(reconstruct_cartesian(ScalarFieldRZ(g, values, Parity.EVEN),
                                                 box_size, L), p, part)

    return TrajectoryBlocks([norms(v) for v in traj.rho], [norms(v) for v in traj.forcing],
                            [norms(v) for v in traj.flux])


def _besov(norms, s):
    if norms is None:
        return 0.0
    j = np.arange(-1, len(norms) - 1)
    return float(np.max(2.0 ** (j * s) * norms))


def losing_bound_report(traj, schedule, p=2.0, box_size=64, box_length=None, blocks=None):
    """Ratios ``||rho(t)||_{B^{sigma_t}} / (||rho_0||_{B^sigma} + data(t))``.

    ``data(t)`` is the square root of the trapezoid integral of
    ``||f||^2 + ||g||^2`` in ``B^{sigma_tau}_{p,inf}``.  Pass ``blocks`` from
    :func:`trajectory_blocks` to reuse the box transforms.
    """
    if blocks is None:
        blocks = trajectory_blocks(traj, p, box_size, box_length)
    times = np.asarray(traj.times)
    sig = np.array([schedule.sigma_at(t) for t in times])
    n0 = _besov(blocks.rho[0], schedule.sigma)
    data_sq = np.array([_besov(f, s) ** 2 + _besov(q, s) ** 2
                        for f, q, s in zip(blocks.forcing, blocks.flux, sig)])
    data = np.sqrt(cumulative_trapezoid(times, data_sq))
    num = np.array([_besov(b, s) for b, s in zip(blocks.rho, sig)])
    den = n0 + data
    ratios = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    growth = growth_factor(times, traj.dzu_weighted, traj.radial_rate_sq)
    return LosingReport(times, sig, ratios, float(np.max(ratios)), growth, n0)


# -- commutator table ---------------------------------------------------------

class StructuralViolation(ArithmeticError):
    """A commutator is nonzero while its bound vanishes identically."""


@dataclass(frozen=True)
class CommutatorTable:
    qs: np.ndarray
    lhs: np.ndarray
    rhs_l2: np.ndarray
    rhs_lp: np.ndarray
    ratio_l2: np.ndarray
    ratio_lp: np.ndarray

    @property
    def max_l2(self):
        return float(np.max(self.ratio_l2)) if self.ratio_l2.size else 0.0

    @property
    def max_lp(self):
        return float(np.max(self.ratio_lp)) if self.ratio_lp.size else 0.0


def _ratio(lhs, rhs, label, q):
    if rhs == 0.0:
        if lhs > 1e-13:
            raise StructuralViolation(f"{label}: commutator at q = {q} is {lhs:.3e} "
                                      "with zero bound")
        return 0.0
    return lhs / rhs


def commutator_bound_report(velocity, scalar, sigma=0.5, p=2.0, q_range=None, pgrid=None):
    """Per-block ratios of ``||R_q(u, scalar)||`` to both commutator bounds.

    The ``L^2`` bound is ``||grad u||_inf sum_{q' >= q-4} 2^{q-q'} ||Delta_q' scalar||_2
    + ||scalar||_inf sum_{|q'-q| <= 5} ||Delta_q' grad u||_2``; the ``L^p`` bound is
    ``||S_{q+5} grad u||_inf sum_{|q'-q| <= 5} ||Delta_q' scalar||_p
    + 2^{-q sigma} sqrt(q+2) ||omega||_sqrtL ||scalar||_{B^sigma_{p,inf}}``.
    Gradients are measured with the pointwise Frobenius norm.
    """
    part = DyadicPartition.default()
    jm = box_j_max(scalar)
    qs = np.arange(0, jm - 1) if q_range is None else np.asarray(list(q_range))
    *_, full = box_frequencies(scalar)
    grads = [gradient_box(comp) for comp in velocity]
    gspecs = [spectrum(c) for row in grads for c in row]
    gmag = np.sqrt(sum(c.values**2 for row in grads for c in row))
    grad_inf = float(np.max(gmag))
    vn2 = block_norms(scalar, 2.0, part)
    vnp = vn2 if p == 2.0 else block_norms(scalar, p, part)
    v_inf = float(np.max(np.abs(scalar.values)))
    curl = curl_box(velocity)
    cmag = np.sqrt(sum(c.values**2 for c in curl))
    sqrtl = growth_report(cmag, scalar.cell_volume, 0.5, pgrid).value
    vbes = float(np.max(2.0 ** (np.arange(-1, jm + 1) * sigma) * vnp))

    def vblock(norms, q):
        return norms[q + 1]

    def grad_block_l2(q):
        if q < -1 or q > jm:
            return 0.0
        m = part.delta(full, q)
        s = sum(from_spectrum(sp * m, scalar).values ** 2 for sp in gspecs)
        return weighted_lp(np.sqrt(s), scalar.cell_volume, 2)

    lhs, r1, r2, a1, a2 = [], [], [], [], []
    for q in qs:
        q = int(q)
        R = commutator_Rq(velocity, scalar, q, part)
        l2 = weighted_lp(R.values, scalar.cell_volume, 2)
        lp = l2 if p == 2.0 else weighted_lp(R.values, scalar.cell_volume, p)
        tail = sum(2.0 ** (q - k) * vblock(vn2, k) for k in range(max(q - 4, -1), jm + 1))
        near = range(max(q - 5, -1), min(q + 5, jm) + 1)
        b1 = grad_inf * tail + v_inf * sum(grad_block_l2(k) for k in near)
        low = part.low(full, q + 5) if q + 5 <= jm else np.ones_like(full)
        s = sum(from_spectrum(sp * low, scalar).values ** 2 for sp in gspecs)
        b2 = (float(np.sqrt(np.max(s))) * sum(vblock(vnp, k) for k in near)
              + 2.0 ** (-q * sigma) * math.sqrt(q + 2) * sqrtl * vbes)
        lhs.append(lp)
        r1.append(b1)
        r2.append(b2)
        a1.append(_ratio(l2, b1, "L2 bound", q))
        a2.append(_ratio(lp, b2, "Lp bound", q))
    return CommutatorTable(np.asarray(qs), np.array(lhs), np.array(r1), np.array(r2),
                           np.array(a1), np.array(a2))


__all__ = ["LosingSchedule", "sigma_schedule", "PassiveConfig", "PassiveTrajectory",
           "evolve_passive", "losing_bound_report", "trajectory_blocks", "TrajectoryBlocks",
           "commutator_bound_report",
           "CommutatorTable", "StructuralViolation", "FrozenVelocity", "VelocityReplay",
           "shear_velocity", "zero_velocity", "baseline_scalar", "growth_factor",
           "cumulative_trapezoid", "velocity_statistics", "besov_norm"]
