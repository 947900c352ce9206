"""Time integration of the reduced axisymmetric MHD system.

The prognostic pair is the vorticity ratio ``w = omega_theta / r`` and the
field ratio ``m = b_theta / r``:

    d_t w + u . grad w - d_zz w = -d_z(m^2)
    d_t m + u . grad m          = 0

with ``u = curl(stream e_theta)`` and ``-(d_rr + d_r / r - 1/r^2 + d_zz) stream
= r w``.  Vertical diffusion is integrated exactly in ``z``-Fourier space
(Lawson integrating factor) around a four-stage, third-order SSP method
whose stage abscissas are non-decreasing, so only forward heat propagators
are ever applied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.fft as sfft

from . import kernels
from .grid import (GridRZ, Parity, ScalarFieldRZ, VelocityRZ, build_grid, dr_central,
                   dz_spectral, fft_workers, outer_fraction)

VISCOSITY = 1.0

# Shu-Osher form: stage_i = sum_j ALPHA[i][j] stage_j + dt BETA[i][j] F(stage_j).
# Third order, SSP coefficient min(ALPHA/BETA) ~ 1.49, abscissas 0, .38, .698, .698.
_A20 = 0.19056966296665898
_A30 = 0.48995297216265643
_A40 = 0.03
_A41 = 0.3260546527525012
_B43 = 0.42689356473515894
_B32 = 0.34178312291091634

SSP_ALPHA = (
    (1.0,),
    (_A20, 1.0 - _A20),
    (_A30, 0.0, 1.0 - _A30),
    (_A40, _A41, 0.0, 1.0 - _A40 - _A41),
)
SSP_BETA = (
    (0.38,),
    (0.0, 0.39),
    (0.0, 0.0, _B32),
    (0.0, 0.0, 0.0, _B43),
)


def butcher_from_shu_osher(alpha, beta):
    """Butcher ``(A, b, c)`` of an explicit method in Shu-Osher form."""
    s = len(alpha)
    rows = [np.zeros(s)]
    for i in range(s):
        row = np.zeros(s)
        row[: i + 1] += np.asarray(beta[i])
        for k in range(1, i + 1):
            row += alpha[i][k] * rows[k]
        rows.append(row)
    A = np.array(rows[:s])
    b = rows[s]
    return A, b, A.sum(axis=1)


SSP_A, SSP_B, SSP_C = butcher_from_shu_osher(SSP_ALPHA, SSP_BETA)
SSP_COEFFICIENT = min(a / b for ra, rb in zip(SSP_ALPHA, SSP_BETA)
                      for a, b in zip(ra, rb) if b > 0)
# Forward-Euler limit of the limited upwind operator: nu_r + nu_z <= 1/2.
FORWARD_EULER_CFL = 0.5


def lawson_ssp_step(fields, t, dt, rhs, decay):
    """One Lawson step of the SSP method.

    Parameters
    ----------
    fields : list of ndarray
        Prognostic arrays of shape ``(Nr, Nz)``.
    rhs : callable
        ``rhs(fields, t) -> (tendencies, extra)``; ``extra`` is a 1-D array
        of integrands accumulated with the quadrature weights.
    decay : list
        Per field either ``None`` or the ``rfft`` symbol ``nu k_z^2``.

    Returns
    -------
    (list of ndarray, ndarray)
        New fields and ``dt * sum_j b_j extra_j``.
    """
    c = list(SSP_C) + [1.0]
    stages = [list(fields)]
    specs = [[_rfft(f) if d is not None else None for f, d in zip(fields, decay)]]
    tends, tspecs = [], []
    quad = None
    for i, (arow, brow) in enumerate(zip(SSP_ALPHA, SSP_BETA)):
        tend, extra = rhs(stages[i], t + c[i] * dt)
        tends.append(tend)
        tspecs.append([_rfft(g) if d is not None else None for g, d in zip(tend, decay)])
        extra = np.asarray(extra, dtype=float)
        q = dt * SSP_B[i] * extra
        quad = q if quad is None else quad + q
        new, new_specs = [], []
        for f_idx, d in enumerate(decay):
            if d is None:
                acc = 0.0
                for j, (a, b) in enumerate(zip(arow, brow)):
                    if a:
                        acc = acc + a * stages[j][f_idx]
                    if b:
                        acc = acc + (b * dt) * tends[j][f_idx]
                new.append(acc)
                new_specs.append(None)
            else:
                acc = 0.0
                for j, (a, b) in enumerate(zip(arow, brow)):
                    if not (a or b):
                        continue
                    term = 0.0
                    if a:
                        term = a * specs[j][f_idx]
                    if b:
                        term = term + (b * dt) * tspecs[j][f_idx]
                    tau = (c[i + 1] - c[j]) * dt
                    acc = acc + (np.exp(-d * tau) * term if tau != 0.0 else term)
                new.append(_irfft(acc, fields[f_idx].shape[-1]))
                new_specs.append(acc)
        stages.append(new)
        specs.append(new_specs)
    return stages[-1], quad


def _rfft(a):
    return sfft.rfft(a, axis=-1, workers=fft_workers())


def _irfft(a, n):
    return sfft.irfft(a, n=n, axis=-1, workers=fft_workers())


class BlowUpError(RuntimeError):
    """Raised when a step produces non-finite values; carries partial records."""

    def __init__(self, message, t=None, report=None, records=None):
        super().__init__(message)
        self.t = t
        self.report = report or {}
        self.records = records or []


class CFLError(ValueError):
    pass


@dataclass
class Derived:
    """Fields derived from the vorticity ratio by the stream solve."""

    stream: np.ndarray
    ur: np.ndarray
    uz: np.ndarray
    vorticity: np.ndarray


@dataclass
class State:
    """Prognostic pair plus clock and time-integrated bookkeeping.

    ``accum`` holds integrals advanced with the stepper's quadrature:
    ``dissipation`` (of ``||d_z u||^2``) and ``vort_ratio_dz`` (of
    ``||d_z w||^2``).
    """

    grid: GridRZ
    t: float
    vort_ratio: np.ndarray
    field_ratio: np.ndarray
    step: int = 0
    accum: dict = field(default_factory=lambda: {"dissipation": 0.0, "vort_ratio_dz": 0.0})
    _cache: Optional[Derived] = field(default=None, repr=False, compare=False)

    @property
    def vort_ratio_field(self):
        return ScalarFieldRZ(self.grid, self.vort_ratio, Parity.EVEN)

    @property
    def field_ratio_field(self):
        return ScalarFieldRZ(self.grid, self.field_ratio, Parity.EVEN)

    @property
    def vorticity(self):
        return self.grid.r[:, None] * self.vort_ratio

    @property
    def azimuthal_field(self):
        return self.grid.r[:, None] * self.field_ratio

    def copy(self):
        return State(self.grid, self.t, self.vort_ratio.copy(), self.field_ratio.copy(),
                     self.step, dict(self.accum))


@dataclass(frozen=True)
class SolverConfig:
    """Numerical and physical parameters of a run (viscosity is fixed to 1)."""

    Nr: int = 128
    Nz: int = 128
    R: float = 4.0
    Lz: float = 2.0 * math.pi
    dt: float = 0.0
    dt_max: float = 0.1
    T_end: float = 5.0
    cfl: float = 0.4
    scheme: str = "central2"
    dealias: bool = True
    cadence: int = 10
    preset: str = "gaussian-ring"
    ring_amp: float = 3.0
    ring_radius: float = 1.2
    ring_width: float = 0.5
    field_amp: float = 1.0
    field_width: float = 0.6
    field_radius: float = 0.0
    field_power: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.dt < 0:
            raise ValueError("dt must be positive (or 0 for CFL-adaptive stepping)")
        if not (0 < self.cfl <= 1):
            raise ValueError("CFL factor must lie in (0, 1]")
        if self.scheme not in ("central2", "upwind3"):
            raise ValueError(f"unknown advection scheme {self.scheme!r}")
        if self.T_end < 0:
            raise ValueError("T_end must be non-negative")
        if self.cadence < 1:
            raise ValueError("cadence must be >= 1")
        build_grid(self.Nr, self.Nz, self.R, self.Lz)

    @property
    def viscosity(self):
        return VISCOSITY

    def grid(self):
        return build_grid(self.Nr, self.Nz, self.R, self.Lz)


class AxisymmetricSolver:
    """Spatial operators and stepping for one grid and scheme.

    Parameters
    ----------
    grid : GridRZ
    scheme : {"central2", "upwind3"}
    dealias : bool
        Apply the 2/3 rule to the Lorentz source.
    advection, source, diffusion : bool
        Switches for verification runs.
    forcing : callable, optional
        ``forcing(t) -> (f_w, f_m)`` added to the tendencies.
    frozen_velocity : tuple of ndarray, optional
        ``(ur, uz)`` used for advection instead of the derived velocity.
    """

    def __init__(self, grid, scheme="central2", dealias=True, cfl=0.4, advection=True,
                 source=True, diffusion=True, forcing=None, frozen_velocity=None):
        if scheme not in ("central2", "upwind3"):
            raise ValueError(f"unknown advection scheme {scheme!r}")
        self.grid = grid
        self.scheme = scheme
        self.dealias = dealias
        self.cfl = cfl
        self.advection = advection
        self.source = source
        self.diffusion = diffusion
        self.forcing = forcing
        self.frozen_velocity = frozen_velocity
        self._factor_elliptic()
        n = np.arange(grid.Nz // 2 + 1)
        self._dealias_mask = (n <= grid.Nz / 3.0).astype(float)
        self._ikz = 1j * grid.kz
        if grid.Nz % 2 == 0:
            self._ikz = self._ikz.copy()
            self._ikz[-1] = 0.0
        self._decay = VISCOSITY * grid.kz**2

    # -- elliptic solve -------------------------------------------------
    def _factor_elliptic(self):
        g = self.grid
        r, h = g.r, g.dr
        lower = 1.0 / h**2 - 1.0 / (2.0 * r * h)
        upper = 1.0 / h**2 + 1.0 / (2.0 * r * h)
        base = -2.0 / h**2 - 1.0 / r**2
        base = base.copy()
        base[-1] -= upper[-1]  # Dirichlet ghost: stream_N = -stream_{N-1}
        lower = lower.copy()
        lower[0] = 0.0  # exact: r_0 = dr / 2
        diag = base[:, None] - g.kz[None, :] ** 2
        n = g.Nr
        cprime = np.empty_like(diag)
        inv_den = np.empty_like(diag)
        inv_den[0] = 1.0 / diag[0]
        cprime[0] = upper[0] * inv_den[0]
        for i in range(1, n):
            den = diag[i] - lower[i] * cprime[i - 1]
            if np.any(np.abs(den) < 1e-300):
                raise AssertionError("singular elliptic system")
            inv_den[i] = 1.0 / den
            cprime[i] = upper[i] * inv_den[i]
        self._lower = np.ascontiguousarray(lower)
        self._upper = upper
        self._diag = diag
        self._cprime = np.ascontiguousarray(cprime)
        self._inv_den = np.ascontiguousarray(inv_den)

    def solve_stream_values(self, vorticity):
        g = self.grid
        rhs = np.ascontiguousarray(-_rfft(vorticity))
        out = np.empty_like(rhs)
        kernels.tridiag_solve(self._lower, self._cprime, self._inv_den, rhs, out)
        return _irfft(out, g.Nz)

    def apply_elliptic(self, stream):
        """Discrete ``-(d_rr + d_r/r - 1/r^2 + d_zz)`` with the solver's boundary rows."""
        g = self.grid
        ext = np.empty((g.Nr + 1, g.Nz))
        ext[:-1] = stream
        ext[-1] = -stream[-1]
        lo = np.vstack([np.zeros((1, g.Nz)), ext[:-2]])
        up = ext[1:]
        r = g.r[:, None]
        h = g.dr
        lap = ((up - 2 * stream + lo) / h**2 + (up - lo) / (2 * r * h) - stream / r**2
               + dz_spectral(stream, g, order=2))
        return -lap

    def velocity_values(self, stream):
        g = self.grid
        ur = -dz_spectral(stream, g)
        uz = dr_central(stream, g, -1.0) + stream / g.r[:, None]
        return ur, uz

    def derive_values(self, vort_ratio):
        vort = self.grid.r[:, None] * vort_ratio
        stream = self.solve_stream_values(vort)
        ur, uz = self.velocity_values(stream)
        return Derived(stream, ur, uz, vort)

    def derive(self, state):
        if state._cache is None:
            state._cache = self.derive_values(state.vort_ratio)
        return state._cache

    # -- tendencies ------------------------------------------------------
    def advect(self, f, ur, uz, sign=1.0):
        """``-(ur d_r f + uz d_z f)`` with the configured scheme."""
        g = self.grid
        if self.scheme == "upwind3":
            out = np.empty_like(f)
            kernels.limited_advection(np.ascontiguousarray(f), np.ascontiguousarray(ur),
                                      np.ascontiguousarray(uz), g.dr, g.dz, sign, out)
            return out
        return -(ur * dr_central(f, g, sign) + uz * dz_spectral(f, g))

    def lorentz_source(self, field_ratio):
        spec = _rfft(field_ratio**2) * self._ikz
        if self.dealias:
            spec = spec * self._dealias_mask
        return -_irfft(spec, self.grid.Nz)

    def velocity_for(self, derived):
        if self.frozen_velocity is not None:
            return self.frozen_velocity
        return derived.ur, derived.uz

    def tendencies_values(self, vort_ratio, field_ratio, t, derived=None):
        derived = self.derive_values(vort_ratio) if derived is None else derived
        ur, uz = self.velocity_for(derived)
        if self.advection:
            dw = self.advect(vort_ratio, ur, uz)
            dm = self.advect(field_ratio, ur, uz)
        else:
            dw = np.zeros_like(vort_ratio)
            dm = np.zeros_like(field_ratio)
        if self.source:
            dw = dw + self.lorentz_source(field_ratio)
        if self.forcing is not None:
            fw, fm = self.forcing(t)
            dw = dw + fw
            dm = dm + fm
        return dw, dm, derived

    def tendencies(self, state, dt=None):
        """Advective plus source tendencies ``(dw/dt, dm/dt)``; diffusion is excluded.

        With ``dt`` given, a step of that size is first checked against the
        CFL limit and :class:`CFLError` names the admissible step.
        """
        derived = self.derive(state)
        ur, uz = self.velocity_for(derived)
        self.check_cfl(ur, uz, dt)
        dw, dm, _ = self.tendencies_values(state.vort_ratio, state.field_ratio, state.t, derived)
        return dw, dm

    # -- stepping --------------------------------------------------------
    def advective_rate(self, ur, uz):
        g = self.grid
        return float(np.max(np.abs(ur) / g.dr + np.abs(uz) / g.dz))

    def check_cfl(self, ur, uz, dt):
        if dt is None or not self.advection:
            return
        number = dt * self.advective_rate(ur, uz)
        if number > self.cfl * (1 + 1e-12):
            rate = self.advective_rate(ur, uz)
            raise CFLError(f"CFL number {number:.3f} exceeds {self.cfl}; "
                           f"use dt <= {self.cfl / rate:.4e}")

    def stable_dt(self, state, dt_max=0.1):
        ur, uz = self.velocity_for(self.derive(state))
        rate = self.advective_rate(ur, uz) if self.advection else 0.0
        return dt_max if rate == 0.0 else min(dt_max, self.cfl / rate)

    def _dissipation_terms(self, derived, vort_ratio):
        g = self.grid
        w = g.weights
        dur = dz_spectral(derived.ur, g)
        duz = dz_spectral(derived.uz, g)
        dw = dz_spectral(vort_ratio, g)
        return np.array([np.sum((dur**2 + duz**2) * w), np.sum(dw**2 * w)])

    def step(self, state, dt):
        """Advance one step; raises :class:`BlowUpError` on non-finite output."""
        derived = self.derive(state)
        ur, uz = self.velocity_for(derived)
        self.check_cfl(ur, uz, dt)

        def rhs(fields, t):
            w, m = fields
            d = derived if w is state.vort_ratio else self.derive_values(w)
            dw, dm, d = self.tendencies_values(w, m, t, d)
            return (dw, dm), self._dissipation_terms(d, w)

        decay = [self._decay if self.diffusion else None, None]
        (w1, m1), quad = lawson_ssp_step([state.vort_ratio, state.field_ratio], state.t, dt,
                                         rhs, decay)
        if not (np.all(np.isfinite(w1)) and np.all(np.isfinite(m1))):
            raise BlowUpError(f"non-finite values at t = {state.t + dt:.6g}", t=state.t + dt,
                              report={"max_vort_ratio": float(np.max(np.abs(state.vort_ratio))),
                                      "max_field_ratio": float(np.max(np.abs(state.field_ratio)))})
        accum = dict(state.accum)
        accum["dissipation"] = accum.get("dissipation", 0.0) + float(quad[0])
        accum["vort_ratio_dz"] = accum.get("vort_ratio_dz", 0.0) + float(quad[1])
        return State(state.grid, state.t + dt, w1, m1, state.step + 1, accum)


# -- public functional API ---------------------------------------------------

_SOLVERS = {}


def _solver_for(grid):
    key = grid
    if key not in _SOLVERS:
        _SOLVERS[key] = AxisymmetricSolver(grid)
    return _SOLVERS[key]


def solve_stream(omega_theta):
    """Stream function of an odd azimuthal vorticity (Dirichlet at ``r = R``)."""
    if omega_theta.parity is not Parity.ODD:
        raise ValueError("azimuthal vorticity must be odd")
    s = _solver_for(omega_theta.grid)
    return omega_theta.with_values(s.solve_stream_values(omega_theta.values), Parity.ODD)


def recover_velocity(stream):
    """``u_r = -d_z stream``, ``u_z = D_r stream + stream / r``.

    ``D_r`` is the same radial stencil used by the divergence, so the
    discrete divergence vanishes up to rounding.
    """
    if stream.parity is not Parity.ODD:
        raise ValueError("stream function must be odd")
    s = _solver_for(stream.grid)
    ur, uz = s.velocity_values(stream.values)
    return VelocityRZ(stream.with_values(ur, Parity.ODD), stream.with_values(uz, Parity.EVEN))


def elliptic_residual(stream, omega_theta):
    """Relative L2 residual of the discrete elliptic problem."""
    s = _solver_for(stream.grid)
    res = s.apply_elliptic(stream.values) - omega_theta.values
    w = stream.grid.weights
    den = np.sqrt(np.sum(omega_theta.values**2 * w))
    num = np.sqrt(np.sum(res**2 * w))
    return float(num / den) if den > 0 else float(num)


def periodic_distance(z, center, Lz):
    return (z - center + 0.5 * Lz) % Lz - 0.5 * Lz


RANDOM_WIDTH = 0.6


def initial_condition(preset, grid, params=None):
    """Build a :class:`State` from a named preset.

    Presets
    -------
    gaussian-ring
        Vorticity ratio: a Gaussian ring of radius ``ring_radius``, mirrored
        across the axis so it is exactly even; field ratio: a Gaussian ball
        at the origin, or a mirrored ring when ``field_radius > 0``;
        ``field_power > 1`` flattens its top to ``exp(-(d^2/width^2)^power)``.
    orszag-tang-axisym
        Low ``z``-harmonics under a Gaussian radial envelope.
    random-bandlimited
        Seeded random ``z``-harmonics (``|k_z| <= 16``, the block ``j <= 4``
        range) with random even polynomial radial envelopes.

    Raises
    ------
    ValueError
        For unknown presets or data that do not decay near ``r = R``.
    """
    p = SolverConfig() if params is None else params
    r, z = grid.mesh
    if preset == "gaussian-ring":
        zt = periodic_distance(z, 0.0, grid.Lz)
        d2 = p.ring_width**2
        w = p.ring_amp * (np.exp(-((r - p.ring_radius) ** 2 + zt**2) / d2)
                          + np.exp(-((r + p.ring_radius) ** 2 + zt**2) / d2))
        b2 = p.field_width**2
        q = p.field_power
        m = p.field_amp * np.exp(-(((r - p.field_radius) ** 2 + zt**2) / b2) ** q)
        if p.field_radius > 0:
            m = m + p.field_amp * np.exp(-(((r + p.field_radius) ** 2 + zt**2) / b2) ** q)
    elif preset == "orszag-tang-axisym":
        env = np.exp(-(r / 0.8) ** 2)
        w = p.ring_amp * env * (np.sin(z) + 0.5 * np.cos(2 * z))
        m = p.field_amp * env * (np.cos(z) + 0.5 * np.sin(2 * z))
    elif preset == "random-bandlimited":
        rng = np.random.default_rng(p.seed)
        kmax = min(16, grid.Nz // 4)
        w = np.zeros(grid.shape)
        m = np.zeros(grid.shape)
        env = np.exp(-(r / RANDOM_WIDTH) ** 2)
        for arr, amp in ((w, p.ring_amp), (m, p.field_amp)):
            for k in range(0, kmax + 1):
                a, b, c0, c1 = rng.standard_normal(4) / (1.0 + k) ** 2
                radial = env * (c0 + c1 * (r / RANDOM_WIDTH) ** 2)
                arr += amp * radial * (a * np.cos(k * 2 * np.pi * z / grid.Lz)
                                       + b * np.sin(k * 2 * np.pi * z / grid.Lz))
    else:
        raise ValueError(f"unknown preset {preset!r}")
    for name, arr in (("vorticity ratio", w), ("field ratio", m)):
        frac = outer_fraction(arr, grid)
        if frac > 1e-8:
            raise ValueError(f"{name} does not decay near r = R (outer/peak = {frac:.2e})")
    return State(grid, 0.0, np.ascontiguousarray(w, dtype=float),
                 np.ascontiguousarray(m, dtype=float))


def make_solver(config, **kwargs):
    return AxisymmetricSolver(config.grid(), scheme=config.scheme, dealias=config.dealias,
                              cfl=config.cfl, **kwargs)


def run(config, hooks=(), state=None, solver=None, on_step=None):
    """Advance to ``T_end``, calling hooks at step 0, every ``cadence`` steps and at the end.

    Each hook is ``hook(state, solver) -> record or None``; non-``None``
    results are returned in order.  A :class:`BlowUpError` carries the
    records gathered before the failure.
    """
    solver = make_solver(config) if solver is None else solver
    state = initial_condition(config.preset, solver.grid, config) if state is None else state
    records = []

    def emit(s):
        for hook in hooks:
            rec = hook(s, solver)
            if rec is not None:
                records.append(rec)

    if state.step == 0:
        emit(state)
    tol = 1e-12 * max(1.0, config.T_end)
    while state.t < config.T_end - tol:
        dt = config.dt if config.dt > 0 else solver.stable_dt(state, config.dt_max)
        final = state.t + dt >= config.T_end - tol
        if final:
            dt = config.T_end - state.t
        try:
            state = solver.step(state, dt)
        except BlowUpError as exc:
            exc.records = records
            raise
        if on_step is not None:
            on_step(state)
        if final or state.step % config.cadence == 0:
            emit(state)
    return state, records


def with_overrides(config, **kwargs):
    return replace(config, **kwargs)
