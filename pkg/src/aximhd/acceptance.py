"""Acceptance criteria as callable checks shared by the test suite and the CLI.

Each ``criterion_N`` function returns a :class:`CriterionResult` carrying the
measured values and whether the stated tolerance is met.  Expensive solver
runs are cached per process so criteria that share a run do not repeat it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .diagnostics import (CHEAP_MONITORS, Monitor, MonitorSettings, interpolation_ratio,
                          radial_identity_residual)
from .grid import build_grid, dr_central, dz_spectral
from .littlewood_paley import (all_blocks, bernstein_check, besov_norm, bony_decompose, j_max_for,
                               random_band_limited, random_solenoidal)
from .losing import (PassiveConfig, StructuralViolation, baseline_scalar, commutator_bound_report,
                     evolve_passive, losing_bound_report, shear_velocity, sigma_schedule,
                     trajectory_blocks, zero_velocity)
from .manufactured import Manufactured, mms_run
from .norms import weighted_lp
from .solver import AxisymmetricSolver, BlowUpError, SolverConfig, run, solve_stream
from .grid import Parity, ScalarFieldRZ

REFINEMENT = (64, 128, 256)
REFERENCE_N = 128
ORDER_FLOOR = 1.7
DRIFT = 0.2


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    measured: dict = field(default_factory=dict)
    note: str = ""

    def line(self):
        vals = ", ".join(f"{k}={_short(v)}" for k, v in self.measured.items())
        status = "PASS" if self.passed else "FAIL"
        tail = f" ({self.note})" if self.note else ""
        return f"criterion {self.number:2d} {status} {self.title}: {vals}{tail}"


def _short(v):
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_short(x) for x in v) + "]"
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def orders(errors):
    """Observed orders ``log2(e_k / e_{k+1})`` for successive halvings."""
    return [math.log2(a / b) for a, b in zip(errors, errors[1:])]


def drifts(values):
    """Relative changes ``|v_{k+1} / v_k - 1|`` across successive refinements."""
    return [abs(b / a - 1.0) for a, b in zip(values, values[1:])]


# -- shared runs --------------------------------------------------------------

@dataclass
class RunSummary:
    config: SolverConfig
    records: list
    blew_up: bool

    def series(self, key):
        return np.array([r[key] for r in self.records])


@lru_cache(maxsize=None)
def reference_run(N, scheme="central2", field_power=1.0, monitors=CHEAP_MONITORS, T_end=5.0):
    """Reference configuration at ``Nr = Nz = N`` with the cheap monitors."""
    cfg = SolverConfig(Nr=N, Nz=N, scheme=scheme, field_power=field_power, T_end=T_end,
                       cadence=max(1, N // 32))
    mon = Monitor(MonitorSettings(enabled=monitors))
    try:
        _, records = run(cfg, hooks=(mon,))
        return RunSummary(cfg, records, False)
    except BlowUpError as exc:
        return RunSummary(cfg, exc.records or [], True)


# -- criteria -------------------------------------------------------------------

def criterion_1():
    runs = [reference_run(N) for N in REFINEMENT]
    res = [float(np.max(np.abs(r.series("energy_residual_rel")))) for r in runs]
    ref = res[REFINEMENT.index(REFERENCE_N)]
    ords = orders(res)
    ok = ref <= 1e-4 and all(o >= ORDER_FLOOR for o in ords)
    return CriterionResult(1, "energy identity", ok,
                           {"residual": res, "reference": ref, "orders": ords})


def criterion_2():
    up = reference_run(REFERENCE_N, "upwind3", 2.0, ("transport",))
    worst = float(np.max(up.series("field_ratio_bound_ratio")))
    over = []
    for N in REFINEMENT:
        r = reference_run(N, "central2", 2.0, ("transport",))
        over.append(max(0.0, float(np.max(r.series("field_ratio_bound_ratio"))) - 1.0))
    ords = orders(over) if all(o > 0 for o in over) else [math.inf]
    ok = worst <= 1 + 1e-12 and all(o >= 1.5 for o in ords)
    return CriterionResult(2, "maximum principle", ok,
                           {"upwind_max_ratio": worst, "central_overshoot": over, "orders": ords},
                           "flat-topped field ratio (power 2)")


def criterion_3():
    runs = [reference_run(N) for N in REFINEMENT]
    ks = [float(np.max(r.series("lorentz_ratio"))) for r in runs]
    final = [float(r.records[-1]["lorentz_ratio"]) for r in runs]
    d, df = drifts(ks), drifts(final)
    ok = all(np.isfinite(ks)) and all(x <= DRIFT for x in d + df)
    return CriterionResult(3, "Lorentz bound", ok,
                           {"constant": ks, "drift": d, "final_ratio": final, "final_drift": df},
                           "the supremum is attained at t = 0; the final ratio is also compared")


def criterion_4():
    slopes, growth = [], []
    for N in REFINEMENT:
        r = reference_run(N)
        slopes.append(float(np.max(np.abs(r.series("vorticity_sqrtp_slope")))))
        s = r.series("vorticity_sqrtl")
        growth.append(float(np.max(s) / s[0]))
    d = drifts(slopes)
    ok = all(x <= DRIFT for x in d) and max(growth) <= 5.0
    return CriterionResult(4, "sqrtL vorticity", ok,
                           {"max_abs_slope": slopes, "drift": d, "sqrtl_growth": growth})


def single_mode_interpolation(N=64, modes=(1, 2, 4, 8)):
    g = build_grid(N, N, 4.0, 2 * math.pi)
    r = g.r[:, None]
    worst = 0.0
    for k in modes:
        ur = np.exp(-r**2) * r * np.sin(k * g.z)
        uz = (1 - r**2) * np.exp(-r**2) * np.cos(k * g.z)
        worst = max(worst, abs(interpolation_ratio(ur, uz, g) - 1.0))
    return worst


def criterion_5():
    dzu = [float(reference_run(N).records[-1]["dzu_weighted"]) for N in REFINEMENT]
    uq = [float(reference_run(N).records[-1]["uq_sum"]) for N in REFINEMENT]
    dev = single_mode_interpolation()
    d1, d2 = drifts(dzu), drifts(uq)
    ok = (all(np.isfinite(dzu + uq)) and all(x <= DRIFT for x in d1 + d2) and dev <= 1e-6)
    return CriterionResult(5, "vertical smoothing", ok,
                           {"dzu_weighted": dzu, "uq_sum": uq, "drift_dzu": d1, "drift_uq": d2,
                            "interp_deviation": dev})


def criterion_6():
    runs = [reference_run(N) for N in REFINEMENT]
    bkm = [float(r.records[-1]["bkm_integral"]) for r in runs]
    d = drifts(bkm)
    blown = any(r.blew_up for r in runs)
    ok = not blown and all(np.isfinite(bkm)) and all(x <= DRIFT for x in d)
    return CriterionResult(6, "BKM integral", ok, {"bkm": bkm, "drift": d, "blow_up": blown})


def radial_identity_study(sizes=(64, 128), R=8.0):
    """Residual of the identity for a manufactured state, solver velocity, box ``2R``."""
    sol = Manufactured()
    out = []
    for N in sizes:
        g = build_grid(N, N, R, 2 * math.pi)
        solver = AxisymmetricSolver(g)
        vr = np.ascontiguousarray(sol.vort_ratio(g, 0.0))
        d = solver.derive_values(vr)
        out.append(radial_identity_residual(vr, d.ur, g, N, 2 * R))
    return out


def criterion_7():
    res = radial_identity_study()
    o = orders(res)
    ok = res[-1] <= 1e-2 and all(x >= 1.0 for x in o)
    return CriterionResult(7, "radial-rate identity", ok, {"residual": res, "orders": o})


def criterion_8():
    ks = [float(np.max(reference_run(N).series("cz_ratio"))) for N in REFINEMENT]
    d = drifts(ks)
    ok = all(np.isfinite(ks)) and all(x <= DRIFT for x in d)
    return CriterionResult(8, "Calderon-Zygmund growth", ok, {"constant": ks, "drift": d})


def lp_selftest(seed=0, sizes=(64, 128)):
    """Partition residuals, single-mode Bernstein ranges and Bony residuals per box size."""
    out = {}
    L = 2 * math.pi
    for N in sizes:
        F = random_band_limited(N, L, L, N // 8, seed)
        G = random_band_limited(N, L, L, N // 8, seed + 1)
        blocks = all_blocks(F)
        part = float(np.linalg.norm(sum(b.values for b in blocks) - F.values)
                     / np.linalg.norm(F.values))
        parts = bony_decompose(F, G)
        bony = float(np.linalg.norm(parts.total().values - F.values * G.values)
                     / np.linalg.norm(F.values * G.values))
        ratios = []
        x, _, _ = _axes(N, L)
        for j in range(1, j_max_for(N)):
            n = int(1.5 * 2**j)
            mode = F.like(np.cos(n * x)[:, None, None] * np.ones((1, N, N)))
            for alpha in (0.5, 1.0):
                ratios.append(bernstein_check(mode, j, alpha, 2.0, 2.0).two_sided)
            ratios.append(bernstein_check(mode, j, 0.0, 2.0, 2.0).upper)
        out[N] = {"partition": part, "bony": bony, "bernstein": (min(ratios), max(ratios))}
    return out


def _axes(N, L):
    from .grid import box_axes
    return box_axes(N, L, N, L)


def criterion_9():
    st = lp_selftest()
    sizes = sorted(st)
    part = max(st[N]["partition"] for N in sizes)
    bony = max(st[N]["bony"] for N in sizes)
    lo = [st[N]["bernstein"][0] for N in sizes]
    hi = [st[N]["bernstein"][1] for N in sizes]
    stable = all(x <= DRIFT for x in drifts(lo) + drifts(hi))
    ok = part <= 1e-8 and bony <= 1e-8 and stable
    return CriterionResult(9, "Littlewood-Paley self-test", ok,
                           {"partition": part, "bony": bony, "bernstein_c": lo, "bernstein_C": hi})


def commutator_study(pairs=20, sizes=(32, 64), max_mode=3, seed=0):
    """Max ratios of both bounds per seeded pair on a common block range."""
    q_range = range(0, j_max_for(min(sizes)) - 1)
    L = 2 * math.pi
    table = {N: [] for N in sizes}
    violations = 0
    for k in range(pairs):
        for N in sizes:
            velocity = random_solenoidal(N, L, max_mode, [seed, 1, k])
            scalar = random_band_limited(N, L, L, max_mode, [seed, 2, k])
            try:
                t = commutator_bound_report(velocity, scalar, 0.5, 2.0, q_range)
                table[N].append((t.max_l2, t.max_lp))
            except StructuralViolation:
                violations += 1
                table[N].append((math.inf, math.inf))
    return table, violations


def product_study(seed=0, N=64, pairs=20, indices=(0.25, 0.5)):
    """Largest ``||FG||_B / (||F||_inf ||G||_B + ||G||_inf ||F||_B)`` per ``s``, at ``p = 2``."""
    L = 2 * math.pi
    worst = {s: 0.0 for s in indices}
    for k in range(pairs):
        F = random_band_limited(N, L, L, N // 8, [seed, 3, k])
        G = random_band_limited(N, L, L, N // 8, [seed, 4, k])
        FG = F.like(F.values * G.values)
        f_inf, g_inf = np.max(np.abs(F.values)), np.max(np.abs(G.values))
        for s in indices:
            den = f_inf * besov_norm(G, s, 2.0) + g_inf * besov_norm(F, s, 2.0)
            worst[s] = max(worst[s], besov_norm(FG, s, 2.0) / den)
    return worst


def criterion_10():
    table, violations = commutator_study()
    a, b = sorted(table)
    d1 = [abs(y[0] / x[0] - 1) for x, y in zip(table[a], table[b])]
    d2 = [abs(y[1] / x[1] - 1) for x, y in zip(table[a], table[b])]
    worst = [max(v[0] for v in table[b]), max(v[1] for v in table[b])]
    ok = violations == 0 and all(np.isfinite(worst)) and max(d1 + d2) <= DRIFT
    return CriterionResult(10, "commutator estimates", ok,
                           {"max_ratio_l2": worst[0], "max_ratio_lp": worst[1],
                            "drift": max(d1 + d2), "violations": violations})


def losing_study(sizes=(64, 128), eps_list=(0.1, 0.2, 0.4), sigma=0.5, p=2.0, T=2.0,
                 amplitude=3.0, scenario="shear"):
    """Sup ratios per ``(size, eps)``, the worst ``|sigma_T - (sigma - eps)|`` and ``U(T)``."""
    sups, growth, end_err = {}, {}, 0.0
    for N in sizes:
        g = build_grid(N, N, 4.0, 2 * math.pi)
        rho0 = baseline_scalar(g)
        if scenario == "shear":
            vel = shear_velocity(g, amplitude)
            dt = 0.4 * g.dz / amplitude
        else:
            vel = zero_velocity(g)
            dt = 0.05
        n = int(math.ceil(T / dt))
        traj = evolve_passive(PassiveConfig(g, rho0, vel), T / n, T, cadence=max(1, n // 10))
        blocks = trajectory_blocks(traj, p, N)
        for eps in eps_list:
            sch = sigma_schedule(traj.times, traj.rate, sigma, eps)
            end_err = max(end_err, abs(sch.sigma_end - (sigma - eps)))
            rep = losing_bound_report(traj, sch, p, N, blocks=blocks)
            sups[(N, eps)] = rep.sup_ratio
            growth[N] = rep.growth_factor
    return sups, end_err, growth


def criterion_11():
    base, base_err, _ = losing_study(sizes=(64,), scenario="baseline")
    sups, err, growth = losing_study()
    worst_base = max(base.values())
    sizes = sorted({N for N, _ in sups})
    eps_list = sorted({e for _, e in sups})
    d = [abs(sups[(sizes[1], e)] / sups[(sizes[0], e)] - 1) for e in eps_list]
    ok = (worst_base <= 1 + 1e-8 and max(err, base_err) <= 1e-12
          and all(np.isfinite(list(sups.values()))) and max(d) <= DRIFT)
    return CriterionResult(11, "losing estimate", ok,
                           {"baseline_sup": worst_base,
                            "shear_sup": [sups[(sizes[-1], e)] for e in eps_list],
                            "drift": max(d), "sigma_end_error": max(err, base_err),
                            "U_T": growth[sizes[-1]]})


def stream_study(sizes=(32, 64, 128, 256)):
    """Relative errors of the stream solve for the manufactured stream function."""
    sol = Manufactured()
    errs = []
    for N in sizes:
        g = build_grid(N, N, 4.0, 2 * math.pi)
        vort = g.r[:, None] * sol.vort_ratio(g, 0.0)
        psi = solve_stream(ScalarFieldRZ(g, vort, Parity.ODD)).values
        exact = sol.stream(g, 0.0)
        errs.append(float(np.sqrt(np.sum((psi - exact) ** 2 * g.weights)
                                  / np.sum(exact**2 * g.weights))))
    return errs


def divergence_history(N=64, T_end=1.0):
    cfg = SolverConfig(Nr=N, Nz=N, T_end=T_end)
    g = cfg.grid()
    worst = [0.0]

    def on_step(state):
        solver = AxisymmetricSolver(g) if not hasattr(on_step, "solver") else on_step.solver
        on_step.solver = solver
        d = solver.derive(state)
        div = dr_central(d.ur, g, -1.0) + d.ur / g.r[:, None] + dz_spectral(d.uz, g)
        un = weighted_lp(np.hypot(d.ur, d.uz), g.weights, 2)
        worst[0] = max(worst[0], weighted_lp(div, g.weights, 2) / un)

    run(cfg, on_step=on_step)
    return worst[0]


def determinism(N=64, T_end=1.0):
    cfg = SolverConfig(Nr=N, Nz=N, T_end=T_end)
    outs = []
    for _ in range(2):
        mon = Monitor()
        st, recs = run(cfg, hooks=(mon,))
        outs.append((st.vort_ratio.tobytes(), st.field_ratio.tobytes(),
                     [r.row(mon.columns) for r in recs]))
    a, b = outs
    rows_equal = all(np.array_equal(x, y, equal_nan=True) for x, y in zip(a[2], b[2]))
    return a[0] == b[0] and a[1] == b[1] and len(a[2]) == len(b[2]) and rows_equal


def criterion_12():
    sol = Manufactured()
    stream = stream_study()
    space = []
    for N in (32, 64, 128):
        g = build_grid(N, N, 4.0, 2 * math.pi)
        space.append(max(mms_run(g, sol, 0.002, 0.5)))
    g = build_grid(32, 32, 4.0, 2 * math.pi)
    time_err = [max(mms_run(g, sol, dt, 1.0, "discrete")) for dt in (0.04, 0.02, 0.01)]
    o_stream, o_space, o_time = orders(stream), orders(space), orders(time_err)
    div = divergence_history()
    det = determinism()
    ok = (min(o_stream) >= 1.9 and min(o_space) >= 1.9 and min(o_time) >= 2.5
          and div <= 1e-10 and det)
    return CriterionResult(12, "solver verification", ok,
                           {"stream_orders": o_stream, "space_orders": o_space,
                            "time_orders": o_time, "max_divergence": div, "deterministic": det})


CRITERIA = {n: globals()[f"criterion_{n}"] for n in range(1, 13)}


def run_all(numbers=None, echo=print):
    results = []
    for n in numbers or sorted(CRITERIA):
        res = CRITERIA[n]()
        if echo is not None:
            echo(res.line())
        results.append(res)
    return results


__all__ = ["CriterionResult", "CRITERIA", "run_all", "reference_run", "orders", "drifts",
           "lp_selftest", "commutator_study", "losing_study", "radial_identity_study",
           "stream_study", "single_mode_interpolation", "product_study"]
