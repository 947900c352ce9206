"""Command-line entry point: ``run``, ``verify``, ``losing`` and ``lp-selftest``."""

from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys

import numpy as np

from .checkpoint import (CheckpointError, emit_records, read_checkpoint, read_records,
                         write_checkpoint)
from .config import ConfigError, LosingScenario, load_config
from .diagnostics import DiagnosticRecord, Monitor, MonitorSettings
from .solver import BlowUpError, make_solver, run

log = logging.getLogger("aximhd")

DIAGNOSTICS_FILE = "diagnostics.csv"
FINAL_CHECKPOINT = "final.axmh"


def _monitor(cfg):
    return Monitor(MonitorSettings(enabled=cfg.monitors, box_size=cfg.box_size,
                                   box_length=cfg.box_length, box_every=cfg.box_every))


def _checkpoint_name(step):
    return f"checkpoint_{step:08d}.axmh"


def simulate(cfg, resume=None):
    """Run the configured simulation, writing diagnostics and checkpoints.

    Checkpoints are written right after the monitor has sampled the step,
    so the saved monitor state is consistent with the saved fields.
    Returns ``(state, records, monitor)``.  On resume, rows already written
    for steps up to the checkpoint are kept so the final file matches an
    uninterrupted run.
    """
    os.makedirs(cfg.output, exist_ok=True)
    solver = make_solver(cfg.solver)
    monitor = _monitor(cfg)
    state = None
    records = []
    if resume is not None:
        state, _, _, extra = read_checkpoint(resume, digest=cfg.digest)
        monitor.load_state_dict(extra["monitor"])
        path = os.path.join(cfg.output, DIAGNOSTICS_FILE)
        if os.path.exists(path):
            _, rows = read_records(path)
            records = [DiagnosticRecord(r) for r in rows if r["step"] <= state.step]

    def hook(s, slv):
        rec = monitor(s, slv)
        every = cfg.checkpoint_cadence
        if every and s.step > 0 and s.step % every == 0:
            write_checkpoint(s, os.path.join(cfg.output, _checkpoint_name(s.step)),
                             cfg.solver.seed, cfg.digest, {"monitor": monitor.state_dict()})
        return rec

    try:
        state, new = run(cfg.solver, hooks=(hook,), state=state, solver=solver)
    except BlowUpError as exc:
        records.extend(exc.records or [])
        emit_records(records, os.path.join(cfg.output, DIAGNOSTICS_FILE), monitor.columns)
        raise
    records.extend(new)
    emit_records(records, os.path.join(cfg.output, DIAGNOSTICS_FILE), monitor.columns)
    write_checkpoint(state, os.path.join(cfg.output, FINAL_CHECKPOINT), cfg.solver.seed,
                     cfg.digest, {"monitor": monitor.state_dict()})
    return state, records, monitor


def cmd_run(args):
    cfg = load_config(args.config)
    state, records, _ = simulate(cfg, args.resume)
    print(f"t = {state.t:.6g} after {state.step} steps; {len(records)} records written to "
          f"{os.path.join(cfg.output, DIAGNOSTICS_FILE)}")
    return 0


def invariant_checks(cfg, records):
    """Single-run invariants as ``(name, passed, measured)`` triples."""
    out = []

    def col(key):
        return np.array([r[key] for r in records], dtype=float)

    energy = np.nanmax(np.abs(col("energy_residual_rel"))) if "energy" in cfg.monitors else 0.0
    out.append(("energy residual <= 1e-4", bool(energy <= 1e-4), energy))
    div = float(np.max(col("divergence_residual")))
    out.append(("divergence residual <= 1e-10", bool(div <= 1e-10), div))
    ell = float(np.max(col("elliptic_residual")))
    out.append(("elliptic residual <= 1e-10", bool(ell <= 1e-10), ell))
    if "transport" in cfg.monitors:
        worst = float(np.max(col("field_ratio_bound_ratio")))
        if cfg.solver.scheme == "upwind3":
            out.append(("field ratio maximum principle", bool(worst <= 1 + 1e-12), worst))
        else:
            out.append(("field ratio overshoot (recorded)", True, max(0.0, worst - 1)))
    if "sqrtl" in cfg.monitors:
        s = col("vorticity_sqrtl")
        growth = float(np.max(s) / s[0]) if s[0] > 0 else 1.0
        out.append(("sqrtL vorticity growth <= 5", bool(growth <= 5.0), growth))
    finite = all(np.all(np.isfinite(col(k)) | np.isnan(col(k))) for k in records[0].values)
    out.append(("all monitors finite", bool(finite), 0.0))
    return out


def cmd_verify(args):
    cfg = load_config(args.config)
    try:
        _, records, _ = simulate(cfg)
    except BlowUpError as exc:
        print(f"FAIL run aborted: {exc}")
        return 1
    failed = 0
    for name, ok, value in invariant_checks(cfg, records):
        print(f"{'PASS' if ok else 'FAIL'} {name}: {value:.6g}")
        failed += not ok
    if args.acceptance:
        from .acceptance import run_all
        failed += sum(not r.passed for r in run_all())
    return 1 if failed else 0


def cmd_losing(args):
    from .acceptance import losing_study

    cfg = load_config(args.config)
    sc = cfg.losing or LosingScenario()
    sups, err, growth = losing_study(sizes=sc.sizes, eps_list=sc.eps, sigma=sc.sigma, p=sc.p,
                                     T=sc.T, amplitude=sc.amplitude, scenario=sc.scenario)
    os.makedirs(cfg.output, exist_ok=True)
    path = os.path.join(cfg.output, "losing.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["size", "eps", "sup_ratio", "growth_factor"])
        for (N, eps), v in sorted(sups.items()):
            w.writerow([N, repr(eps), repr(v), repr(growth[N])])
    for (N, eps), v in sorted(sups.items()):
        print(f"N = {N:4d} eps = {eps:.3g}: sup ratio {v:.6g}, U(T) = {growth[N]:.6g}")
    print(f"max |sigma_T - (sigma - eps)| = {err:.3e}")
    ok = err <= 1e-12 and all(math.isfinite(v) for v in sups.values())
    if sc.scenario == "baseline":
        ok = ok and max(sups.values()) <= 1 + 1e-8
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


def cmd_lp_selftest(args):
    from .acceptance import commutator_study, lp_selftest, product_study

    st = lp_selftest(seed=args.seed, sizes=(args.size,))[args.size]
    ok = True
    checks = [("partition of unity residual", st["partition"], 1e-8),
              ("Bony reconstruction residual", st["bony"], 1e-8)]
    for name, v, tol in checks:
        good = v <= tol
        ok &= good
        print(f"{'PASS' if good else 'FAIL'} {name}: {v:.3e}")
    c, C = st["bernstein"]
    print(f"PASS Bernstein two-sided range over blocks: [{c:.6g}, {C:.6g}]")
    sizes = (min(32, args.size), args.size) if args.size > 32 else (args.size,)
    table, violations = commutator_study(pairs=4, sizes=sizes, seed=args.seed)
    for N in sizes:
        for k, (a, b) in enumerate(table[N]):
            print(f"commutator N = {N} pair {k}: L2 ratio {a:.6g}, Lp ratio {b:.6g}")
    good = violations == 0
    ok &= good
    print(f"{'PASS' if good else 'FAIL'} commutator structural violations: {violations}")
    K = product_study(seed=args.seed, N=args.size)
    good = all(math.isfinite(v) for v in K.values())
    ok &= good
    print(f"{'PASS' if good else 'FAIL'} product estimate constants: "
          + ", ".join(f"s={s}: {v:.6g}" for s, v in K.items()))
    return 0 if ok else 1


def build_parser():
    p = argparse.ArgumentParser(prog="aximhd", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="simulate and write diagnostics")
    r.add_argument("--config", required=True)
    r.add_argument("--resume")
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("verify", help="run and check invariants")
    v.add_argument("--config", required=True)
    v.add_argument("--acceptance", action="store_true", help="also run every acceptance criterion")
    v.set_defaults(func=cmd_verify)
    lo = sub.add_parser("losing", help="losing-estimate scenario")
    lo.add_argument("--config", required=True)
    lo.set_defaults(func=cmd_losing)
    s = sub.add_parser("lp-selftest", help="Littlewood-Paley property tests")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--size", type=int, default=64)
    s.set_defaults(func=cmd_lp_selftest)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (ConfigError, CheckpointError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BlowUpError as exc:
        print(f"error: blow-up abort: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
