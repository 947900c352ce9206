import json
import math
from dataclasses import replace

import numpy as np
import pytest

from aximhd.diagnostics import (ALL_MONITORS, DiagnosticRecord, Monitor, MonitorSettings,
                                energy_report, gamma_report, high_norm_report,
                                interpolation_ratio, radial_identity_terms, record_columns,
                                transport_maximum_report, vorticity_sqrtL_report)
from aximhd.grid import Field3D, box_axes, build_grid
from aximhd.solver import AxisymmetricSolver, SolverConfig, State, make_solver, run

from conftest import observed_orders

RING = SolverConfig(Nr=128, Nz=128, T_end=1.0, cadence=8)


@pytest.fixture(scope="module")
def ring_records():
    return run(RING, hooks=(Monitor(),))[1]


def _zero_state(n=16):
    g = build_grid(n, n, 2.0, 2 * math.pi)
    return State(g, 0.0, np.zeros(g.shape), np.zeros(g.shape))


class TestColumns:
    def test_unique_and_ordered(self):
        cols = record_columns()
        assert len(cols) == len(set(cols))
        assert cols[:2] == ["t", "step"]

    def test_row_fills_missing_with_nan(self):
        rec = DiagnosticRecord({"t": 1.0})
        row = rec.row(["t", "step"])
        assert row[0] == 1.0 and math.isnan(row[1])
        assert rec.t == 1.0


class TestZeroState:
    def test_all_zero_or_inactive(self):
        s = _zero_state()
        mon = Monitor(MonitorSettings(enabled=ALL_MONITORS, box_size=16, box_every=1))
        rec = mon(s, AxisymmetricSolver(s.grid))
        assert rec["energy_residual"] == 0.0 and energy_report([rec]) == 0.0
        for key in ("kinetic_energy", "vorticity_sqrtl", "dzu_weighted", "bkm_integral",
                    "radial_identity_residual", "hs_vorticity", "field_ratio_bound_ratio"):
            assert rec[key] == 0.0
        assert math.isnan(gamma_report([rec])[0][0])

    def test_reports_on_zero_fields(self):
        s = _zero_state()
        assert vorticity_sqrtL_report(s.vorticity, s.grid.weights) == (0.0, 0.0)
        assert interpolation_ratio(s.vort_ratio, s.vort_ratio, s.grid) == 0.0
        assert high_norm_report(s, 16, 4.0) == {"vorticity": 0.0, "azimuthal": 0.0,
                                                "field_ratio": 0.0}


class TestEnergy:
    @staticmethod
    def _diffusion_residual(dt):
        g = build_grid(32, 32, 4.0, 2 * math.pi)
        r, z = g.mesh
        solver = AxisymmetricSolver(g, advection=False, source=False)
        s = State(g, 0.0, np.exp(-r**2) * np.cos(2 * z), np.zeros(g.shape))
        mon = Monitor()
        mon(s, solver)
        for _ in range(int(round(1.0 / dt))):
            s = solver.step(s, dt)
        return mon(s, solver)["energy_residual_rel"]

    def test_pure_diffusion_eigenmode(self):
        # Diffusion is exact, so the residual is the quadrature error of the
        # dissipation integral; it is third order and Richardson removes it.
        coarse, fine = self._diffusion_residual(0.005), self._diffusion_residual(0.0025)
        assert observed_orders([2, 1], [coarse, fine])[0] == pytest.approx(3.0, abs=0.1)
        assert abs((8 * fine - coarse) / 7) <= 1e-10

    def test_full_run_residual(self, ring_records):
        assert max(abs(r["energy_residual_rel"]) for r in ring_records) <= 1e-4

    def test_inviscid_nonmagnetic_energy_converges(self):
        drifts = []
        for n in (32, 64):
            cfg = SolverConfig(Nr=n, Nz=n, T_end=0.5, cadence=1000, field_amp=0.0)
            solver = make_solver(cfg, diffusion=False)
            recs = run(cfg, hooks=(Monitor(),), solver=solver)[1]
            drifts.append(abs(recs[-1]["kinetic_energy"] / recs[0]["kinetic_energy"] - 1))
        assert drifts[1] < drifts[0]


class TestTransport:
    def test_frozen_zero_velocity(self):
        cfg = replace(RING, Nr=64, Nz=64, T_end=0.5)
        g = cfg.grid()
        zero = (np.zeros(g.shape), np.zeros(g.shape))
        solver = make_solver(cfg, frozen_velocity=zero)
        recs = run(cfg, hooks=(Monitor(),), solver=solver)[1]
        for key in ("field_ratio_lp_2", "field_ratio_lp_16", "field_ratio_lp_inf"):
            vals = np.array([r[key] for r in recs])
            assert np.max(np.abs(vals - vals[0])) <= 1e-12 * vals[0]

    def test_upwind_maximum_principle(self):
        cfg = replace(RING, Nr=64, Nz=64, scheme="upwind3", field_power=2.0)
        recs = run(cfg, hooks=(Monitor(),))[1]
        assert max(a for a, _ in transport_maximum_report(recs)) <= 1 + 1e-12

    def test_gronwall_ratio_bounded(self, ring_records):
        assert max(b for _, b in transport_maximum_report(ring_records)) <= 1 + 1e-2


class TestVorticityRatio:
    def test_navier_stokes_l2_ratio(self):
        cfg = replace(RING, Nr=64, Nz=64, field_amp=0.0)
        recs = run(cfg, hooks=(Monitor(),))[1]
        l2 = np.array([r["vort_ratio_l2"] for r in recs])
        assert np.all(np.diff(l2) <= 1e-12 * l2[0])
        assert max(r["vort_ratio_l2_ratio"] for r in recs) <= 1 + 1e-4

    def test_ratios_bounded(self, ring_records):
        for lr, l2 in gamma_report(ring_records):
            assert 0 < lr <= 10 and 0 < l2 <= 10


class TestSqrtL:
    def test_concentrated_field_peaks_at_small_p(self):
        g = build_grid(64, 64, 2.0, 2.0)
        r, z = g.mesh
        vals = np.where(r**2 + z**2 <= 0.3**2, 1.0, 0.0)
        volume = float(np.sum(vals * g.weights))
        # volume^(1/p) / sqrt(p) peaks at p = -2 ln volume
        brute = max(volume ** (1 / p) / math.sqrt(p) for p in (2, 4, 8, 16, 32, 64, 128, 256))
        value, _ = vorticity_sqrtL_report(vals, g.weights)
        assert value == pytest.approx(brute, rel=1e-12)
        rec = Monitor()(State(g, 0.0, vals / g.r[:, None], np.zeros(g.shape)),
                        AxisymmetricSolver(g))
        assert rec["vorticity_sqrtl_argmax_p"] <= 8

    def test_run_growth_recorded(self, ring_records):
        s = np.array([r["vorticity_sqrtl"] for r in ring_records])
        assert np.all(np.isfinite(s)) and np.max(s) <= 2 * s[0]


class TestVertical:
    @pytest.mark.parametrize("k", [1, 2, 4, 8])
    def test_single_mode_interpolation_equality(self, k):
        g = build_grid(32, 64, 4.0, 2 * math.pi)
        r, z = g.mesh
        ur = r * np.exp(-r**2) * np.cos(k * z)
        uz = (1 - r**2) * np.exp(-r**2) * np.cos(k * z)
        assert interpolation_ratio(ur, uz, g) == pytest.approx(1.0, abs=1e-12)

    def test_zero_velocity(self):
        s = _zero_state()
        rec = Monitor()(s, AxisymmetricSolver(s.grid))
        assert rec["dzu_weighted"] == 0.0 and rec["uq_sum"] == 0.0

    def test_running_integrals_nondecreasing(self, ring_records):
        for key in ("dzu_weighted", "uq_sum", "bkm_integral", "radial_rate_integral",
                    "radial_rate_sq_integral", "dissipation_integral", "vort_ratio_dz_integral"):
            vals = np.array([r[key] for r in ring_records])
            assert np.all(np.diff(vals) >= 0), key


class TestGradient:
    def test_radial_rate_bound(self, ring_records):
        assert max(r["radial_rate_ratio"] for r in ring_records) <= 1 + 1e-2

    def test_solver_invariants(self, ring_records):
        assert max(r["divergence_residual"] for r in ring_records) <= 1e-10
        assert max(r["elliptic_residual"] for r in ring_records) <= 1e-10


class TestRadialIdentity:
    def test_identity_on_analytic_box(self):
        a = 1.5
        Lz = 2 * math.pi
        x, y, z = box_axes(128, 32.0, 32, Lz)
        X, Y, Z = x[:, None, None], y[None, :, None], z[None, None, :]
        r2 = X**2 + Y**2
        E = np.exp(-a * r2)
        vort_ratio = (4 + 8 * a - 4 * a**2 * r2) * E * np.cos(2 * Z)
        radial_rate = 2 * E * np.sin(2 * Z)
        rhs = radial_identity_terms(Field3D(vort_ratio, 32.0, Lz))
        assert np.max(np.abs(rhs - radial_rate)) <= 1e-8

    def test_box_flag_on_undecayed_state(self):
        g = build_grid(16, 16, 2.0, 2 * math.pi)
        s = State(g, 0.0, np.ones(g.shape), np.zeros(g.shape))
        mon = Monitor(MonitorSettings(enabled=ALL_MONITORS, box_size=16, box_every=1))
        rec = mon(s, AxisymmetricSolver(g))
        assert rec["box_flag"] == 1.0 and math.isnan(rec["radial_identity_residual"])


class TestPersistence:
    def test_resume_matches_uninterrupted(self):
        cfg = replace(RING, Nr=32, Nz=32, T_end=0.6, cadence=2)
        settings = MonitorSettings(enabled=ALL_MONITORS, box_size=16, box_every=2)
        full = run(cfg, hooks=(Monitor(settings),))[1]

        first = Monitor(settings)
        saved = {}

        def hook(s, slv):
            rec = first(s, slv)
            if s.step == 4:
                saved["state"] = s.copy()
                saved["monitor"] = json.loads(json.dumps(first.state_dict()))
            return rec

        run(cfg, hooks=(hook,))
        second = Monitor(settings)
        second.load_state_dict(saved["monitor"])
        tail = run(cfg, hooks=(second,), state=saved["state"])[1]
        resumed = [r for r in full if r["step"] <= 4] + tail
        assert len(resumed) == len(full)
        cols = record_columns()
        for a, b in zip(full, resumed):
            ra, rb = np.array(a.row(cols), float), np.array(b.row(cols), float)
            assert np.array_equal(ra, rb, equal_nan=True)
