"""Time-series monitors for the a-priori estimates of the reduced system.

A :class:`Monitor` is a run hook: called with a state it returns a
:class:`DiagnosticRecord` whose columns are fixed by :func:`record_columns`.
Running time integrals use the trapezoid rule over the sampled times, except
the dissipation integrals, which the stepper accumulates with its own
quadrature weights.  Monitors that are disabled or not due at a sample are
written as ``nan``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import (Parity, ScalarFieldRZ, box_axes, box_radius, dr_central, dz_spectral,
                   outer_fraction, reconstruct_azimuthal, reconstruct_cartesian)
from .littlewood_paley import (DyadicPartition, box_frequencies, from_spectrum, j_max_for,
                               lambda_vertical, spectrum, vertical_block_values)
from .norms import (DEFAULT_PGRID, PGrid, growth_report, sobolev_hs_norm, weighted_lorentz,
                    weighted_lp)

ANISO_ORDERS = (0.0, 0.5, 0.75)
UQ_INDEX = 1.75
HS_INDEX = 2.6

CHEAP_MONITORS = ("energy", "transport", "lorentz", "sqrtl", "vertical", "gradient")
BOX_MONITORS = ("radial_identity", "high_norms")
ALL_MONITORS = CHEAP_MONITORS + BOX_MONITORS


def _p_label(p):
    return "inf" if np.isinf(p) else str(int(p))


def record_columns(pgrid=None):
    """Ordered column names of a :class:`DiagnosticRecord`."""
    pgrid = PGrid() if pgrid is None else pgrid
    ps = [_p_label(p) for p in pgrid] + ["inf"]
    cols = ["t", "step", "kinetic_energy", "magnetic_energy", "vertical_dissipation",
            "dissipation_integral", "energy_residual", "energy_residual_rel"]
    cols += [f"field_ratio_lp_{p}" for p in ps] + ["field_ratio_bound_ratio"]
    cols += [f"azimuthal_lp_{p}" for p in ps] + ["azimuthal_gronwall_ratio"]
    cols += ["vort_ratio_l31", "vort_ratio_l2", "vort_ratio_dz_integral", "lorentz_ratio",
             "vort_ratio_l2_ratio"]
    cols += ["vorticity_sqrtl", "vorticity_sqrtl_argmax_p", "vorticity_sqrtp_slope"]
    cols += ["dzu_weighted", "uq_sum", "interp_ratio"]
    cols += ["grad_inf", "bkm_integral", "radial_rate_inf", "radial_rate_integral",
             "radial_rate_sq_integral", "radial_rate_ratio", "cz_ratio"]
    cols += [f"aniso_l2_ratio_{a}" for a in ANISO_ORDERS]
    cols += [f"aniso_linf_ratio_{a}" for a in ANISO_ORDERS]
    cols += ["radial_identity_residual", "hs_vorticity", "hs_azimuthal", "hs_field_ratio",
             "hs_dz_vorticity_integral"]
    cols += ["support_fraction", "box_flag", "divergence_residual", "elliptic_residual"]
    return cols


@dataclass
class DiagnosticRecord:
    """One time-stamped row of monitored quantities, keyed by column name."""

    values: dict

    def __getitem__(self, key):
        return self.values[key]

    @property
    def t(self):
        return self.values["t"]

    def row(self, columns):
        return [self.values.get(c, math.nan) for c in columns]


@dataclass
class MonitorSettings:
    """Which monitors run and how often the box-based ones are sampled.

    ``box_every`` counts monitor calls: box monitors run on the first call
    and on every ``box_every``-th call after it (0 disables them).
    """

    pgrid: PGrid = field(default_factory=PGrid)
    enabled: tuple = CHEAP_MONITORS
    box_size: int = 64
    box_length: float = 0.0
    box_every: int = 0
    hs_index: float = HS_INDEX


def _mag(*arrays):
    return np.sqrt(sum(a**2 for a in arrays))


class Monitor:
    """Run hook computing a :class:`DiagnosticRecord` per call."""

    def __init__(self, settings=None):
        self.settings = MonitorSettings() if settings is None else settings
        self.columns = record_columns(self.settings.pgrid)
        self.ref = None
        self.calls = 0
        self.prev = None
        self.integrals = {}
        self.box_prev = None

    # -- persistence ----------------------------------------------------
    def state_dict(self):
        return {"ref": self.ref, "calls": self.calls, "prev": self.prev,
                "integrals": self.integrals, "box_prev": self.box_prev}

    def load_state_dict(self, d):
        self.ref = d["ref"]
        self.calls = d["calls"]
        self.prev = d["prev"]
        self.integrals = dict(d["integrals"])
        self.box_prev = d["box_prev"]

    # -- helpers --------------------------------------------------------
    def _trapezoid(self, key, t, value, prev_t, prev_values):
        if prev_values is None or key not in prev_values:
            self.integrals.setdefault(key, 0.0)
        else:
            self.integrals[key] = self.integrals.get(key, 0.0) + 0.5 * (t - prev_t) * (
                value + prev_values[key])
        return self.integrals[key]

    def _on(self, name):
        return name in self.settings.enabled

    def __call__(self, state, solver):
        rec = self.measure(state, solver)
        self.calls += 1
        return rec

    def measure(self, state, solver):
        g = state.grid
        w = g.weights
        pg = self.settings.pgrid
        ps = list(pg) + [np.inf]
        d = solver.derive(state)
        r = g.r[:, None]
        ur, uz = d.ur, d.uz
        vort = d.vorticity
        bt = state.azimuthal_field
        fr = state.field_ratio
        vr = state.vort_ratio
        t = state.t
        v = {c: math.nan for c in self.columns}
        v["t"] = t
        v["step"] = state.step
        samples = {}

        if self.ref is None:
            l2 = weighted_lp(fr, w, 2)
            linf = weighted_lp(fr, w, np.inf)
            self.ref = {
                "energy": float(np.sum((ur**2 + uz**2) * w) + np.sum(bt**2 * w)),
                "field_ratio_l2_linf": max(l2, linf),
                "azimuthal_lp": [weighted_lp(bt, w, p) for p in ps],
                "vort_ratio_l31": weighted_lorentz(vr, w, 3.0, 1.0),
                "vort_ratio_l2": weighted_lp(vr, w, 2),
                "vorticity_sqrtl": growth_report(vort, w, 0.5, pg).value,
            }
        ref = self.ref

        dur_z = dz_spectral(ur, g)
        duz_z = dz_spectral(uz, g)
        dzu = _mag(dur_z, duz_z)

        if self._on("energy"):
            ek = float(np.sum((ur**2 + uz**2) * w))
            em = float(np.sum(bt**2 * w))
            dz_ = float(np.sum(dzu**2 * w))
            diss = float(state.accum.get("dissipation", 0.0))
            res = ek + em + 2.0 * diss - ref["energy"]
            v.update(kinetic_energy=ek, magnetic_energy=em, vertical_dissipation=dz_,
                     dissipation_integral=diss, energy_residual=res,
                     energy_residual_rel=res / ref["energy"] if ref["energy"] > 0 else 0.0)

        urr = ur / r
        radial_rate = float(np.max(np.abs(urr)))
        samples["radial_rate"] = radial_rate
        samples["radial_rate_sq"] = radial_rate**2

        if self._on("transport"):
            den = ref["field_ratio_l2_linf"]
            best = 0.0
            for p in ps:
                val = weighted_lp(fr, w, p)
                v[f"field_ratio_lp_{_p_label(p)}"] = val
                best = max(best, val / den if den > 0 else 0.0)
            v["field_ratio_bound_ratio"] = best

        rr_int = self._trapezoid("radial_rate", t, radial_rate, *self._prev())
        rr_sq_int = self._trapezoid("radial_rate_sq", t, radial_rate**2, *self._prev())
        v["radial_rate_integral"] = rr_int
        v["radial_rate_sq_integral"] = rr_sq_int
        v["radial_rate_inf"] = radial_rate

        if self._on("transport"):
            growth = math.exp(rr_int)
            best = 0.0
            for p, b0 in zip(ps, ref["azimuthal_lp"]):
                val = weighted_lp(bt, w, p)
                v[f"azimuthal_lp_{_p_label(p)}"] = val
                if b0 > 0:
                    best = max(best, val / (growth * b0))
            v["azimuthal_gronwall_ratio"] = best

        l31 = weighted_lorentz(vr, w, 3.0, 1.0)
        if self._on("lorentz"):
            l2 = weighted_lp(vr, w, 2)
            dint = float(state.accum.get("vort_ratio_dz", 0.0))
            m0 = ref["field_ratio_l2_linf"]
            den = ref["vort_ratio_l31"] + math.sqrt(t) * m0**2
            v.update(vort_ratio_l31=l31, vort_ratio_l2=l2, vort_ratio_dz_integral=dint,
                     lorentz_ratio=l31 / den if den > 0 else 0.0)
            den2 = ref["vort_ratio_l2"] ** 2 + t * m0**4
            v["vort_ratio_l2_ratio"] = (l2**2 + dint) / den2 if den2 > 0 else 0.0

        if self._on("sqrtl") or self._on("gradient") or self._on("vertical"):
            vort_lp = np.array([weighted_lp(vort, w, p) for p in pg])
            gr = growth_report(vort, w, 0.5, pg)
            sqrtl = gr.value
        if self._on("sqrtl"):
            sq = np.sqrt(np.array(list(pg)))
            slope = float(np.polyfit(sq, vort_lp, 1)[0]) if np.any(vort_lp) else 0.0
            v.update(vorticity_sqrtl=sqrtl, vorticity_sqrtl_argmax_p=gr.argmax_p,
                     vorticity_sqrtp_slope=slope)

        if self._on("vertical"):
            self._vertical(v, state, ur, uz, dzu, w, pg, samples)

        if self._on("gradient"):
            durr = dr_central(ur, g, -1.0)
            duzr = dr_central(uz, g, 1.0)
            comps = (durr, dur_z, duzr, duz_z, urr)
            grad_inf = float(max(np.max(np.abs(c)) for c in comps))
            samples["grad_inf"] = grad_inf
            v["grad_inf"] = grad_inf
            v["bkm_integral"] = self._trapezoid("grad_inf", t, grad_inf, *self._prev())
            v["radial_rate_ratio"] = radial_rate / l31 if l31 > 0 else 0.0
            gmag = _mag(*comps)
            cz = 0.0
            for p, wp in zip(pg, vort_lp):
                if wp > 0:
                    cz = max(cz, weighted_lp(gmag, w, p) * (p - 1) / (p**2 * wp))
            v["cz_ratio"] = cz
            ul2 = weighted_lp(_mag(ur, uz), w, 2)
            den = ul2 + sqrtl
            for a in ANISO_ORDERS:
                lr = lambda_vertical(ur, g, a)
                lz = lambda_vertical(uz, g, a)
                lm = _mag(lr, lz)
                v[f"aniso_l2_ratio_{a}"] = weighted_lp(lm, w, 2) / den if den > 0 else 0.0
                v[f"aniso_linf_ratio_{a}"] = float(np.max(lm)) / den if den > 0 else 0.0

        frac = max(outer_fraction(vr, g), outer_fraction(fr, g))
        v["support_fraction"] = frac
        v["box_flag"] = 0.0
        due = self.settings.box_every > 0 and self.calls % self.settings.box_every == 0
        if due and (self._on("radial_identity") or self._on("high_norms")):
            self._box(v, state, solver, frac)

        div = dr_central(ur, g, -1.0) + urr + duz_z
        un = weighted_lp(_mag(ur, uz), w, 2)
        v["divergence_residual"] = weighted_lp(div, w, 2) / un if un > 0 else 0.0
        ell = solver.apply_elliptic(d.stream) - vort
        vn = weighted_lp(vort, w, 2)
        v["elliptic_residual"] = weighted_lp(ell, w, 2) / vn if vn > 0 else 0.0

        self.prev = {"t": t, "values": samples}
        return DiagnosticRecord(v)

    def _prev(self):
        if self.prev is None:
            return (None, None)
        return (self.prev["t"], self.prev["values"])

    def _vertical(self, v, state, ur, uz, dzu, w, pg, samples):
        g = state.grid
        t = state.t
        kmax = j_max_for(g.Nz)
        part = DyadicPartition.default()
        blocks = []
        for q in range(0, kmax + 1):
            br = vertical_block_values(ur, g, q, part)
            bz = vertical_block_values(uz, g, q, part)
            blocks.append((q, _mag(br, bz)))
        l34 = _mag(lambda_vertical(ur, g, 0.75), lambda_vertical(uz, g, 0.75))
        l74 = _mag(lambda_vertical(ur, g, 1.75), lambda_vertical(uz, g, 1.75))
        best_dzu = 0.0
        best_uq = 0.0
        interp = 0.0
        for p in pg:
            key = _p_label(p)
            dz_p = weighted_lp(dzu, w, p)
            val = dz_p**2 / p**0.75
            samples[f"dzu_{key}"] = val
            best_dzu = max(best_dzu, self._trapezoid(f"dzu_{key}", t, val, *self._prev()))
            s = sum(2.0 ** (q * UQ_INDEX) * weighted_lp(b, w, p) for q, b in blocks)
            val = s / p**1.5
            samples[f"uq_{key}"] = val
            best_uq = max(best_uq, self._trapezoid(f"uq_{key}", t, val, *self._prev()))
            den = weighted_lp(l34, w, p) ** 0.75 * weighted_lp(l74, w, p) ** 0.25
            if den > 0:
                interp = max(interp, dz_p / den)
        v.update(dzu_weighted=best_dzu, uq_sum=best_uq, interp_ratio=interp)

    def _box(self, v, state, solver, frac):
        g = state.grid
        if frac > 1e-8:
            v["box_flag"] = 1.0
            return
        N = self.settings.box_size
        L = self.settings.box_length or 2.0 * g.R
        d = solver.derive(state)
        if self._on("radial_identity"):
            v["radial_identity_residual"] = radial_identity_residual(state.vort_ratio, d.ur, g,
                                                                     N, L)
        if self._on("high_norms"):
            a = self.settings.hs_index - 1.0
            vort = ScalarFieldRZ(g, d.vorticity, Parity.ODD)
            bt = ScalarFieldRZ(g, state.azimuthal_field, Parity.ODD)
            comps_w = reconstruct_azimuthal(vort, N, L)
            comps_b = reconstruct_azimuthal(bt, N, L)
            hw = math.sqrt(sum(sobolev_hs_norm(c, a) ** 2 for c in comps_w[:2]))
            hb = math.sqrt(sum(sobolev_hs_norm(c, a) ** 2 for c in comps_b[:2]))
            hm = sobolev_hs_norm(reconstruct_cartesian(state.field_ratio_field, N, L), a)
            dzw = 0.0
            for c in comps_w[:2]:
                kx, kz, *_ = box_frequencies(c)
                dc = from_spectrum(spectrum(c) * (1j * kz[None, None, :]), c)
                dzw += sobolev_hs_norm(dc, a) ** 2
            t = state.t
            if self.box_prev is None:
                self.integrals["hs_dz"] = 0.0
            else:
                self.integrals["hs_dz"] = self.integrals.get("hs_dz", 0.0) + 0.5 * (
                    t - self.box_prev["t"]) * (dzw + self.box_prev["dzw"])
            self.box_prev = {"t": t, "dzw": dzw}
            v.update(hs_vorticity=hw, hs_azimuthal=hb, hs_field_ratio=hm,
                     hs_dz_vorticity_integral=self.integrals["hs_dz"])


def radial_identity_terms(vort_ratio_box):
    """Right side ``G - 2 (1/r) d_r H`` with ``G = d_z L^{-1} w`` and ``H = L^{-1} G``.

    ``L^{-1}`` is the periodic inverse Laplacian with the zero mode removed,
    and ``(1/r) d_r H`` is evaluated for an axisymmetric ``H`` as
    ``(Lap_h H - ((H_xx - H_yy)(x^2 - y^2) + 4 x y H_xy) / r^2) / 2``.
    """
    F = vort_ratio_box
    kx, kz, kh, kzz, full = box_frequencies(F)
    k2 = full**2
    inv = np.where(k2 > 0, -1.0 / np.where(k2 > 0, k2, 1.0), 0.0)
    ikz = 1j * kz[None, None, :]
    G = spectrum(F) * ikz * inv
    H = G * inv
    KX = kx[:, None, None]
    KY = kx[None, :, None]
    hxx = from_spectrum(-KX**2 * H, F).values
    hyy = from_spectrum(-KY**2 * H, F).values
    hxy = from_spectrum(-KX * KY * H, F).values
    x, y, _ = box_axes(F.N, F.Lh, F.shape[2], F.Lz)
    X = x[:, None, None]
    Y = y[None, :, None]
    rr = X**2 + Y**2
    dh = 0.5 * (hxx + hyy - ((hxx - hyy) * (X**2 - Y**2) + 4 * X * Y * hxy) / rr)
    return from_spectrum(G, F).values - 2.0 * dh


def radial_identity_residual(vort_ratio, ur, grid, N, L):
    """Relative box ``L^2`` gap between ``u_r / r`` and the multiplier expression.

    ``u_r / r`` decays only algebraically, so it is sampled without the decay
    check and the gap is measured over the cylinder ``r < R``.
    """
    w_box = reconstruct_cartesian(ScalarFieldRZ(grid, vort_ratio, Parity.EVEN), N, L)
    q_box = reconstruct_cartesian(ScalarFieldRZ(grid, ur / grid.r[:, None], Parity.EVEN), N, L,
                                  decay_tol=np.inf)
    rhs = radial_identity_terms(w_box)
    inside = np.broadcast_to((box_radius(N, L) < grid.R)[:, :, None], rhs.shape)
    q = q_box.values[inside]
    den = np.sqrt(np.sum(q**2))
    if den == 0:
        return 0.0
    return float(np.sqrt(np.sum((rhs[inside] - q) ** 2)) / den)


# -- stand-alone report functions --------------------------------------------

INACTIVE = math.nan


def energy_report(records):
    """Relative energy residual of the latest record (``0`` for zero data)."""
    return records[-1]["energy_residual_rel"]


def transport_maximum_report(records):
    """Per-record ``(field ratio bound ratio, azimuthal Gronwall ratio)``."""
    return [(r["field_ratio_bound_ratio"], r["azimuthal_gronwall_ratio"]) for r in records]


def gamma_report(records):
    """Per-record ``(Lorentz ratio, L2 ratio)``; ``nan`` marks inactive (0/0) entries."""
    out = []
    for r in records:
        lr, l2 = r["lorentz_ratio"], r["vort_ratio_l2_ratio"]
        if r["vort_ratio_l31"] == 0 and lr == 0:
            lr = INACTIVE
        out.append((lr, l2))
    return out


def vorticity_sqrtL_report(vorticity, weights, pgrid=None):
    """``(||w||_sqrtL, least-squares slope of ||w||_p against sqrt p)``."""
    pgrid = PGrid() if pgrid is None else pgrid
    vals = np.array([weighted_lp(vorticity, weights, p) for p in pgrid])
    if not np.any(vals):
        return 0.0, 0.0
    slope = float(np.polyfit(np.sqrt(np.array(list(pgrid))), vals, 1)[0])
    return growth_report(vorticity, weights, 0.5, pgrid).value, slope


def interpolation_ratio(ur, uz, grid, pgrid=None):
    """``max_p ||d_z u||_p / (||L_v^{3/4} u||_p^{3/4} ||L_v^{7/4} u||_p^{1/4})``."""
    pgrid = PGrid() if pgrid is None else pgrid
    w = grid.weights
    dzu = _mag(dz_spectral(ur, grid), dz_spectral(uz, grid))
    l34 = _mag(lambda_vertical(ur, grid, 0.75), lambda_vertical(uz, grid, 0.75))
    l74 = _mag(lambda_vertical(ur, grid, 1.75), lambda_vertical(uz, grid, 1.75))
    best = 0.0
    for p in list(pgrid) + [np.inf]:
        den = weighted_lp(l34, w, p) ** 0.75 * weighted_lp(l74, w, p) ** 0.25
        if den > 0:
            best = max(best, weighted_lp(dzu, w, p) / den)
    return best


def high_norm_report(state, N, L, s=HS_INDEX):
    """``H^{s-1}`` norms of the reconstructed vorticity, azimuthal field and field ratio."""
    a = s - 1.0
    g = state.grid
    vort = ScalarFieldRZ(g, state.vorticity, Parity.ODD)
    bt = ScalarFieldRZ(g, state.azimuthal_field, Parity.ODD)
    hw = math.sqrt(sum(sobolev_hs_norm(c, a) ** 2 for c in reconstruct_azimuthal(vort, N, L)[:2]))
    hb = math.sqrt(sum(sobolev_hs_norm(c, a) ** 2 for c in reconstruct_azimuthal(bt, N, L)[:2]))
    hm = sobolev_hs_norm(reconstruct_cartesian(state.field_ratio_field, N, L), a)
    return {"vorticity": hw, "azimuthal": hb, "field_ratio": hm}


def velocity_gradient_report(records):
    """Per-record ``(bkm integral, radial rate ratio, CZ ratio, radial-rate residual)``."""
    return [(r["bkm_integral"], r["radial_rate_ratio"], r["cz_ratio"],
             r["radial_identity_residual"]) for r in records]


def vertical_regularity_report(records):
    return [(r["dzu_weighted"], r["uq_sum"], r["interp_ratio"]) for r in records]


__all__ = ["Monitor", "MonitorSettings", "DiagnosticRecord", "record_columns",
           "radial_identity_residual", "radial_identity_terms", "energy_report",
           "transport_maximum_report",
           "gamma_report", "vorticity_sqrtL_report", "interpolation_ratio", "high_norm_report",
           "velocity_gradient_report", "vertical_regularity_report", "DEFAULT_PGRID"]
