import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from aximhd.grid import Field3D, Parity, build_grid
from aximhd.norms import (PGrid, NormReport, growth_report, la_norm, lorentz_norm, lp_norm,
                          sobolev_hs_norm, sqrtL_norm, weighted_lorentz, weighted_lp)


def _ball(n, radius=1.0):
    g = build_grid(n, 2 * n, 1.5, 3.0)
    r, z = g.mesh
    return g.field((r**2 + z**2 <= radius**2).astype(float), Parity.EVEN)


def _random_field(seed, n=16):
    rng = np.random.default_rng(seed)
    g = build_grid(n, n, 2.0, 4.0)
    return g, rng.standard_normal(g.shape)


class TestPGrid:
    def test_default(self):
        pg = PGrid()
        assert pg.exponents[0] == 2.0 and pg.exponents[-1] == 256.0
        assert len(pg) == 8

    @pytest.mark.parametrize("ps", [(4, 8), (2, 2, 4), (2, 512), ()])
    def test_invalid(self, ps):
        with pytest.raises(ValueError):
            PGrid(ps)


class TestLebesgue:
    def test_constant(self):
        g = build_grid(16, 16, 1.0, 1.0)
        f = g.field(np.full(g.shape, -2.5), Parity.EVEN)
        assert lp_norm(f, 2) == pytest.approx(2.5 * math.sqrt(math.pi), rel=1e-13)

    @staticmethod
    def _gaussian_l2(nr):
        g = build_grid(nr, 512, 6.0, 12.0)
        r, z = g.mesh
        return g, lp_norm(g.field(np.exp(-(r**2 + z**2)), Parity.EVEN), 2)

    def test_gaussian_leading_error(self):
        # The squared norm carries the midpoint error (dr^2 / 24) 2 pi sqrt(pi / 2).
        exact = (math.pi / 2) ** 0.75
        g, value = self._gaussian_l2(256)
        predicted = g.dr**2 / 24 * 2 * math.pi * math.sqrt(math.pi / 2) / (2 * exact)
        assert value - exact == pytest.approx(predicted, rel=1e-3)

    def test_gaussian_extrapolated(self):
        exact = (math.pi / 2) ** 0.75
        _, coarse = self._gaussian_l2(256)
        _, fine = self._gaussian_l2(512)
        assert abs(math.sqrt((4 * fine**2 - coarse**2) / 3) - exact) <= 1e-5

    def test_zero(self):
        g = build_grid(8, 8, 1.0, 1.0)
        assert lp_norm(g.zeros(Parity.EVEN), 3) == 0.0

    def test_rejects_small_exponent(self):
        g = build_grid(8, 8, 1.0, 1.0)
        with pytest.raises(ValueError):
            lp_norm(g.zeros(Parity.EVEN), 0.5)

    @given(st.integers(0, 2**31 - 1))
    def test_sup_norm_dominates(self, seed):
        g, v = _random_field(seed)
        f = g.field(v, Parity.EVEN)
        top = lp_norm(f, math.inf)
        assert top == np.max(np.abs(v))
        for p in PGrid():
            assert lp_norm(f, p) <= top * g.volume ** (1 / p) * (1 + 1e-12)

    @given(st.integers(0, 2**31 - 1), st.floats(-1e3, 1e3, allow_nan=False))
    def test_homogeneity(self, seed, c):
        g, v = _random_field(seed)
        for p in (2.0, 5.0, math.inf):
            assert weighted_lp(c * v, g.weights, p) == pytest.approx(
                abs(c) * weighted_lp(v, g.weights, p), rel=1e-12, abs=1e-300)

    @given(st.integers(0, 2**31 - 1), st.floats(1.1, 10.0))
    def test_hoelder(self, seed, p):
        g, v = _random_field(seed)
        w = np.roll(v, 3, axis=1) ** 2
        q = p / (p - 1)
        lhs = weighted_lp(v * w, g.weights, 1)
        assert lhs <= weighted_lp(v, g.weights, p) * weighted_lp(w, g.weights, q) * (1 + 1e-12)

    def test_large_exponent_does_not_overflow(self):
        g = build_grid(8, 8, 1.0, 1.0)
        v = np.full(g.shape, 1e200)
        assert weighted_lp(v, g.weights, 256) == pytest.approx(1e200 * math.pi ** (1 / 256))


class TestLorentz:
    def test_ball_l31(self):
        exact = 3 * (4 * math.pi / 3) ** (1 / 3)
        errors = [abs(lorentz_norm(_ball(n), 3, 1) - exact) for n in (128, 256)]
        assert errors[1] <= 0.02 * exact
        assert errors[1] < errors[0]

    def test_diagonal_index_is_lebesgue(self):
        f = _ball(256)
        assert lorentz_norm(f, 3, 3) == pytest.approx(lp_norm(f, 3), rel=1e-10)

    def test_weak_type_of_indicator(self):
        f = _ball(64)
        volume = float(np.sum(f.values * f.grid.weights))
        assert lorentz_norm(f, 2, math.inf) == pytest.approx(math.sqrt(volume), rel=1e-12)

    def test_zero(self):
        g = build_grid(8, 8, 1.0, 1.0)
        assert lorentz_norm(g.zeros(Parity.EVEN), 3, 1) == 0.0

    @pytest.mark.parametrize("p,q", [(1.0, 2.0), (math.inf, 2.0), (3.0, 1.5)])
    def test_invalid_indices(self, p, q):
        g = build_grid(8, 8, 1.0, 1.0)
        with pytest.raises(ValueError):
            lorentz_norm(g.zeros(Parity.EVEN), p, q)

    @given(st.integers(0, 2**31 - 1))
    def test_monotone_in_fine_index(self, seed):
        g, v = _random_field(seed)
        vals = [weighted_lorentz(v, g.weights, 3.0, q) for q in (1.0, 2.0, 3.0, math.inf)]
        assert all(b <= a * (1 + 1e-12) for a, b in zip(vals, vals[1:]))

    def test_rearrangement_invariance(self, rng):
        w = np.ones(64)
        v = rng.standard_normal(64)
        assert weighted_lorentz(v, w, 3, 1) == pytest.approx(
            weighted_lorentz(rng.permutation(v), w, 3, 1), rel=1e-14)


class TestGrowth:
    def test_indicator_peaks_at_two(self):
        f = _ball(64, radius=0.6)
        volume = float(np.sum(f.values * f.grid.weights))
        assert volume >= math.exp(-1)  # peak at p = -2 ln volume <= 2
        rep = growth_report(f.values, f.grid.weights, 0.5)
        brute = max(volume ** (1 / p) / math.sqrt(p) for p in PGrid())
        assert rep.argmax_p == 2.0
        assert rep.value == pytest.approx(math.sqrt(volume) / math.sqrt(2), rel=1e-12)
        assert rep.value == pytest.approx(brute, rel=1e-12)
        assert rep.tail_decreasing

    def test_zero(self):
        g = build_grid(8, 8, 1.0, 1.0)
        assert sqrtL_norm(g.zeros(Parity.EVEN)) == 0.0

    def test_exponent_range(self):
        g = build_grid(8, 8, 1.0, 1.0)
        with pytest.raises(ValueError):
            la_norm(g.zeros(Parity.EVEN), 1.5)

    @given(st.integers(0, 2**31 - 1))
    def test_decreasing_in_exponent(self, seed):
        g, v = _random_field(seed)
        f = g.field(v, Parity.EVEN)
        assert la_norm(f, 0.75) <= la_norm(f, 0.5) <= la_norm(f, 0.0)


class TestSobolev:
    @staticmethod
    def _box(values, L=2 * math.pi):
        return Field3D(np.asarray(values, dtype=float), L)

    def test_zero(self):
        assert sobolev_hs_norm(self._box(np.zeros((16, 16, 16))), 1.0) == 0.0

    def test_s_zero_is_l2(self, rng):
        N = 32
        x = np.arange(N) * 2 * math.pi / N
        X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
        vals = sum(rng.standard_normal() * np.cos(a * X + b * Y + c * Z)
                   for a, b, c in rng.integers(-6, 7, size=(12, 3)))
        F = self._box(vals)
        l2 = math.sqrt(np.sum(F.values**2) * F.cell_volume)
        assert sobolev_hs_norm(F, 0.0) == pytest.approx(l2, rel=1e-8)

    @pytest.mark.parametrize("s", [0.5, 1.0, 2.6])
    @pytest.mark.parametrize("n", [2, 3, 4, 6])
    def test_single_mode_bracket(self, s, n):
        N = 32
        x = np.arange(N) * 2 * math.pi / N
        F = self._box(np.cos(n * x)[:, None, None] * np.ones((1, N, N)))
        j0 = math.log2(n)
        l2 = math.sqrt(np.sum(F.values**2) * F.cell_volume)
        ratio = sobolev_hs_norm(F, s) / l2
        assert 2 ** ((math.floor(j0) - 1) * s) * (1 - 1e-12) <= ratio
        assert ratio <= 2 ** ((math.ceil(j0) + 1) * s) * (1 + 1e-12)

    def test_index_range(self):
        with pytest.raises(ValueError):
            sobolev_hs_norm(self._box(np.zeros((8, 8, 8))), 5.0)


def test_norm_report_validation():
    NormReport(0.0, {"a": 1.0})
    with pytest.raises(ValueError):
        NormReport(0.0, {"a": -1.0})
    with pytest.raises(ValueError):
        NormReport(0.0, {"a": math.nan})
