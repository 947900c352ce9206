import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from aximhd.grid import Field3D, Parity, box_axes, build_grid
from aximhd.littlewood_paley import (HIGH_EDGE, LOW_EDGE, DyadicPartition, all_blocks,
                                     bernstein_check, besov_norm, block_norms, bony_decompose,
                                     box_frequencies, commutator_Rq, j_max_for, lambda_frac,
                                     lambda_vertical, lp_project, random_band_limited,
                                     random_solenoidal, spectral_excess, square_overlap,
                                     vertical_block)
from aximhd.norms import weighted_lp
from aximhd.solver import AxisymmetricSolver, State

L = 2 * math.pi
PART = DyadicPartition.default()


def _mode(N, n, axis=0):
    x, _, z = box_axes(N, L, N, L)
    shape = [1, 1, 1]
    shape[axis] = N
    coord = z if axis == 2 else x
    return Field3D(np.cos(n * coord).reshape(shape) * np.ones((N, N, N)), L)


def _rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


class TestPartition:
    xi = np.linspace(0.0, 0.75 * 2.0**12, 200001)

    def test_unity(self):
        total = PART.chi(self.xi) + sum(PART.phi(self.xi / 2.0**j) for j in range(12))
        assert np.max(np.abs(total - 1.0)) <= 1e-12

    def test_supports(self):
        chi = PART.chi(self.xi)
        assert np.all(chi[self.xi <= LOW_EDGE] == 1.0)
        assert np.max(np.abs(chi[self.xi >= HIGH_EDGE])) <= 1e-12
        phi = PART.phi(self.xi)
        outside = (self.xi < LOW_EDGE) | (self.xi > 2 * HIGH_EDGE)
        assert np.max(np.abs(phi[outside])) <= 1e-12

    def test_profile_shape(self):
        chi = PART.chi(self.xi[:5000])
        assert np.all((chi >= 0) & (chi <= 1))
        assert np.all(np.diff(chi) <= 0)

    @pytest.mark.parametrize("gap", [2, 3, 5])
    def test_almost_orthogonal_multipliers(self, gap):
        for j in range(-1, 8):
            prod = PART.delta(self.xi, j) * PART.delta(self.xi, j + gap)
            assert np.max(np.abs(prod)) <= 1e-12

    def test_low_pass_conventions(self):
        xi = np.linspace(0, 10, 101)
        assert not np.any(PART.low(xi, -1))
        assert np.allclose(PART.low(xi, 2), sum(PART.delta(xi, j) for j in range(-1, 2)))
        with pytest.raises(ValueError):
            PART.multiplier(xi, 0, "T")

    def test_j_max(self):
        assert j_max_for(32) == 3 and j_max_for(128) == 5


class TestBoxBlocks:
    def test_reconstruction_and_orthogonality(self):
        F = random_band_limited(32, L, L, 4, seed=7)
        blocks = all_blocks(F)
        assert _rel(sum(b.values for b in blocks), F.values) <= 1e-12
        for i, bi in enumerate(blocks):
            for j in range(i + 2, len(blocks)):
                twice = lp_project(bi, j - 1)
                assert np.max(np.abs(twice.values)) <= 1e-12 * np.max(np.abs(F.values))

    def test_single_mode_lives_in_one_block(self):
        # |xi| = 6 gives phi(6 / 4) = 1 and phi(6 / 2^j) = 0 for j != 2.
        F = _mode(32, 6)
        blocks = all_blocks(F)
        for j, b in zip(range(-1, 4), blocks):
            expected = F.values if j == 2 else 0.0
            assert np.max(np.abs(b.values - expected)) <= 1e-12

    def test_low_pass_error_monotone(self):
        F = random_band_limited(64, L, L, 8, seed=3)
        errs = [np.linalg.norm(lp_project(F, j, "S").values - F.values)
                for j in range(0, j_max_for(64) + 1)]
        assert all(b <= a for a, b in zip(errs, errs[1:]))
        top = lp_project(F, j_max_for(64), "S").values + lp_project(F, j_max_for(64)).values
        assert _rel(top, F.values) <= 1e-12

    def test_block_above_j_max_rejected(self):
        with pytest.raises(ValueError):
            lp_project(_mode(16, 1), 3)
        with pytest.raises(ValueError):
            lp_project(_mode(16, 1), -2)

    def test_real_output(self):
        F = random_band_limited(16, L, L, 2, seed=1)
        assert lp_project(F, 0).values.dtype == np.float64

    def test_square_overlap_bounds(self):
        F = random_band_limited(32, L, L, 4, seed=2)
        ov = square_overlap(F)
        assert 0.5 <= ov <= 1.0


class TestVerticalBlocks:
    def test_z_independent(self):
        g = build_grid(8, 32, 1.0, L)
        r, _ = g.mesh
        f = g.field(np.exp(-r**2), Parity.EVEN)
        for k in range(0, j_max_for(32) + 1):
            assert np.max(np.abs(vertical_block(f, k).values)) <= 1e-14

    @pytest.mark.parametrize("m", [1, 3, 5, 7])
    def test_single_harmonic_support(self, m):
        g = build_grid(8, 64, 1.0, 3.0)
        r, z = g.mesh
        f = g.field(np.exp(-r**2) * np.sin(2 * math.pi * m * z / g.Lz), Parity.EVEN)
        ks = range(-1, j_max_for(64) + 1)
        active = [k for k in ks if np.max(np.abs(vertical_block(f, k).values)) > 1e-12]
        zeta = 2 * math.pi * m / g.Lz
        predicted = [k for k in ks if PART.delta(np.array([zeta]), k)[0] > 0]
        assert active == predicted and 1 <= len(active) <= 2
        total = sum(vertical_block(f, k).values for k in ks)
        assert np.max(np.abs(total - f.values)) <= 1e-8

    def test_range_checked(self):
        g = build_grid(8, 16, 1.0, 1.0)
        with pytest.raises(ValueError):
            vertical_block(g.zeros(Parity.EVEN), 3)

    def test_box_version_matches_tensor_blocks(self):
        F = random_band_limited(16, L, L, 3, seed=4)
        total = sum(vertical_block(F, k).values for k in range(-1, j_max_for(16) + 1))
        assert _rel(total, F.values) <= 1e-12


class TestBesov:
    def test_zero(self):
        assert besov_norm(Field3D(np.zeros((16, 16, 16)), L), 0.5, 2.0) == 0.0

    def test_index_zero_brackets_l2(self):
        F = random_band_limited(32, L, L, 4, seed=5)
        l2 = math.sqrt(np.sum(F.values**2) * F.cell_volume)
        b = besov_norm(F, 0.0, 2.0)
        assert l2 / math.sqrt(j_max_for(32) + 2) <= b <= l2

    @pytest.mark.parametrize("p", [2.0, 4.0, math.inf])
    def test_single_mode(self, p):
        F = _mode(32, 6)
        expected = 4.0 * weighted_lp(F.values, F.cell_volume, p)
        assert besov_norm(F, 1.0, p) == pytest.approx(expected, rel=1e-12)

    def test_anisotropic_single_mode(self):
        F = _mode(32, 6, axis=2)
        # horizontal block -1, vertical block 2
        expected = 2.0 ** (-0.5 + 2 * 0.75) * weighted_lp(F.values, F.cell_volume, 2.0)
        assert besov_norm(F, 0.0, 2.0, ("aniso", 0.5, 0.75)) == pytest.approx(expected, rel=1e-12)

    def test_validation(self):
        F = _mode(16, 1)
        with pytest.raises(ValueError):
            besov_norm(F, 5.0, 2.0)
        with pytest.raises(ValueError):
            besov_norm(F, 0.5, 2.0, "weird")

    def test_block_norms_length(self):
        assert len(block_norms(_mode(32, 1), 2.0)) == j_max_for(32) + 2


class TestBony:
    def test_constant_factor(self):
        first = random_band_limited(32, L, L, 3, seed=8)
        second = first.like(np.ones(first.shape))
        parts = bony_decompose(first, second)
        assert np.max(np.abs(parts.paraproduct_uv.values)) <= 1e-12
        recovered = parts.paraproduct_vu.values + parts.remainder.values
        assert _rel(recovered, first.values) <= 1e-8

    def test_single_mode_square(self):
        first = _mode(32, 3)
        parts = bony_decompose(first, first)
        assert _rel(parts.total().values, first.values**2) <= 1e-8

    @given(st.integers(0, 2**31 - 1))
    def test_random_reconstruction(self, seed):
        first = random_band_limited(32, L, L, 3, seed)
        second = random_band_limited(32, L, L, 3, seed + 1)
        assert _rel(bony_decompose(first, second).total().values, first.values * second.values) <= 1e-8

    def test_margin_enforced(self):
        with pytest.raises(ValueError):
            bony_decompose(_mode(16, 6), _mode(16, 1))
        assert spectral_excess(_mode(16, 6)) > 0.5


class TestCommutator:
    def test_constant_velocity(self):
        scalar = random_band_limited(32, L, L, 3, seed=11)
        ones = scalar.like(np.ones(scalar.shape))
        velocity = tuple(ones.like(c * ones.values) for c in (0.3, -1.2, 0.7))
        for q in range(1, j_max_for(32) - 1):
            assert np.max(np.abs(commutator_Rq(velocity, scalar, q).values)) <= 1e-12

    def test_separated_supports(self):
        velocity = random_solenoidal(32, L, 1, seed=12)
        scalar = _mode(32, 6)
        assert np.max(np.abs(commutator_Rq(velocity, scalar, 0).values)) <= 1e-12

    def test_requires_solenoidal(self):
        field = random_band_limited(16, L, L, 2, seed=13)
        with pytest.raises(ValueError):
            commutator_Rq((field, field, field), field, 0)

    def test_random_solenoidal_is_divergence_free(self):
        from aximhd.littlewood_paley import divergence_residual
        assert divergence_residual(random_solenoidal(32, L, 3, seed=14)) <= 1e-12


class TestLambda:
    def test_identity_on_mean_free(self):
        F = random_band_limited(16, L, L, 2, seed=15)
        F = F.like(F.values - F.values.mean())
        assert np.max(np.abs(lambda_frac(F, 0.0).values - F.values)) <= 1e-12

    def test_vertical_eigenfunction(self):
        g = build_grid(8, 32, 1.0, 3.0)
        r, z = g.mesh
        m = 3
        f = g.field(np.exp(-r**2) * np.cos(2 * math.pi * m * z / g.Lz), Parity.EVEN)
        out = lambda_frac(f, 1.0, "vertical")
        assert np.max(np.abs(out.values - 2 * math.pi * m / g.Lz * f.values)) <= 1e-12

    def test_composition(self):
        F = random_band_limited(32, L, L, 4, seed=16)
        two = lambda_frac(lambda_frac(F, 0.75, "vertical"), 1.0, "vertical")
        one = lambda_frac(F, 1.75, "vertical")
        assert np.max(np.abs(two.values - one.values)) <= 1e-10 * np.max(np.abs(one.values))

    def test_meridian_composition(self):
        g = build_grid(8, 64, 1.0, L)
        rng = np.random.default_rng(17)
        spec = np.zeros((8, 33), complex)
        spec[:, 1:12] = rng.standard_normal((8, 11)) + 1j * rng.standard_normal((8, 11))
        vals = np.fft.irfft(spec, n=64, axis=-1)
        two = lambda_vertical(lambda_vertical(vals, g, 0.75), g, 1.0)
        assert np.max(np.abs(two - lambda_vertical(vals, g, 1.75))) <= 1e-10 * np.max(np.abs(two))

    def test_validation(self):
        g = build_grid(8, 16, 1.0, 1.0)
        with pytest.raises(ValueError):
            lambda_frac(g.zeros(Parity.EVEN), 1.0, "full")
        with pytest.raises(ValueError):
            lambda_frac(_mode(16, 1), 2.5)


class TestBernstein:
    @pytest.mark.parametrize("j", [1, 2, 3, 4])
    def test_single_mode_ratios(self, j):
        N = 64
        n = int(1.5 * 2**j)
        F = _mode(N, n)
        for alpha in (0.5, 1.0):
            rat = bernstein_check(F, j, alpha, 2.0, 2.0)
            assert rat.two_sided == pytest.approx((n / 2**j) ** alpha, rel=1e-12)
        assert bernstein_check(F, j, 0.0, 3.0, 3.0).upper == pytest.approx(1.0, rel=1e-12)

    def test_empty_block(self):
        with pytest.raises(ValueError):
            bernstein_check(_mode(32, 6), 0, 1.0, 2.0, 2.0)

    @pytest.mark.parametrize("alpha", [0.0, 0.5, 1.0])
    @pytest.mark.parametrize("p", [2.0, 4.0])
    @pytest.mark.parametrize("q", [4.0, math.inf])
    def test_white_noise_upper_bound(self, alpha, p, q):
        # Nikolskii-type bound for a block with M lattice modes of modulus <= rho:
        # ||L^a g||_q <= rho^a sqrt(M) vol^(1/q - 1/2) ||g||_2 <= ... vol^(1/q - 1/p) ||g||_p.
        N = 32
        rng = np.random.default_rng(18)
        F = Field3D(rng.standard_normal((N, N, N)), L)
        *_, full = box_frequencies(F)
        vol = L**3
        inv = lambda x: 0.0 if math.isinf(x) else 1.0 / x
        for j in range(0, j_max_for(N) + 1):
            rho = 2 * HIGH_EDGE * 2.0**j
            support = PART.delta(full, j) > 0
            counts = np.where(np.arange(full.shape[2]) == 0, 1, 2)[None, None, :]
            M = float(np.sum(support * counts))
            bound = (rho**alpha * math.sqrt(M) * vol ** (inv(q) - inv(p))
                     / 2.0 ** (alpha * j + 3 * j * (inv(p) - inv(q))))
            assert bernstein_check(F, j, alpha, p, q).upper <= bound


class TestHeatDecay:
    @pytest.mark.parametrize("p", [2.0, math.inf])
    def test_vertical_block_decay_rate(self, p):
        g = build_grid(16, 64, 2.0, L)
        r, z = g.mesh
        rng = np.random.default_rng(19)
        vals = sum(rng.standard_normal() * np.exp(-r**2) * np.cos(m * z + rng.uniform(0, L))
                   for m in range(1, 20))
        solver = AxisymmetricSolver(g, advection=False, source=False)
        floor = 0.5 * 0.75**2 * (2 * math.pi / g.Lz) ** 2
        for k in range(0, j_max_for(64) + 1):
            blk = vertical_block(g.field(vals, Parity.EVEN), k).values
            base = weighted_lp(blk, g.weights, p)
            ts = np.linspace(0.0, 2.0 / 4.0**k, 9)
            state = State(g, 0.0, blk.copy(), np.zeros(g.shape))
            logs = [0.0]
            for t0, t1 in zip(ts, ts[1:]):
                state = solver.step(state, t1 - t0)
                logs.append(math.log(weighted_lp(state.vort_ratio, g.weights, p) / base))
            slope = np.polyfit(ts * 4.0**k, logs, 1)[0]
            assert -slope >= floor
