"""Tests for the expected subspace scale factor."""

import math

import numpy as np
import pytest

from swkit import (
    ContractError,
    Subspace,
    WeightedCloud,
    essf_empirical,
    essf_exact,
    essf_variance_curve,
    projected_norm_moment,
    random_rotation,
    sample_gaussian_raw,
    sample_uniform_sphere,
    sw_mc,
    validate_theorem,
)


class TestEssfExact:
    def test_full_subspace_is_one(self):
        for d in (1, 2, 17, 400):
            for p in (1.0, 2.0, 3.0, 2.5):
                assert essf_exact(d, d, p) == 1.0

    def test_quadratic_order_is_the_dimension_ratio(self):
        for d, k in [(100, 2), (7, 3), (1000, 50), (2, 1)]:
            assert essf_exact(d, k, 2.0) == k / d
        assert essf_exact(100, 2, 2.0) == 0.02

    def test_hand_derived_values(self):
        # Gamma(1)Gamma(1.5) / (Gamma(0.5)Gamma(2)) = 1/2
        assert essf_exact(3, 1, 1.0) == pytest.approx(0.5, rel=1e-14)
        # Gamma(1.5)Gamma(2) / (Gamma(1)Gamma(2.5)) = 2/3
        assert essf_exact(4, 2, 1.0) == pytest.approx(2.0 / 3.0, rel=1e-14)
        # Gamma(2.5)^2 / (Gamma(1)Gamma(4)) = (0.75 sqrt(pi))^2 / 6
        assert essf_exact(5, 2, 3.0) == pytest.approx(0.09375 * math.pi, rel=1e-13)

    @pytest.mark.parametrize("p", [1.0, 2.0, 3.0])
    def test_dual_routes_agree_at_integer_orders(self, p):
        for d in (2, 3, 5, 17, 100, 333, 1000, 2000, 10_000):
            for k in {1, max(1, d // 3), d - 1, d}:
                if k < 1:
                    continue
                a = essf_exact(d, k, p)
                b = projected_norm_moment(d, k, p)
                assert a == pytest.approx(b, rel=1e-12)

    @pytest.mark.parametrize("p", [1.5, 2.5, 3.75])
    def test_dual_routes_agree_at_fractional_orders(self, p):
        # both routes difference log-Gamma values here, so agreement is
        # capped near 1e-11 rather than the integer-order 1e-12
        for d in (2, 5, 17, 100, 1000, 10_000):
            for k in {1, max(1, d // 3), d - 1}:
                if k < 1:
                    continue
                a = essf_exact(d, k, p)
                b = projected_norm_moment(d, k, p)
                assert a == pytest.approx(b, rel=1e-10)

    @pytest.mark.parametrize("p", [1.0, 2.0, 3.0, 2.5])
    def test_strictly_decreasing_in_ambient_dimension(self, p):
        values = [essf_exact(d, 3, p) for d in range(3, 41)]
        assert all(a > b for a, b in zip(values, values[1:]))

    @pytest.mark.parametrize("p", [1.0, 2.0, 3.0, 2.5])
    def test_strictly_increasing_in_subspace_dimension(self, p):
        values = [essf_exact(40, k, p) for k in range(1, 41)]
        assert all(a < b for a, b in zip(values, values[1:]))

    def test_huge_dimension_does_not_overflow(self):
        for p in (1.0, 2.0, 3.0):
            value = essf_exact(10**6, 3, p)
            assert math.isfinite(value)
            assert 0.0 < value < 1.0

    def test_rejects_bad_arguments(self):
        with pytest.raises(ContractError):
            essf_exact(3, 4, 2.0)
        with pytest.raises(ContractError):
            essf_exact(3, 0, 2.0)
        with pytest.raises(ContractError):
            essf_exact(3, 2, 0.5)
        with pytest.raises(ContractError):
            essf_exact(3.5, 2, 2.0)


class TestEssfEmpirical:
    def test_full_subspace_is_one(self):
        sub = Subspace(np.eye(6))
        assert essf_empirical(sub, 500, 2.0, seed=0) == pytest.approx(1.0, abs=1e-14)

    def test_matches_the_beta_moment(self):
        d, k, count = 100, 2, 100_000
        sub = Subspace.random(d, k, seed=1)
        estimate = essf_empirical(sub, count, 2.0, seed=2)
        a, b = k / 2.0, (d - k) / 2.0
        var = a * b / ((a + b) ** 2 * (a + b + 1.0))
        assert abs(estimate - 0.02) < 4.0 * math.sqrt(var / count)

    def test_single_draw_is_in_the_unit_interval(self):
        sub = Subspace.random(9, 4, seed=3)
        value = essf_empirical(sub, 1, 2.0, seed=4)
        assert 0.0 <= value <= 1.0

    def test_deterministic_given_seed(self):
        sub = Subspace.random(12, 5, seed=5)
        one = essf_empirical(sub, 3000, 1.0, seed=6)
        two = essf_empirical(sub, 3000, 1.0, seed=6)
        assert one == two

    def test_invariant_under_basis_rotation(self):
        sub = Subspace.random(15, 6, seed=7)
        spin = random_rotation(6, seed=8)
        respun = Subspace(sub.basis @ spin)
        one = essf_empirical(sub, 5000, 2.0, seed=9)
        two = essf_empirical(respun, 5000, 2.0, seed=9)
        assert abs(one - two) <= 1e-9

    def test_rejects_empty_bank(self):
        sub = Subspace.random(4, 2, seed=10)
        with pytest.raises(ContractError):
            essf_empirical(sub, 0, 2.0, seed=11)


class TestValidateTheorem:
    def test_identity_subspace_control(self):
        check = validate_theorem(50, 50, 1.0, n=300, count=2000, seed=0)
        assert check.ratio_exact == 1.0
        assert abs(check.ratio_hat - 1.0) < 0.05

    def test_embedded_gaussians_recover_the_factor(self):
        check = validate_theorem(100, 2, 2.0, n=400, count=800, seed=1)
        assert check.ratio_exact == 0.02
        assert check.rel_err < 0.10

    def test_fields_are_consistent(self):
        check = validate_theorem(20, 3, 2.0, n=100, count=200, seed=2)
        assert check.ratio_hat == check.ambient_value_p / check.reduced_value_p
        assert check.ratio_exact == essf_exact(20, 3, 2.0)
        assert (check.d, check.k, check.p) == (20, 3, 2.0)


class TestGaussianSlicing:
    @pytest.mark.parametrize("p", [1.0, 2.0, 3.0])
    def test_raw_slices_scale_their_unit_twins(self, p):
        rng = np.random.default_rng(11)
        a = WeightedCloud.uniform(rng.standard_normal((20, 6)))
        b = WeightedCloud.uniform(rng.standard_normal((24, 6)) + 1.0)
        raw = sample_gaussian_raw(6, 64, seed=12)
        unit = sample_uniform_sphere(6, 64, seed=12)
        raw_costs = sw_mc(a, b, p, raw).per_slice
        unit_costs = sw_mc(a, b, p, unit).per_slice
        norms = np.linalg.norm(raw.directions, axis=1)
        np.testing.assert_allclose(raw_costs, norms**p * unit_costs, rtol=1e-9)


class TestVarianceCurve:
    def test_means_are_unbiased_and_spread_shrinks(self):
        rows = essf_variance_curve(100, 2, 2.0, runs=400, seed=0)
        assert [r.count for r in rows] == [10, 100, 1000, 10000]
        for row in rows:
            assert abs(row.mean - row.exact) < 5.0 * row.std
        stds = [r.std for r in rows]
        assert all(a > b for a, b in zip(stds, stds[1:]))

    def test_variance_decays_at_the_monte_carlo_rate(self):
        rows = essf_variance_curve(100, 2, 2.0, runs=1000, seed=1)
        x = np.log([r.count for r in rows])
        y = np.log([r.variance for r in rows])
        slope = float(np.polyfit(x, y, 1)[0])
        assert slope == pytest.approx(-1.0, abs=0.15)

    def test_full_subspace_never_varies(self):
        rows = essf_variance_curve(7, 7, 2.0, counts=(10, 100), runs=50, seed=2)
        for row in rows:
            assert row.mean == 1.0
            assert row.std == 0.0

    def test_runs_are_individually_seeded(self):
        one = essf_variance_curve(30, 4, 2.0, counts=(50,), runs=20, seed=3)[0]
        two = essf_variance_curve(30, 4, 2.0, counts=(50,), runs=20, seed=3)[0]
        assert (one.mean, one.variance) == (two.mean, two.variance)

    def test_rejects_degenerate_repetitions(self):
        with pytest.raises(ContractError):
            essf_variance_curve(10, 2, 2.0, runs=1, seed=4)
