"""Tests for the sliced-estimator family and its weighting schemes."""

import json
import math

import numpy as np
import pytest

from swkit import (
    ContractError,
    SliceSet,
    Subspace,
    SwEstimate,
    WeightedCloud,
    WeightingScheme,
    ebsw,
    exact_w2,
    max_sw,
    random_rotation,
    reduce_slice,
    rescaled_sw,
    rpsw,
    sample_random_path_slices,
    sample_uniform_sphere,
    sw_mc,
    wasserstein_1d,
)
from swkit.rng import derive_seed
from swkit.variants import estimate_record


def dirac(point):
    return WeightedCloud(np.asarray(point, dtype=np.float64)[None, :], np.array([1.0]))


def random_pair(rng, n, d, shift=1.0):
    a = WeightedCloud.uniform(rng.standard_normal((n, d)))
    b = WeightedCloud.uniform(rng.standard_normal((n + 3, d)) + shift)
    return a, b


def span_supported_pair(d, k, n, seed, shift=1.5):
    """Two clouds living on the same random k-dim subspace, plus their
    coordinates in it."""
    rng = np.random.default_rng(seed)
    sub = Subspace.random(d, k, seed)
    za = rng.standard_normal((n, k))
    zb = rng.standard_normal((n, k)) + shift
    reduced_a = WeightedCloud.uniform(za)
    reduced_b = WeightedCloud.uniform(zb)
    ambient_a = WeightedCloud.uniform(za @ sub.basis.T)
    ambient_b = WeightedCloud.uniform(zb @ sub.basis.T)
    return sub, ambient_a, ambient_b, reduced_a, reduced_b


def reduced_bank(sub, slices):
    """Reduce every slice of a bank into the subspace, asserting none die."""
    rows = []
    for theta in slices.directions:
        vec, scale = reduce_slice(sub, theta)
        assert scale > 0.0
        rows.append(vec)
    return SliceSet(np.array(rows), slices.seed)


class TestSwEstimate:
    def test_rejects_inconsistent_value(self):
        with pytest.raises(ContractError):
            SwEstimate(5.0, np.array([1.0, 1.0]), np.array([1.0, 1.0]), 2.0)

    def test_rejects_negative_value(self):
        with pytest.raises(ContractError):
            SwEstimate(-2.0, np.array([-2.0, -2.0]), np.array([1.0, 1.0]), 2.0)

    def test_rejects_length_mismatch(self):
        with pytest.raises(ContractError):
            SwEstimate(1.0, np.array([1.0, 1.0]), np.array([1.0]), 2.0)

    def test_energy_variant_combines_by_dot_product(self):
        est = SwEstimate(
            0.5, np.array([1.0, 0.0]), np.array([0.5, 0.5]), 2.0, "energy"
        )
        assert est.value_p == 0.5

    def test_distance_is_the_pth_root(self):
        est = SwEstimate.combine(np.array([4.0, 4.0]), np.ones(2), 2.0, "classical")
        assert est.distance == pytest.approx(2.0, abs=0)


class TestSwMc:
    def test_identical_clouds_give_zero(self):
        rng = np.random.default_rng(0)
        a = WeightedCloud.uniform(rng.standard_normal((15, 3)))
        bank = sample_uniform_sphere(3, 20, seed=1)
        assert sw_mc(a, a, 2.0, bank).value_p == 0.0

    def test_single_slice_is_that_slice(self):
        rng = np.random.default_rng(2)
        a, b = random_pair(rng, 12, 4)
        bank = sample_uniform_sphere(4, 1, seed=3)
        est = sw_mc(a, b, 2.0, bank)
        theta = bank.directions[0]
        direct = wasserstein_1d(
            WeightedCloud((a.points @ theta)[:, None], a.weights),
            WeightedCloud((b.points @ theta)[:, None], b.weights),
            2.0,
        )
        assert est.value_p == pytest.approx(direct, rel=1e-12)

    def test_weights_are_all_one(self):
        rng = np.random.default_rng(4)
        a, b = random_pair(rng, 8, 3)
        est = sw_mc(a, b, 2.0, sample_uniform_sphere(3, 11, seed=5))
        np.testing.assert_array_equal(est.weights, np.ones(11))
        assert est.value_p == pytest.approx(est.per_slice.mean(), rel=1e-12)

    def test_dirac_pair_recovers_inverse_dimension(self):
        d, L = 10, 100_000
        a = dirac(np.zeros(d))
        b = dirac(np.eye(d)[0])
        est = sw_mc(a, b, 2.0, sample_uniform_sphere(d, L, seed=6))
        var = 3.0 / (d * (d + 2.0)) - 1.0 / d**2
        assert abs(est.value_p - 1.0 / d) < 4.0 * math.sqrt(var / L)

    def test_rejects_dimension_mismatch(self):
        a = dirac([0.0, 0.0])
        b = dirac([0.0, 0.0, 0.0])
        with pytest.raises(ContractError):
            sw_mc(a, b, 2.0, sample_uniform_sphere(2, 4, seed=7))

    def test_rejects_order_below_one(self):
        a = dirac([0.0, 0.0])
        with pytest.raises(ContractError):
            sw_mc(a, a, 0.5, sample_uniform_sphere(2, 4, seed=8))


class TestRescaledSw:
    def test_classical_scheme_equals_plain_estimator(self):
        rng = np.random.default_rng(9)
        a, b = random_pair(rng, 14, 5)
        bank = sample_uniform_sphere(5, 30, seed=10)
        plain = sw_mc(a, b, 2.0, bank)
        via_scheme = rescaled_sw(a, b, 2.0, bank, WeightingScheme.classical())
        assert via_scheme.value_p == plain.value_p
        np.testing.assert_array_equal(via_scheme.per_slice, plain.per_slice)
        np.testing.assert_array_equal(via_scheme.weights, plain.weights)

    @pytest.mark.parametrize("p", [1.0, 2.0, 3.0])
    def test_reciprocal_recovers_the_reduced_estimate(self, p):
        sub, amb_a, amb_b, red_a, red_b = span_supported_pair(8, 3, 25, seed=11)
        bank = sample_uniform_sphere(8, 40, seed=12)
        rescaled = rescaled_sw(amb_a, amb_b, p, bank, WeightingScheme.reciprocal_es(sub))
        reduced = sw_mc(red_a, red_b, p, reduced_bank(sub, bank))
        assert rescaled.value_p == pytest.approx(reduced.value_p, rel=1e-9)

    def test_reciprocal_zeroes_orthogonal_slices(self):
        d, k = 5, 2
        sub = Subspace(np.eye(d)[:, :k])
        rng = np.random.default_rng(13)
        z = rng.standard_normal((10, k))
        a = WeightedCloud.uniform(np.hstack([z, np.zeros((10, d - k))]))
        b = WeightedCloud.uniform(np.hstack([z + 1.0, np.zeros((10, d - k))]))
        in_span = sample_uniform_sphere(d, 6, seed=14).directions
        orthogonal = np.eye(d)[d - 1]
        bank = SliceSet(np.vstack([in_span, orthogonal]), seed=14)
        est = rescaled_sw(a, b, 2.0, bank, WeightingScheme.reciprocal_es(sub))
        assert est.weights[-1] == 0.0
        assert est.per_slice[-1] == 0.0
        shorter = rescaled_sw(
            a, b, 2.0, SliceSet(in_span, seed=14), WeightingScheme.reciprocal_es(sub)
        )
        assert est.value_p == pytest.approx(shorter.value_p * 6 / 7, rel=1e-12)

    @pytest.mark.parametrize("f_tag", ["exp", "identity-plus-one"])
    def test_energy_with_equal_slices_returns_that_value(self, f_tag):
        a = dirac([0.0])
        b = dirac([1.0])
        bank = sample_uniform_sphere(1, 9, seed=15)
        est = rescaled_sw(a, b, 2.0, bank, WeightingScheme.energy(f_tag))
        assert est.value_p == pytest.approx(1.0, rel=1e-12)

    def test_random_path_scheme_requires_path_slices(self):
        rng = np.random.default_rng(16)
        a, b = random_pair(rng, 10, 3)
        bank = sample_uniform_sphere(3, 12, seed=17)
        with pytest.raises(ContractError):
            rescaled_sw(a, b, 2.0, bank, WeightingScheme.random_path(5.0))

    def test_random_path_scheme_averages_path_slices(self):
        rng = np.random.default_rng(18)
        a, b = random_pair(rng, 10, 3)
        bank = sample_random_path_slices(a, b, 12, 5.0, seed=19)
        est = rescaled_sw(a, b, 2.0, bank, WeightingScheme.random_path(5.0))
        np.testing.assert_array_equal(est.weights, np.ones(12))
        assert est.value_p == pytest.approx(est.per_slice.mean(), rel=1e-12)

    def test_scheme_constructors_validate(self):
        with pytest.raises(ContractError):
            WeightingScheme.energy("square")
        with pytest.raises(ContractError):
            WeightingScheme.random_path(-2.0)
        with pytest.raises(ContractError):
            WeightingScheme("reciprocal-es")


class TestEbsw:
    def test_identical_clouds_give_zero(self):
        rng = np.random.default_rng(20)
        a = WeightedCloud.uniform(rng.standard_normal((12, 4)))
        assert ebsw(a, a, 2.0, sample_uniform_sphere(4, 8, seed=21)).value_p == 0.0

    @pytest.mark.parametrize("f_tag", ["exp", "identity-plus-one"])
    @pytest.mark.parametrize("p", [1.0, 2.0])
    def test_never_below_the_uniform_average(self, f_tag, p):
        for seed in range(30):
            rng = np.random.default_rng(seed)
            a, b = random_pair(rng, 9, 3, shift=rng.uniform(0.0, 2.0))
            bank = sample_uniform_sphere(3, 5, seed=seed)
            energy = ebsw(a, b, p, bank, f_tag)
            uniform = sw_mc(a, b, p, bank)
            assert energy.value_p >= uniform.value_p - 1e-12

    def test_single_slice_reduces_to_that_slice(self):
        rng = np.random.default_rng(22)
        a, b = random_pair(rng, 10, 4)
        bank = sample_uniform_sphere(4, 1, seed=23)
        assert ebsw(a, b, 2.0, bank).value_p == pytest.approx(
            sw_mc(a, b, 2.0, bank).value_p, rel=1e-12
        )


class TestMaxSw:
    def test_dirac_pair_finds_the_separating_direction(self):
        u = np.array([1.0, 0.4, -0.2, 0.8])
        v = np.array([-0.3, 0.1, 0.5, 0.2])
        gap = u - v
        value, theta = max_sw(dirac(u), dirac(v), 2.0, iters=300, seed=24)
        assert value == pytest.approx(float(gap @ gap), abs=1e-4)
        unit = gap / np.linalg.norm(gap)
        assert min(np.linalg.norm(theta - unit), np.linalg.norm(theta + unit)) < 1e-4

    def test_identical_clouds_give_zero(self):
        rng = np.random.default_rng(25)
        a = WeightedCloud.uniform(rng.standard_normal((10, 3)))
        value, theta = max_sw(a, a, 2.0, seed=26)
        assert value == 0.0
        assert theta.shape == (3,)

    def test_one_dimensional_case_is_the_line_distance(self):
        a = WeightedCloud.uniform(np.array([[0.0], [2.0]]))
        b = WeightedCloud.uniform(np.array([[1.0], [4.0]]))
        value, theta = max_sw(a, b, 2.0, seed=27)
        assert value == pytest.approx(wasserstein_1d(a, b, 2.0), rel=1e-12)
        assert abs(theta[0]) == 1.0

    def test_value_never_decreases_with_more_restarts(self):
        rng = np.random.default_rng(28)
        a, b = random_pair(rng, 15, 6)
        values = [
            max_sw(a, b, 2.0, iters=30, restarts=r, seed=29)[0] for r in (1, 2, 3, 4)
        ]
        assert values == sorted(values)

    def test_never_below_its_own_uniform_probe(self):
        rng = np.random.default_rng(30)
        a, b = random_pair(rng, 12, 5)
        value, _ = max_sw(a, b, 2.0, iters=1, restarts=1, seed=31)
        probe = sw_mc(
            a, b, 2.0, sample_uniform_sphere(5, 50, derive_seed(31, "probe"))
        )
        assert value >= probe.per_slice.max() - 1e-12


class TestRpsw:
    def test_dirac_pair_at_infinite_concentration_is_exact(self):
        u = np.array([2.0, -1.0, 0.0])
        v = np.array([0.5, 1.0, 1.0])
        for p in (1.0, 2.0, 3.0):
            est = rpsw(dirac(u), dirac(v), p, 25, math.inf, seed=33)
            assert est.value_p == pytest.approx(
                float(np.linalg.norm(u - v) ** p), rel=1e-12
            )
            assert est.variant == "random-path"

    def test_identical_clouds_give_zero(self):
        rng = np.random.default_rng(34)
        a = WeightedCloud.uniform(rng.standard_normal((30, 4)))
        assert rpsw(a, a, 2.0, 60, 10.0, seed=35).value_p == 0.0

    def test_zero_concentration_matches_uniform_slicing(self):
        rng = np.random.default_rng(36)
        a, b = random_pair(rng, 40, 5)
        uniform = sw_mc(a, b, 2.0, sample_uniform_sphere(5, 2000, seed=37))
        se_uniform = uniform.per_slice.std(ddof=1) / math.sqrt(uniform.per_slice.size)
        reps = np.array(
            [rpsw(a, b, 2.0, 500, 0.0, seed=38 + r).value_p for r in range(20)]
        )
        se_reps = reps.std(ddof=1) / math.sqrt(reps.size)
        tol = 4.0 * math.hypot(se_uniform, se_reps)
        assert abs(reps.mean() - uniform.value_p) < tol


class TestFamilyLaws:
    """Cross-estimator identities on shared slice banks."""

    @pytest.mark.parametrize("p", [1.0, 2.0, 3.0])
    def test_triangle_inequality_over_shared_slices(self, p):
        for seed in range(10):
            rng = np.random.default_rng(seed)
            a = WeightedCloud.uniform(rng.standard_normal((10, 4)))
            b = WeightedCloud.uniform(rng.standard_normal((12, 4)) + 0.5)
            c = WeightedCloud.uniform(rng.standard_normal((9, 4)) - 0.5)
            bank = sample_uniform_sphere(4, 25, seed=seed)
            ab = sw_mc(a, b, p, bank).distance
            bc = sw_mc(b, c, p, bank).distance
            ac = sw_mc(a, c, p, bank).distance
            assert ac <= ab + bc + 1e-9

    def test_joint_rotation_leaves_the_estimate_fixed(self):
        rng = np.random.default_rng(39)
        a, b = random_pair(rng, 18, 6)
        bank = sample_uniform_sphere(6, 32, seed=40)
        q = random_rotation(6, seed=41)
        spun_a = WeightedCloud(a.points @ q.T, a.weights)
        spun_b = WeightedCloud(b.points @ q.T, b.weights)
        spun_bank = SliceSet(bank.directions @ q.T, seed=40)
        before = sw_mc(a, b, 2.0, bank)
        after = sw_mc(spun_a, spun_b, 2.0, spun_bank)
        assert after.value_p == pytest.approx(before.value_p, rel=1e-9)

    @pytest.mark.parametrize("p", [1.0, 2.0, 3.0])
    def test_per_slice_scaling_identity(self, p):
        for seed in range(7):
            sub, amb_a, amb_b, red_a, red_b = span_supported_pair(
                9, 4, 20, seed=42 + seed
            )
            bank = sample_uniform_sphere(9, 15, seed=52 + seed)
            ambient = sw_mc(amb_a, amb_b, p, bank).per_slice
            align = np.linalg.norm(bank.directions @ sub.basis, axis=1)
            reduced = sw_mc(red_a, red_b, p, reduced_bank(sub, bank)).per_slice
            np.testing.assert_allclose(ambient, align**p * reduced, rtol=1e-9)

    def test_per_slice_values_stay_below_the_reduced_optimum(self):
        sub, amb_a, amb_b, red_a, red_b = span_supported_pair(10, 3, 64, seed=60)
        ceiling = exact_w2(red_a, red_b) ** 2
        est = sw_mc(amb_a, amb_b, 2.0, sample_uniform_sphere(10, 200, seed=61))
        assert est.per_slice.max() <= ceiling + 1e-9


class TestEstimateRecord:
    def test_record_is_json_ready_and_complete(self):
        rng = np.random.default_rng(62)
        a, b = random_pair(rng, 8, 3)
        est = sw_mc(a, b, 2.0, sample_uniform_sphere(3, 16, seed=63))
        record = estimate_record(est, seed=63, runtime_ms=1.25)
        assert set(record) == {"variant", "p", "L", "seed", "value_p", "runtime_ms"}
        assert record["L"] == 16
        assert record["variant"] == "classical"
        parsed = json.loads(json.dumps(record))
        assert parsed["value_p"] == est.value_p
