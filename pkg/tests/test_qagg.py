import math

import numpy as np
import pytest

from nrqfl import qagg
from nrqfl.encode import HALF_PI, WeightBounds
from nrqfl.qcore import (
    NoiseModel,
    Z_OBSERVABLE,
    apply_channel,
    dephasing_channel,
    depolarizing_channel,
    identity_channel,
    make_pure_state,
    random_density_matrix,
)

NOISELESS = NoiseModel()
DEPOL = NoiseModel(p_depol=0.05)


def exact_raw(angles, noise):
    plan = qagg.build_plan(angles)
    return qagg.run_plan(plan, noise, 1, None, exact=True)


class TestBuildPlan:
    def test_mean_by_construction(self):
        plan = qagg.build_plan([0.2, 0.4, 0.6])
        assert plan.gates == pytest.approx((2 * 0.2 / 3, 2 * 0.4 / 3, 2 * 0.6 / 3))
        assert exact_raw([0.2, 0.4, 0.6], NOISELESS).raw_value == pytest.approx(0.4, abs=1e-12)

    def test_single_client(self):
        plan = qagg.build_plan([0.7])
        assert plan.gates == pytest.approx((1.4,))
        assert exact_raw([0.7], NOISELESS).raw_value == pytest.approx(0.7, abs=1e-12)

    def test_symmetric_pair(self):
        assert exact_raw([0.1, 0.9], NOISELESS).raw_value == pytest.approx(0.5, abs=1e-12)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            qagg.build_plan([])

    def test_rejects_depth_violation(self):
        with pytest.raises(ValueError, match="split into groups"):
            qagg.build_plan([0.1] * 10)


class TestRunPlan:
    def test_noiseless_linearity(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            angles = rng.uniform(0, HALF_PI, size=rng.integers(1, 10))
            assert exact_raw(angles, NOISELESS).raw_value == pytest.approx(np.mean(angles), abs=1e-10)

    def test_depolarizing_attenuation_oracle(self):
        # density-matrix oracle: three channel passes shrink <Z> by (1-4p/3)^3
        angles = [0.3, 0.5, 0.7]
        est = exact_raw(angles, DEPOL)
        lam3 = (1 - 4 * 0.05 / 3) ** 3
        expected_z = lam3 * math.cos(2 * np.mean(angles))
        assert est.z_raw == pytest.approx(expected_z, abs=1e-12)
        assert est.raw_value == pytest.approx(math.asin(math.sqrt((1 - expected_z) / 2)), abs=1e-12)

    def test_two_seeds_within_sampling_envelope(self):
        plan = qagg.build_plan([0.3, 0.5, 0.7])
        shots = 10**5
        a = qagg.run_plan(plan, DEPOL, shots, np.random.default_rng(1))
        b = qagg.run_plan(plan, DEPOL, shots, np.random.default_rng(2))
        assert a.raw_value != b.raw_value
        assert abs(a.raw_value - b.raw_value) < 4 * 2 / (2 * math.sqrt(shots))


class TestChannelInversion:
    def test_zero_noise_identity(self):
        assert qagg.mitigate_channel_inversion(0.42, NOISELESS, 5) == pytest.approx(0.42)

    def test_recovers_attenuated_value(self):
        z = 0.6
        lam3 = (1 - 4 * 0.05 / 3) ** 3
        assert qagg.mitigate_channel_inversion(lam3 * z, DEPOL, 3) == pytest.approx(z, abs=1e-9)

    def test_clamp_boundary(self):
        assert qagg.mitigate_channel_inversion(1.0, DEPOL, 3) == 1.0

    def test_ill_conditioned_depth(self):
        with pytest.raises(ValueError, match="mitigable"):
            qagg.mitigate_channel_inversion(0.1, NoiseModel(p_depol=0.74), 100)


class TestCalibrate:
    def test_zero_noise(self):
        tf = qagg.calibrate(NOISELESS, 3)
        assert tf.lam_hat == pytest.approx(1.0, abs=1e-9)
        assert tf.b_hat == pytest.approx(0.0, abs=1e-9)

    def test_depolarizing_slope(self):
        tf = qagg.calibrate(DEPOL, 3)
        assert tf.lam_hat == pytest.approx((1 - 4 * 0.05 / 3) ** 3, abs=1e-9)
        assert tf.b_hat == pytest.approx(0.0, abs=1e-9)

    def test_damping_offset_sign(self):
        tf = qagg.calibrate(NoiseModel(gamma=0.03), 3)
        assert tf.b_hat > 0  # damping biases toward |0>

    def test_rejects_degenerate_probes(self):
        with pytest.raises(ValueError, match="distinct"):
            qagg.calibrate(DEPOL, 3, probe_angles=(0.5, 0.5))


class TestAggregate:
    def wide_bounds(self, p):
        return [WeightBounds(-10.0, 10.0)] * p

    def test_noiseless_mean(self):
        cfg = qagg.AggregationConfig(n_clients=2, exact_expectation=True)
        result = qagg.aggregate([[1.0, 2.0], [3.0, 4.0]], self.wide_bounds(2), cfg, NOISELESS)
        assert result.vector == pytest.approx([2.0, 3.0], abs=1e-9)

    def test_identical_vectors_under_noise(self):
        cfg = qagg.AggregationConfig(
            shots=10**5, n_clients=3, repeats=3,
            mitigation=frozenset(qagg.MITIGATION_FLAGS),
        )
        noise = NoiseModel(p_depol=0.05, gamma=0.03)
        vecs = [[0.4, -0.2]] * 3
        result = qagg.aggregate(vecs, [WeightBounds(-1, 1)] * 2, cfg, noise, seed_key=(7,))
        # 0.02 rad tolerance maps to 0.02/(pi/2) * span in weight units
        tol = 0.02 / HALF_PI * 2.0
        assert result.vector == pytest.approx([0.4, -0.2], abs=tol)

    def test_group_splitting_matches_global_mean(self):
        rng = np.random.default_rng(3)
        vecs = rng.uniform(-5, 5, size=(12, 3))
        cfg = qagg.AggregationConfig(n_clients=12, exact_expectation=True)
        result = qagg.aggregate(vecs, self.wide_bounds(3), cfg, NOISELESS)
        assert result.vector == pytest.approx(vecs.mean(axis=0), abs=1e-9)

    def test_clip_counting(self):
        cfg = qagg.AggregationConfig(n_clients=2, exact_expectation=True)
        result = qagg.aggregate([[20.0], [0.0]], [WeightBounds(-10, 10)], cfg, NOISELESS)
        assert result.clip_count == 1

    def test_rejects_mismatched_bounds(self):
        cfg = qagg.AggregationConfig(n_clients=2)
        with pytest.raises(ValueError):
            qagg.aggregate([[1.0, 2.0], [3.0, 4.0]], [WeightBounds(-1, 1)], cfg, NOISELESS)

    def test_seeded_determinism(self):
        cfg = qagg.AggregationConfig(shots=1000, n_clients=2)
        vecs = [[1.0, 2.0], [3.0, 4.0]]
        a = qagg.aggregate(vecs, self.wide_bounds(2), cfg, DEPOL, seed_key=(5,))
        b = qagg.aggregate(vecs, self.wide_bounds(2), cfg, DEPOL, seed_key=(5,))
        assert np.array_equal(a.vector, b.vector)


class TestReplicatedAggregate:
    def test_single_server_bit_identical(self):
        cfg = qagg.AggregationConfig(shots=1000, n_clients=2)
        vecs = [[1.0], [3.0]]
        bounds = [WeightBounds(-10, 10)]
        direct = qagg.aggregate(vecs, bounds, cfg, DEPOL, seed_key=(9,))
        replicated = qagg.replicated_aggregate(vecs, bounds, cfg, DEPOL, 1, seed_key=(9,))
        assert np.array_equal(direct.vector, replicated.vector)

    def test_median_robust_to_outlier(self):
        cfg = qagg.AggregationConfig(n_clients=2, exact_expectation=True)
        vecs = [[1.0], [3.0]]
        bounds = [WeightBounds(-10, 10)]
        result = qagg.replicated_aggregate(vecs, bounds, cfg, NOISELESS, 5, seed_key=(1,))
        per_server = np.array([result.vector[0]] * 5)
        per_server[0] += 1e3  # adversarial replacement
        assert np.median(per_server) == pytest.approx(result.vector[0])

    def test_variance_not_worse_than_single(self):
        cfg = qagg.AggregationConfig(shots=500, n_clients=3)
        vecs = [[0.5], [1.0], [1.5]]
        bounds = [WeightBounds(0, 2)]
        singles, triples = [], []
        for s in range(60):
            singles.append(qagg.aggregate(vecs, bounds, cfg, DEPOL, seed_key=(s, 0)).vector[0])
            triples.append(qagg.replicated_aggregate(vecs, bounds, cfg, DEPOL, 3, seed_key=(s, 1)).vector[0])
        assert np.var(triples) <= np.var(singles)

    def test_rejects_zero_servers(self):
        cfg = qagg.AggregationConfig(n_clients=1)
        with pytest.raises(ValueError):
            qagg.replicated_aggregate([[1.0]], [WeightBounds(0, 2)], cfg, NOISELESS, 0)


class TestVarianceBound:
    def test_direct_formula(self):
        cfg = qagg.AggregationConfig(shots=1024, n_clients=5, sigma_shot=0.5, sigma_gate=0.02)
        assert qagg.variance_bound(cfg, 5) == pytest.approx(0.25 / 5120 + 4e-4 * 5 / 5, abs=1e-12)

    def test_noiseless_limit(self):
        cfg = qagg.AggregationConfig(shots=10**9, n_clients=5, sigma_gate=0.0)
        assert qagg.variance_bound(cfg, 5) < 1e-9

    def test_doubling_shots_halves_shot_term(self):
        a = qagg.AggregationConfig(shots=1000, n_clients=4, sigma_gate=0.0)
        b = qagg.AggregationConfig(shots=2000, n_clients=4, sigma_gate=0.0)
        assert qagg.variance_bound(a, 4) == pytest.approx(2 * qagg.variance_bound(b, 4))


class TestEmpiricalVariance:
    def test_shot_scaling(self):
        plan = qagg.build_plan([0.3, 0.5, 0.7, 0.9, 1.1])
        rng = np.random.default_rng(10)
        v1 = qagg.empirical_variance(plan, DEPOL, 1000, 500, rng)
        v4 = qagg.empirical_variance(plan, DEPOL, 4000, 500, rng)
        assert 0.7 * 4 <= v1 / v4 <= 1.3 * 4

    def test_mitigated_variance_grows_with_depth(self):
        # the inverse transfer amplifies shot noise by 1/lam^d
        rng = np.random.default_rng(11)
        noise = NoiseModel(p_depol=0.05, gamma=0.03)
        variances = []
        for d in (1, 3, 5, 7, 9):
            plan = qagg.build_plan([0.6] * d)
            variances.append(qagg.empirical_mitigated_variance(plan, noise, 2000, 2000, rng))
        assert all(a < b for a, b in zip(variances, variances[1:]))

    def test_rejects_single_trial(self):
        with pytest.raises(ValueError):
            qagg.empirical_variance(qagg.build_plan([0.5]), DEPOL, 100, 1, np.random.default_rng(0))


class TestCommutationCheck:
    def test_dephasing_z_commutes(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            rho = random_density_matrix(1, rng)
            lhs, rhs, holds = qagg.commutation_check(dephasing_channel(0.3), Z_OBSERVABLE, rho)
            assert holds and abs(lhs - rhs) < 1e-10

    def test_depolarizing_z_violation(self):
        lhs, rhs, holds = qagg.commutation_check(depolarizing_channel(0.2), Z_OBSERVABLE, make_pure_state([1, 0]))
        assert not holds
        assert lhs == pytest.approx(1.0)
        assert rhs == pytest.approx(1 - 4 * 0.2 / 3, abs=1e-12)

    def test_identity_always_holds(self):
        rho = random_density_matrix(1, np.random.default_rng(13))
        _, _, holds = qagg.commutation_check(identity_channel(), Z_OBSERVABLE, rho)
        assert holds


class TestNoiseDeviation:
    def test_identity_channel(self):
        rho = random_density_matrix(1, np.random.default_rng(14))
        assert qagg.noise_deviation(rho, identity_channel()) == pytest.approx(0.0, abs=1e-12)

    def test_dephasing_on_plus(self):
        plus = make_pure_state([1 / math.sqrt(2), 1 / math.sqrt(2)])
        for p in (0.05, 0.2, 0.5):
            assert qagg.noise_deviation(plus, dephasing_channel(p)) == pytest.approx(p, abs=1e-12)

    def test_depolarizing_on_pure_states(self):
        rng = np.random.default_rng(15)
        prev = 0.0
        for p in (0.05, 0.1, 0.2, 0.4):
            rho = random_density_matrix(1, rng, pure=True)
            eps = qagg.noise_deviation(rho, depolarizing_channel(p))
            assert eps == pytest.approx(2 * p / 3, abs=1e-10)
            assert eps > prev  # monotone in p
            prev = eps


class TestFitSigmaGate:
    def test_bound_holds_after_fit(self):
        noise = NoiseModel(p_depol=0.05, gamma=0.03)
        sigma_gate = qagg.fit_sigma_gate(noise, np.random.default_rng(16), trials=150,
                                         shot_grid=(256, 4096), depths=(1, 5, 9))
        rng = np.random.default_rng(17)
        violations = 0
        for _ in range(100):
            n = int(rng.integers(1, 10))
            shots = int(rng.integers(256, 65537))
            plan = qagg.build_plan(rng.uniform(0.05, HALF_PI - 0.05, size=n))
            cfg = qagg.AggregationConfig(shots=shots, n_clients=n, sigma_gate=sigma_gate)
            if qagg.empirical_variance(plan, noise, shots, 150, rng) > qagg.variance_bound(cfg, plan.depth):
                violations += 1
        assert violations <= 5
