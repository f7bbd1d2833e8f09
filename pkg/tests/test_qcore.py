import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nrqfl.qcore import (
    DensityMatrix,
    KrausChannel,
    NoiseModel,
    Observable,
    PAULI_X,
    PAULI_Z,
    Z_OBSERVABLE,
    amplitude_damping_channel,
    apply_channel,
    apply_unitary,
    compose_channels,
    dephasing_channel,
    depolarizing_channel,
    expectation,
    identity_channel,
    make_pure_state,
    matrix_from_json,
    matrix_to_json,
    prob_one,
    random_density_matrix,
    ry,
    sample_measurement,
    trace_distance,
)

SQ2 = 1 / math.sqrt(2)


def plus_state():
    return make_pure_state([SQ2, SQ2])


class TestMakePureState:
    def test_basis_zero(self):
        rho = make_pure_state([1, 0])
        assert np.allclose(rho.matrix, [[1, 0], [0, 0]])

    def test_plus_projector(self):
        assert np.allclose(plus_state().matrix, [[0.5, 0.5], [0.5, 0.5]])

    def test_complex_amplitudes(self):
        # outer product by hand: diag (0.36, 0.64), off-diag 0.6 * (-0.8i)
        rho = make_pure_state([0.6, 0.8j])
        expected = np.outer([0.6, 0.8j], [0.6, -0.8j])
        assert np.allclose(rho.matrix, expected)
        assert np.allclose(np.diag(rho.matrix).real, [0.36, 0.64])

    def test_rejects_non_unit_norm(self):
        with pytest.raises(ValueError, match="unit norm"):
            make_pure_state([1, 1])

    def test_rejects_bad_length(self):
        with pytest.raises(ValueError, match="power of two"):
            make_pure_state([1, 0, 0])


class TestApplyUnitary:
    def test_bit_flip(self):
        out = apply_unitary(make_pure_state([1, 0]), PAULI_X, 0)
        assert np.allclose(out.matrix, [[0, 0], [0, 1]])

    def test_identity(self):
        rho = random_density_matrix(2, np.random.default_rng(0))
        out = apply_unitary(rho, np.eye(2), 1)
        assert np.allclose(out.matrix, rho.matrix)

    def test_ry_half_pi_makes_plus(self):
        # oracle: direct matrix product
        u = ry(math.pi / 2)
        out = apply_unitary(make_pure_state([1, 0]), u, 0)
        oracle = u @ np.array([[1, 0], [0, 0]], dtype=complex) @ u.conj().T
        assert np.allclose(out.matrix, oracle)
        assert np.allclose(out.matrix, plus_state().matrix, atol=1e-12)

    def test_rejects_non_unitary(self):
        with pytest.raises(ValueError, match="unitary"):
            apply_unitary(make_pure_state([1, 0]), [[1, 0], [0, 2]], 0)

    def test_rejects_bad_qubit(self):
        with pytest.raises(ValueError, match="out of range"):
            apply_unitary(make_pure_state([1, 0]), PAULI_X, 1)


class TestRy:
    def test_zero_is_identity(self):
        assert np.allclose(ry(0), np.eye(2))

    def test_pi(self):
        assert np.allclose(ry(math.pi), [[0, -1], [1, 0]], atol=1e-15)

    def test_half_pi_amplitudes(self):
        v = ry(math.pi / 2) @ np.array([1, 0])
        assert np.allclose(v, [SQ2, SQ2])

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            ry(float("nan"))


class TestChannels:
    def test_depolarizing_zero_is_identity(self):
        ch = depolarizing_channel(0.0)
        assert len(ch.operators) == 1

    def test_depolarizing_z_attenuation(self):
        # oracle: explicit Kraus sum of Eq.-style operators
        p = 0.05
        rho = make_pure_state([1, 0])
        out = apply_channel(rho, depolarizing_channel(p), 0)
        assert expectation(out, Z_OBSERVABLE) == pytest.approx(1 - 4 * p / 3, abs=1e-12)

    def test_depolarizing_fixed_point(self):
        mixed = DensityMatrix(1, np.eye(2) / 2)
        out = apply_channel(mixed, depolarizing_channel(0.7), 0)
        assert np.allclose(out.matrix, mixed.matrix)

    def test_dephasing_half_kills_coherence(self):
        out = apply_channel(plus_state(), dephasing_channel(0.5), 0)
        assert np.allclose(out.matrix, np.eye(2) / 2)

    def test_dephasing_diagonal_invariant(self):
        rho = DensityMatrix(1, np.diag([0.3, 0.7]).astype(complex))
        out = apply_channel(rho, dephasing_channel(0.4), 0)
        assert np.allclose(out.matrix, rho.matrix, atol=1e-14)

    def test_dephasing_off_diagonal_scaling(self):
        # Kraus-sum oracle: off-diagonals scale by 1 - 2p
        out = apply_channel(plus_state(), dephasing_channel(0.1), 0)
        assert out.matrix[0, 1].real == pytest.approx(0.4, abs=1e-12)

    def test_damping_total_decay(self):
        out = apply_channel(make_pure_state([0, 1]), amplitude_damping_channel(1.0), 0)
        assert np.allclose(out.matrix, [[1, 0], [0, 0]])

    def test_damping_population_transfer(self):
        out = apply_channel(make_pure_state([0, 1]), amplitude_damping_channel(0.03), 0)
        assert np.allclose(np.diag(out.matrix).real, [0.03, 0.97])

    @pytest.mark.parametrize("ctor", [depolarizing_channel, dephasing_channel, amplitude_damping_channel])
    def test_rejects_bad_probability(self, ctor):
        with pytest.raises(ValueError):
            ctor(1.5)

    @given(st.floats(min_value=0.0, max_value=1.0))
    def test_completeness_holds_everywhere(self, p):
        for ctor in (depolarizing_channel, dephasing_channel, amplitude_damping_channel):
            ch = ctor(p)
            total = sum(e.conj().T @ e for e in ch.operators)
            assert np.linalg.norm(total - np.eye(2)) < 1e-10

    def test_incomplete_kraus_rejected(self):
        with pytest.raises(ValueError, match="completeness"):
            KrausChannel((0.5 * PAULI_X,))


class TestApplyChannel:
    def test_identity_channel(self):
        rho = random_density_matrix(1, np.random.default_rng(1))
        out = apply_channel(rho, identity_channel(), 0)
        assert np.allclose(out.matrix, rho.matrix)

    def test_double_depolarizing_attenuation(self):
        # sequential oracle application: <Z> -> (1 - 4p/3)^2
        p = 0.12
        state = make_pure_state([1, 0])
        for _ in range(2):
            state = apply_channel(state, depolarizing_channel(p), 0)
        assert expectation(state, Z_OBSERVABLE) == pytest.approx((1 - 4 * p / 3) ** 2, abs=1e-12)

    def test_on_second_qubit_of_register(self):
        rho = make_pure_state([0, 1, 0, 0])  # |01>
        out = apply_channel(rho, amplitude_damping_channel(1.0), 1)
        assert np.allclose(out.matrix, make_pure_state([1, 0, 0, 0]).matrix)

    @given(st.floats(min_value=0.0, max_value=1.0), st.integers(min_value=0, max_value=10**6))
    @settings(max_examples=30)
    def test_trace_preserved(self, p, seed):
        rho = random_density_matrix(1, np.random.default_rng(seed))
        out = apply_channel(rho, depolarizing_channel(p), 0)
        assert abs(np.trace(out.matrix).real - 1) < 1e-10

    def test_compose_channels(self):
        rho = make_pure_state([1, 0])
        a, b = depolarizing_channel(0.1), depolarizing_channel(0.2)
        seq = apply_channel(apply_channel(rho, a, 0), b, 0)
        comp = apply_channel(rho, compose_channels(a, b), 0)
        assert np.allclose(seq.matrix, comp.matrix, atol=1e-12)


class TestExpectation:
    def test_z_on_zero(self):
        assert expectation(make_pure_state([1, 0]), Z_OBSERVABLE) == pytest.approx(1.0)

    def test_z_on_mixed(self):
        assert expectation(DensityMatrix(1, np.eye(2) / 2), Z_OBSERVABLE) == pytest.approx(0.0)

    def test_z_after_rotation(self):
        state = apply_unitary(make_pure_state([1, 0]), ry(2 * 0.3), 0)
        assert expectation(state, Z_OBSERVABLE) == pytest.approx(math.cos(0.6), abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            expectation(make_pure_state([1, 0, 0, 0]), Z_OBSERVABLE)


class TestTraceDistance:
    def test_self_distance(self):
        rho = random_density_matrix(2, np.random.default_rng(3))
        assert trace_distance(rho, rho) == pytest.approx(0.0, abs=1e-14)

    def test_orthogonal_pure_states(self):
        assert trace_distance(make_pure_state([1, 0]), make_pure_state([0, 1])) == pytest.approx(1.0)

    def test_dephased_plus(self):
        # eigensolve oracle: off-diagonal perturbation of size p has D = p
        p = 0.1
        out = apply_channel(plus_state(), dephasing_channel(p), 0)
        assert trace_distance(plus_state(), out) == pytest.approx(p, abs=1e-12)

    def test_matches_svd_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            a, b = random_density_matrix(2, rng), random_density_matrix(2, rng)
            oracle = 0.5 * np.sum(np.linalg.svd(a.matrix - b.matrix, compute_uv=False))
            assert trace_distance(a, b) == pytest.approx(oracle, abs=1e-10)


class TestSampleMeasurement:
    def test_deterministic_zero_state(self):
        zeros, ones = sample_measurement(make_pure_state([1, 0]), 0, 100, np.random.default_rng(0))
        assert (zeros, ones) == (100, 0)

    def test_mixed_state_frequency(self):
        rng = np.random.default_rng(5)
        mixed = DensityMatrix(1, np.eye(2) / 2)
        _, ones = sample_measurement(mixed, 0, 10**6, rng)
        assert abs(ones / 10**6 - 0.5) < 0.002  # binomial 3-sigma

    def test_readout_flip(self):
        rng = np.random.default_rng(6)
        _, ones = sample_measurement(make_pure_state([1, 0]), 0, 10**6, rng, readout_flip=0.1)
        assert abs(ones / 10**6 - 0.1) < 0.001

    def test_seed_determinism(self):
        state = plus_state()
        a = sample_measurement(state, 0, 1000, np.random.default_rng(42))
        b = sample_measurement(state, 0, 1000, np.random.default_rng(42))
        assert a == b

    def test_rejects_zero_shots(self):
        with pytest.raises(ValueError):
            sample_measurement(plus_state(), 0, 0, np.random.default_rng(0))


class TestInvariantsAndSerialization:
    def test_density_matrix_rejects_bad_trace(self):
        with pytest.raises(ValueError, match="trace"):
            DensityMatrix(1, np.eye(2))

    def test_density_matrix_rejects_non_hermitian(self):
        with pytest.raises(ValueError, match="Hermitian"):
            DensityMatrix(1, np.array([[0.5, 1], [0, 0.5]], dtype=complex))

    def test_observable_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            Observable([[0, 1], [0, 0]])

    def test_noise_model_range_check(self):
        with pytest.raises(ValueError):
            NoiseModel(p_depol=-0.1)

    def test_json_round_trip(self):
        m = random_density_matrix(2, np.random.default_rng(7)).matrix
        assert np.allclose(matrix_from_json(matrix_to_json(m)), m)
