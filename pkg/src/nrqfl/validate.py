"""Invariant suite behind `nrqfl validate`.

Each check returns a CheckResult; the CLI prints one pass/fail line per check
and exits non-zero if any fails. The suite covers channel CPTP properties,
the encoding round trip, the three aggregation theorems, mitigation efficacy,
and selection fairness, at sizes that keep the whole run around a minute.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import qagg, qselect
from .encode import decode_exact, encode
from .qcore import (
    KrausChannel,
    NoiseModel,
    Observable,
    PAULI_X,
    PAULI_Z,
    Z_OBSERVABLE,
    amplitude_damping_channel,
    apply_channel,
    dephasing_channel,
    depolarizing_channel,
    expectation,
    make_pure_state,
    prob_one,
    random_density_matrix,
    sample_measurement,
    trace_distance,
)

SUITE_VERSION = "1.0"

HALF_PI = math.pi / 2


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _channel_grid():
    ps = np.arange(0.0, 1.0001, 0.01)
    for p in ps:
        yield depolarizing_channel(float(p))
        yield dephasing_channel(float(p))
        yield amplitude_damping_channel(float(p))


def check_cptp_completeness() -> CheckResult:
    worst = 0.0
    for ch in _channel_grid():
        total = sum(e.conj().T @ e for e in ch.operators)
        worst = max(worst, float(np.linalg.norm(total - np.eye(2))))
    return CheckResult("cptp_completeness", worst < 1e-10, f"worst Frobenius residual {worst:.2e}")


def check_trace_preservation() -> CheckResult:
    rng = np.random.default_rng(11)
    channels = [depolarizing_channel(0.05), dephasing_channel(0.1), amplitude_damping_channel(0.03)]
    worst = 0.0
    for seed in range(100):
        rho = random_density_matrix(1, rng, pure=bool(seed % 2))
        for ch in channels:
            out = apply_channel(rho, ch, 0)
            worst = max(worst, abs(float(np.trace(out.matrix).real) - 1.0))
    return CheckResult("trace_preservation", worst < 1e-10, f"worst |tr-1| {worst:.2e}")


def check_psd_preservation() -> CheckResult:
    rng = np.random.default_rng(12)
    channels = [depolarizing_channel(0.3), dephasing_channel(0.3), amplitude_damping_channel(0.3)]
    worst = 0.0
    for seed in range(200):
        rho = random_density_matrix(1, rng, pure=bool(seed % 2))
        for ch in channels:
            out = apply_channel(rho, ch, 0)
            worst = min(worst, float(np.linalg.eigvalsh(out.matrix).min()))
    return CheckResult("psd_preservation", worst >= -1e-9, f"min eigenvalue {worst:.2e}")


def check_depolarizing_contraction() -> CheckResult:
    rng = np.random.default_rng(13)
    worst = 0.0
    for _ in range(30):
        p = float(rng.uniform(0, 0.5))
        rho = random_density_matrix(1, rng, pure=True)
        z0 = expectation(rho, Z_OBSERVABLE)
        ch = depolarizing_channel(p)
        state = rho
        for k in range(1, 5):
            state = apply_channel(state, ch, 0)
            expected = (1 - 4 * p / 3) ** k * z0
            worst = max(worst, abs(expectation(state, Z_OBSERVABLE) - expected))
    return CheckResult("depolarizing_contraction", worst < 1e-10, f"worst deviation {worst:.2e}")


def check_dephasing_fixed_points() -> CheckResult:
    rng = np.random.default_rng(14)
    worst = 0.0
    for _ in range(30):
        d = rng.uniform(0, 1)
        rho = make_pure_state([1.0, 0.0]).matrix * d + make_pure_state([0.0, 1.0]).matrix * (1 - d)
        from .qcore import DensityMatrix

        state = DensityMatrix(1, rho)
        out = apply_channel(state, dephasing_channel(float(rng.uniform(0, 1))), 0)
        worst = max(worst, float(np.max(np.abs(out.matrix - state.matrix))))
    return CheckResult("dephasing_fixed_points", worst < 1e-12, f"worst drift {worst:.2e}")


def check_sampling_consistency() -> CheckResult:
    rng = np.random.default_rng(15)
    failures, total = 0, 0
    for shots in (1000, 10000, 100000):
        for _ in range(200):
            angle = rng.uniform(0.1, HALF_PI - 0.1)
            state = encode(angle)
            p1 = prob_one(state, 0)
            _, ones = sample_measurement(state, 0, shots, rng)
            tol = 4 * math.sqrt(p1 * (1 - p1) / shots)
            total += 1
            if abs(ones / shots - p1) > tol:
                failures += 1
    rate = failures / total
    return CheckResult("sampling_consistency", rate <= 0.01, f"4-sigma miss rate {rate:.3f}")


def check_encode_roundtrip() -> CheckResult:
    grid = np.linspace(0.0, HALF_PI, 1000)
    worst = max(abs(decode_exact(encode(float(a))) - a) for a in grid)
    return CheckResult("encode_roundtrip", worst < 1e-12, f"worst |decode(encode(a)) - a| {worst:.2e}")


def check_theorem1_linearity(sets: int = 300) -> CheckResult:
    rng = np.random.default_rng(16)
    noiseless = NoiseModel()
    worst = 0.0
    for _ in range(sets):
        n = int(rng.integers(1, 10))
        angles = rng.uniform(0.0, HALF_PI, size=n)
        plan = qagg.build_plan(angles)
        est = qagg.run_plan(plan, noiseless, 1, None, exact=True)
        worst = max(worst, abs(est.raw_value - float(np.mean(angles))))
    return CheckResult("theorem1_linearity", worst < 1e-9, f"worst |estimate - mean| {worst:.2e}")


def check_theorem1_noise_bound() -> CheckResult:
    # analytic case: dephasing p on |+> has D(rho, E(rho)) = p
    worst = 0.0
    plus = make_pure_state([1 / math.sqrt(2), 1 / math.sqrt(2)])
    for p in (0.0, 0.05, 0.1, 0.3, 0.5):
        worst = max(worst, abs(qagg.noise_deviation(plus, dephasing_channel(p)) - p))
    # independent oracle: trace distance via singular values
    rng = np.random.default_rng(17)
    for _ in range(50):
        rho = random_density_matrix(1, rng, pure=bool(rng.integers(2)))
        ch = depolarizing_channel(float(rng.uniform(0, 0.5)))
        reported = qagg.noise_deviation(rho, ch)
        diff = rho.matrix - apply_channel(rho, ch, 0).matrix
        oracle = 0.5 * float(np.sum(np.linalg.svd(diff, compute_uv=False)))
        worst = max(worst, abs(reported - oracle))
    return CheckResult("theorem1_noise_bound", worst < 1e-9, f"worst deviation from oracle {worst:.2e}")


def check_theorem2_bound(configs: int = 300, trials: int = 200) -> CheckResult:
    rng = np.random.default_rng(18)
    noise = NoiseModel(p_depol=0.05, gamma=0.03)
    sigma_gate = qagg.fit_sigma_gate(noise, np.random.default_rng(19), trials=trials)
    violations = 0
    for _ in range(configs):
        n = int(rng.integers(1, 10))
        shots = int(rng.integers(256, 65537))
        angles = rng.uniform(0.05, HALF_PI - 0.05, size=n)
        plan = qagg.build_plan(angles)
        cfg = qagg.AggregationConfig(shots=shots, n_clients=n, sigma_shot=0.5, sigma_gate=sigma_gate)
        ev = qagg.empirical_variance(plan, noise, shots, trials, rng)
        if ev > qagg.variance_bound(cfg, plan.depth):
            violations += 1
    rate = violations / configs
    return CheckResult(
        "theorem2_bound_soundness", rate <= 0.05,
        f"violation rate {rate:.3f} (sigma_gate={sigma_gate:.4f})",
    )


def check_theorem3_commutation() -> CheckResult:
    rng = np.random.default_rng(20)
    worst_hold, worst_viol = 0.0, 0.0
    for _ in range(100):
        rho = random_density_matrix(1, rng, pure=bool(rng.integers(2)))
        p = float(rng.uniform(0.01, 0.99))
        lhs, rhs, holds = qagg.commutation_check(dephasing_channel(p), Z_OBSERVABLE, rho)
        worst_hold = max(worst_hold, abs(lhs - rhs))
        lhs, rhs, _ = qagg.commutation_check(depolarizing_channel(p), Z_OBSERVABLE, rho)
        worst_viol = max(worst_viol, abs(abs(lhs - rhs) - (4 * p / 3) * abs(lhs)))
    ok = worst_hold < 1e-10 and worst_viol < 1e-9
    return CheckResult("theorem3_commutation", ok, f"dephasing residual {worst_hold:.2e}, depolarizing law residual {worst_viol:.2e}")


def check_mitigation_efficacy() -> CheckResult:
    rng = np.random.default_rng(21)
    noise = NoiseModel(p_depol=0.05)
    worst_mit, raw_always_worse = 0.0, True
    for _ in range(50):
        n = int(rng.integers(2, 10))
        mean = rng.uniform(0.2, 1.2)
        angles = np.clip(mean + rng.uniform(-0.1, 0.1, size=n), 0.0, HALF_PI)
        plan = qagg.build_plan(angles)
        true_mean = float(np.mean(angles))
        est = qagg.run_plan(plan, noise, 1, None, exact=True)
        z_mit = qagg.mitigate_channel_inversion(est.z_raw, noise, plan.depth)
        mitigated = math.asin(math.sqrt((1 - z_mit) / 2))
        worst_mit = max(worst_mit, abs(mitigated - true_mean))
        if abs(est.raw_value - true_mean) <= abs(mitigated - true_mean):
            raw_always_worse = False
    ok = worst_mit < 1e-6 and raw_always_worse
    return CheckResult("mitigation_efficacy", ok, f"worst mitigated error {worst_mit:.2e}")


def check_selection_fairness(seeds: int = 20, rounds: int = 2000) -> CheckResult:
    noise = NoiseModel(p_depol=0.05, gamma=0.03)
    threshold = stats.chi2.ppf(0.99, df=4)
    ok_count = 0
    for seed in range(seeds):
        source = qselect.EntropySource(noise, seed=[seed, 99])
        history = [qselect.select_clients(5, 3, source, t) for t in range(rounds)]
        chi, _ = qselect.fairness_report(history, 5)
        if chi < threshold:
            ok_count += 1
    frac = ok_count / seeds
    return CheckResult("selection_fairness", frac >= 0.9, f"{ok_count}/{seeds} seeds below 99th percentile")


def check_extractor_bias() -> CheckResult:
    rng = np.random.default_rng(7)
    raw = (rng.random(1_000_000) < 0.55).astype(np.uint8)
    out = qselect.von_neumann_extract(raw)
    bias = abs(float(out.mean()) - 0.5)
    return CheckResult("extractor_bias", bias < 1e-3, f"output bias {bias:.2e} from {len(out)} bits")


def check_broken_channel_rejected() -> CheckResult:
    # negative control: run the completeness check on a non-complete Kraus set;
    # it must fail (and the constructor must refuse it), driving exit code 1
    broken = (0.5 * PAULI_X,)
    residual = float(np.linalg.norm(sum(e.conj().T @ e for e in broken) - np.eye(2)))
    constructor_rejects = False
    try:
        KrausChannel(broken, label="broken")
    except ValueError:
        constructor_rejects = True
    detail = f"injected Kraus set: completeness residual {residual:.2e}, constructor rejects: {constructor_rejects}"
    return CheckResult("injected_broken_channel_cptp", residual < 1e-10 and not constructor_rejects, detail)


ALL_CHECKS = (
    check_cptp_completeness,
    check_trace_preservation,
    check_psd_preservation,
    check_depolarizing_contraction,
    check_dephasing_fixed_points,
    check_sampling_consistency,
    check_encode_roundtrip,
    check_theorem1_linearity,
    check_theorem1_noise_bound,
    check_theorem2_bound,
    check_theorem3_commutation,
    check_mitigation_efficacy,
    check_selection_fairness,
    check_extractor_bias,
)


def run_suite(inject_broken_channel: bool = False) -> list:
    results = [check() for check in ALL_CHECKS]
    if inject_broken_channel:
        results.append(check_broken_channel_rejected())
    return results
