"""Quantum aggregation: circuit planning, noisy execution, and mitigation.

Client angles are fused on a single qubit by composing Ry(2*a_k/N) rotations;
about a common axis these add, so the noiseless circuit prepares exactly the
state encoding mean(a). One noise-channel pass per gate defines the circuit
depth d used by the variance bound. More than 9 clients are split into groups
of <= 9 (depth stays below 10) whose results are combined by a size-weighted
classical mean.

Mitigation layers, selected by flags in AggregationConfig:
  - measurement_averaging: average <Z> over `repeats` independent executions
  - channel_inversion:     divide <Z> by (1 - 4p/3)^d (depolarizing, analytic)
  - calibration:           fitted linear transfer noisy_z = lam * ideal_z + b;
                           subsumes channel inversion when both flags are set
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field

import numpy as np

from .encode import (
    HALF_PI,
    WeightBounds,
    angle_to_z,
    decode_shots,
    denormalize,
    normalize,
    z_to_angle,
)
from .qcore import (
    DensityMatrix,
    KrausChannel,
    NoiseModel,
    Observable,
    apply_channel,
    apply_unitary,
    expectation,
    make_pure_state,
    prob_one,
    ry,
    sample_measurement,
    trace_distance,
)

MAX_GROUP = 9  # keeps circuit depth under 10
MITIGATION_FLAGS = frozenset({"measurement_averaging", "channel_inversion", "calibration"})
INVERSION_FLOOR = 1e-6


@dataclass(frozen=True)
class AggregationConfig:
    """Knobs for one quantum aggregation call."""

    shots: int = 4096
    n_clients: int = 5
    repeats: int = 1
    mitigation: frozenset = frozenset()
    sigma_shot: float = 0.5
    sigma_gate: float = 0.0
    max_qubits_per_batch: int = 1
    exact_expectation: bool = False

    def __post_init__(self):
        if self.shots < 1:
            raise ValueError("shots must be >= 1")
        if self.n_clients < 1:
            raise ValueError("n_clients must be >= 1")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if not 1 <= self.max_qubits_per_batch <= 6:
            raise ValueError("max_qubits_per_batch must be in 1..6")
        unknown = set(self.mitigation) - MITIGATION_FLAGS
        if unknown:
            raise ValueError(f"unknown mitigation flags: {sorted(unknown)}")
        object.__setattr__(self, "mitigation", frozenset(self.mitigation))


@dataclass(frozen=True)
class CircuitPlan:
    """Ordered single-qubit Ry gate angles with a noise pass after each gate."""

    gates: tuple
    depth: int

    def __post_init__(self):
        if self.depth != len(self.gates):
            raise ValueError("depth must equal the gate count")
        if not 1 <= self.depth < 10:
            raise ValueError(f"circuit depth must be in 1..9, got {self.depth}")


@dataclass(frozen=True)
class TransferFunction:
    """Fitted linear map of ideal <Z> to noisy <Z>."""

    lam_hat: float
    b_hat: float

    def __post_init__(self):
        if self.lam_hat <= 0.0:
            raise ValueError("fitted attenuation must be positive")

    def invert(self, noisy_z: float) -> float:
        return min(max((noisy_z - self.b_hat) / self.lam_hat, -1.0), 1.0)


@dataclass(frozen=True)
class AggregateEstimate:
    """Single-circuit estimate in angle units."""

    value: float
    raw_value: float
    z_raw: float
    variance_estimate: float


@dataclass(frozen=True)
class AggregateResult:
    """Output of a full vector aggregation."""

    vector: np.ndarray
    clip_count: int


def build_plan(angles, n_clients: int | None = None) -> CircuitPlan:
    """Sequential Ry(2*a_k/N) gates whose noiseless product encodes mean(a)."""
    angles = tuple(float(a) for a in angles)
    n = len(angles) if n_clients is None else n_clients
    if n != len(angles):
        raise ValueError(f"expected {n} angles, got {len(angles)}")
    if n == 0:
        raise ValueError("cannot aggregate an empty client set")
    if n > MAX_GROUP:
        raise ValueError(f"more than {MAX_GROUP} clients per circuit violates the depth bound; split into groups")
    for a in angles:
        if not 0.0 <= a <= HALF_PI + 1e-12:
            raise ValueError(f"angle {a} outside [0, pi/2]")
    return CircuitPlan(tuple(2.0 * a / n for a in angles), depth=n)


def simulate_plan(plan: CircuitPlan, noise: NoiseModel) -> DensityMatrix:
    """Deterministic pre-measurement state: alternate gates and noise passes."""
    state = make_pure_state([1.0, 0.0])
    channels = noise.gate_channels()
    for theta in plan.gates:
        state = apply_unitary(state, ry(theta), 0)
        for ch in channels:
            state = apply_channel(state, ch, 0)
    return state


def _effective_p1(state: DensityMatrix, noise: NoiseModel) -> float:
    p1 = prob_one(state, 0)
    f = noise.readout_flip
    return p1 * (1 - f) + (1 - p1) * f


def run_plan(
    plan: CircuitPlan,
    noise: NoiseModel,
    shots: int,
    rng: np.random.Generator | None,
    exact: bool = False,
) -> AggregateEstimate:
    """Execute the plan and decode the raw (pre-mitigation) angle estimate.

    With exact=True the infinite-shot expectation is used instead of sampling.
    """
    state = simulate_plan(plan, noise)
    if exact:
        p1 = _effective_p1(state, noise)
        var = 0.0
    else:
        if rng is None:
            raise ValueError("sampled execution needs an RNG stream")
        zeros, ones = sample_measurement(state, 0, shots, rng, noise.readout_flip)
        p1 = ones / shots
        # delta-method shot variance of arcsin(sqrt(p)) is ~1/(4S), p-independent
        var = 1.0 / (4.0 * shots)
    angle = math.asin(math.sqrt(min(max(p1, 0.0), 1.0)))
    return AggregateEstimate(value=angle, raw_value=angle, z_raw=1.0 - 2.0 * p1, variance_estimate=var)


def mitigate_channel_inversion(raw_z: float, noise: NoiseModel, depth: int) -> float:
    """Undo depolarizing attenuation: z -> z / (1 - 4p/3)^d, clamped to [-1, 1]."""
    if depth < 0:
        raise ValueError("depth must be >= 0")
    lam = 1.0 - 4.0 * noise.p_depol / 3.0
    lam_d = lam ** depth
    if lam_d < INVERSION_FLOOR:
        raise ValueError(f"attenuation {lam_d:.3g} below {INVERSION_FLOOR}; depth/noise out of mitigable range")
    return min(max(raw_z / lam_d, -1.0), 1.0)


DEFAULT_PROBES = (0.15, 0.35, 0.55, 0.75, 0.95, 1.15, 1.35)


def calibrate(
    noise: NoiseModel,
    depth: int,
    probe_angles=DEFAULT_PROBES,
    shots: int = 4096,
    rng: np.random.Generator | None = None,
    exact: bool = True,
) -> TransferFunction:
    """Least-squares fit of noisy <Z> against ideal <Z> from known probe angles.

    Each probe runs an aggregation plan with all clients at the same angle, so
    the ideal expectation is cos(2a). The fit absorbs depolarizing attenuation,
    amplitude-damping offset, and readout bias in one linear map.
    """
    probes = tuple(float(a) for a in probe_angles)
    if len(set(probes)) < 2:
        raise ValueError("need at least two distinct probe angles")
    ideal, noisy = [], []
    for a in probes:
        plan = build_plan([a] * depth)
        est = run_plan(plan, noise, shots, rng, exact=exact)
        ideal.append(angle_to_z(a))
        noisy.append(est.z_raw)
    lam_hat, b_hat = np.polyfit(ideal, noisy, 1)
    return TransferFunction(float(lam_hat), float(b_hat))


def _split_groups(n: int) -> list:
    """Client index groups of size <= MAX_GROUP, as even as possible."""
    n_groups = math.ceil(n / MAX_GROUP)
    return [list(chunk) for chunk in np.array_split(np.arange(n), n_groups)]


def _rng_for(seed_key, *suffix) -> np.random.Generator:
    key = tuple(int(k) for k in tuple(seed_key) + suffix)
    return np.random.default_rng(np.random.SeedSequence(key))


def _estimate_group_z(plan, cfg, noise, seed_key, param_idx, group_idx):
    repeats = cfg.repeats if "measurement_averaging" in cfg.mitigation else 1
    if cfg.exact_expectation:
        return run_plan(plan, noise, cfg.shots, None, exact=True).z_raw
    zs = [
        run_plan(plan, noise, cfg.shots, _rng_for(seed_key, param_idx, group_idx, r)).z_raw
        for r in range(repeats)
    ]
    return float(np.mean(zs))


def _mitigate_z(z: float, cfg, noise, depth: int, transfer: TransferFunction | None) -> float:
    if "calibration" in cfg.mitigation:
        tf = transfer if transfer is not None else calibrate(noise, depth)
        return tf.invert(z)
    if "channel_inversion" in cfg.mitigation:
        return mitigate_channel_inversion(z, noise, depth)
    return min(max(z, -1.0), 1.0)


def aggregate(
    client_vectors,
    bounds,
    cfg: AggregationConfig,
    noise: NoiseModel,
    seed_key=(0,),
    transfer: TransferFunction | None = None,
) -> AggregateResult:
    """Quantum-aggregate N client parameter vectors into their (uniform) mean.

    Per parameter: normalize -> build plan -> run (with repeats) -> mitigate
    -> decode -> denormalize. Groups of more than 9 clients are combined by a
    size-weighted classical mean. RNG streams are keyed by
    (seed_key, parameter, group, repeat), so results are independent of
    execution order.
    """
    vectors = np.asarray(client_vectors, dtype=float)
    if vectors.ndim != 2:
        raise ValueError("client_vectors must be an N x P array")
    n, p = vectors.shape
    if n == 0:
        raise ValueError("empty client set")
    if len(bounds) != p:
        raise ValueError(f"need {p} per-parameter bounds, got {len(bounds)}")

    groups = _split_groups(n)
    transfers = {}
    if "calibration" in cfg.mitigation:
        for g in groups:
            d = len(g)
            if d not in transfers:
                transfers[d] = transfer if transfer is not None else calibrate(noise, d)

    out = np.empty(p)
    clip_count = 0
    for j in range(p):
        b = bounds[j]
        values = vectors[:, j]
        clip_count += int(np.sum((values < b.lo) | (values > b.hi)))
        angles = np.array([normalize(v, b) for v in values])
        group_angles = []
        group_sizes = []
        for g_idx, g in enumerate(groups):
            plan = build_plan(angles[g])
            z = _estimate_group_z(plan, cfg, noise, seed_key, j, g_idx)
            z = _mitigate_z(z, cfg, noise, plan.depth, transfers.get(plan.depth, transfer))
            group_angles.append(z_to_angle(z))
            group_sizes.append(len(g))
        mean_angle = float(np.average(group_angles, weights=group_sizes))
        out[j] = denormalize(mean_angle, b)
    return AggregateResult(vector=out, clip_count=clip_count)


def replicated_aggregate(
    client_vectors,
    bounds,
    cfg: AggregationConfig,
    noise: NoiseModel,
    n_servers: int,
    seed_key=(0,),
    transfer: TransferFunction | None = None,
) -> AggregateResult:
    """Run `aggregate` on n_servers independent streams; coordinate-wise median."""
    if n_servers < 1:
        raise ValueError("n_servers must be >= 1")
    if n_servers == 1:
        return aggregate(client_vectors, bounds, cfg, noise, seed_key, transfer)
    results = [
        aggregate(client_vectors, bounds, cfg, noise, tuple(seed_key) + (s,), transfer)
        for s in range(n_servers)
    ]
    stacked = np.stack([r.vector for r in results])
    return AggregateResult(vector=np.median(stacked, axis=0), clip_count=results[0].clip_count)


def variance_bound(cfg: AggregationConfig, depth: int) -> float:
    """sigma_shot^2/(N*S) + sigma_gate^2 * d / N."""
    return cfg.sigma_shot**2 / (cfg.n_clients * cfg.shots) + cfg.sigma_gate**2 * depth / cfg.n_clients


def empirical_variance(
    plan: CircuitPlan,
    noise: NoiseModel,
    shots: int,
    trials: int,
    rng: np.random.Generator,
) -> float:
    """Sample variance of the raw decoded angle over independent executions.

    The pre-measurement state is deterministic, so only measurement sampling
    is repeated (vectorized over trials).
    """
    if trials < 2:
        raise ValueError("need at least two trials")
    state = simulate_plan(plan, noise)
    p_eff = _effective_p1(state, noise)
    ones = rng.binomial(shots, p_eff, size=trials)
    angles = np.arcsin(np.sqrt(ones / shots))
    return float(np.var(angles, ddof=1))


def empirical_mitigated_variance(
    plan: CircuitPlan,
    noise: NoiseModel,
    shots: int,
    trials: int,
    rng: np.random.Generator,
    transfer: TransferFunction | None = None,
) -> float:
    """Sample variance of the calibrated estimate; grows with depth because the
    inverse transfer amplifies shot noise by 1/lam_hat."""
    if trials < 2:
        raise ValueError("need at least two trials")
    tf = transfer if transfer is not None else calibrate(noise, plan.depth)
    state = simulate_plan(plan, noise)
    p_eff = _effective_p1(state, noise)
    ones = rng.binomial(shots, p_eff, size=trials)
    zs = 1.0 - 2.0 * ones / shots
    angles = [z_to_angle(tf.invert(z)) for z in zs]
    return float(np.var(angles, ddof=1))


def fit_sigma_gate(
    noise: NoiseModel,
    rng: np.random.Generator,
    shot_grid=(256, 1024, 4096, 16384, 65536),
    depths=range(1, MAX_GROUP + 1),
    trials: int = 300,
    sigma_shot: float = 0.5,
    safety: float = 1.4,
) -> float:
    """Calibrate sigma_gate once so the variance bound holds on a sweep.

    The bound is treated as a falsifiable contract: sigma_gate^2 is set to the
    largest excess of empirical variance over the shot term across the grid,
    times a safety factor.
    """
    worst = 0.0
    for d in depths:
        for s in shot_grid:
            angles = rng.uniform(0.05, HALF_PI - 0.05, size=d)
            plan = build_plan(angles)
            ev = empirical_variance(plan, noise, s, trials, rng)
            # single-group plans have N = d, so the gate term of the bound is
            # sigma_gate^2 exactly; the excess over the shot term calibrates it
            worst = max(worst, ev - sigma_shot**2 / (d * s))
    return math.sqrt(safety * worst) if worst > 0 else 0.0


def commutation_check(channel: KrausChannel, m: Observable, state: DensityMatrix):
    """Theorem-3 style test: Tr(M rho) vs Tr(M E(rho))."""
    lhs = expectation(state, m)
    rhs = expectation(apply_channel(state, channel, 0), m)
    return lhs, rhs, abs(lhs - rhs) < 1e-10


def noise_deviation(state: DensityMatrix, channel: KrausChannel) -> float:
    """Trace distance D(rho, E(rho)): the empirical per-round noise epsilon."""
    return trace_distance(state, apply_channel(state, channel, 0))
