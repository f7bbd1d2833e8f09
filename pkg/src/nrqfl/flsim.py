"""Federated learning harness: FedAvg, QFL, and NR-QFL on synthetic workloads.

The workload is multinomial logistic regression on Gaussian-mixture features
with Dirichlet label skew, trained with full-batch gradient descent so that
every inter-strategy difference is attributable to the aggregation step.
Strategies:
  fedavg  classical size-weighted mean, no quantum path
  qfl     quantum aggregation, mitigation off, static weight bounds
  nrqfl   quantum aggregation with mitigation on and adaptive per-round
          per-parameter bounds (the accounted metadata overhead)
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import qagg, qselect
from .config import ExperimentConfig
from .encode import WeightBounds, bounds_from_values, normalize
from .qcore import NoiseModel, compose_channels, identity_channel
from .encode import encode

STRATEGIES = ("fedavg", "qfl", "nrqfl")


@dataclass
class DataPartition:
    """Disjoint per-client datasets plus a globally held-out test set."""

    client_features: list
    client_labels: list
    test_features: np.ndarray
    test_labels: np.ndarray
    classes: int
    skew: float

    def __post_init__(self):
        if any(len(x) == 0 for x in self.client_features):
            raise ValueError("every client must have at least one sample")

    @property
    def n_clients(self) -> int:
        return len(self.client_features)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([len(y) for y in self.client_labels])


@dataclass(frozen=True)
class RoundRecord:
    """Per-round metrics; the CSV schema uses the first nine fields."""

    round: int
    strategy: str
    accuracy: float
    f1: float
    grad_variance: float
    bytes_up: int
    bytes_down: int
    selected: tuple
    wall_ms: int
    epsilon: float = 0.0       # D(rho, E(rho)) of the round's mean encoded state
    mean_angle: float = 0.0    # angle behind epsilon, kept for auditability
    agg_error: float = 0.0     # mean |aggregate - classical mean| per parameter
    clip_count: int = 0


def _class_means(classes: int, feature_dim: int, class_sep: float) -> np.ndarray:
    """Fixed, seed-independent layout: class means evenly spaced on a circle."""
    means = np.zeros((classes, feature_dim))
    for c in range(classes):
        phi = 2 * np.pi * c / classes
        means[c, 0] = class_sep * np.cos(phi)
        means[c, 1 % feature_dim] = class_sep * np.sin(phi)
    return means


def make_partition(
    n_clients: int,
    classes: int,
    samples_per_client: int,
    skew: float,
    seed: int,
    feature_dim: int = 4,
    class_sep: float = 2.0,
    test_samples: int = 600,
) -> DataPartition:
    """Dirichlet-skewed label allocation over Gaussian-mixture features.

    alpha = (1-skew)*10 + skew*0.1, so skew=0 is near-IID and skew=1 gives
    strongly concentrated per-client label distributions.
    """
    if n_clients < 2 or classes < 2:
        raise ValueError("need at least 2 clients and 2 classes")
    if not 2 <= feature_dim <= 8:
        raise ValueError("feature_dim must be in 2..8")
    if samples_per_client < 1 or test_samples < 1:
        raise ValueError("sample counts must be >= 1")
    if not 0.0 <= skew <= 1.0:
        raise ValueError("skew must be in [0, 1]")
    rng = np.random.default_rng(seed)
    means = _class_means(classes, feature_dim, class_sep)
    alpha = (1.0 - skew) * 10.0 + skew * 0.1

    client_x, client_y = [], []
    for _ in range(n_clients):
        props = rng.dirichlet(np.full(classes, alpha))
        counts = rng.multinomial(samples_per_client, props)
        labels = np.repeat(np.arange(classes), counts)
        feats = means[labels] + rng.normal(size=(samples_per_client, feature_dim))
        client_x.append(feats)
        client_y.append(labels)

    test_y = rng.integers(0, classes, size=test_samples)
    test_x = means[test_y] + rng.normal(size=(test_samples, feature_dim))
    return DataPartition(client_x, client_y, test_x, test_y, classes, skew)


def _unpack(weights: np.ndarray, feature_dim: int, classes: int) -> np.ndarray:
    return weights.reshape(feature_dim + 1, classes)


def _logits(w2d: np.ndarray, x: np.ndarray) -> np.ndarray:
    return x @ w2d[:-1] + w2d[-1]


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_grad(weights: np.ndarray, x: np.ndarray, y: np.ndarray, classes: int):
    """Mean softmax cross-entropy and its gradient w.r.t. the flat weights."""
    n, f = x.shape
    w2d = _unpack(weights, f, classes)
    probs = _softmax(_logits(w2d, x))
    loss = float(-np.mean(np.log(probs[np.arange(n), y] + 1e-300)))
    delta = probs
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grad = np.vstack([x.T @ delta, delta.sum(axis=0)])
    return loss, grad.ravel()


def local_train(weights: np.ndarray, x: np.ndarray, y: np.ndarray, classes: int, epochs: int, lr: float) -> np.ndarray:
    """Full-batch gradient descent from the global weights; returns new weights."""
    w = np.array(weights, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):  # divergence is surfaced below
        for _ in range(epochs):
            loss, grad = loss_and_grad(w, x, y, classes)
            if not np.isfinite(loss):
                raise ValueError(f"training loss diverged (loss={loss}); reduce the learning rate")
            w -= lr * grad
            if not np.all(np.isfinite(w)):
                raise ValueError("training weights diverged; reduce the learning rate")
    return w


def fedavg_aggregate(vectors, sizes) -> np.ndarray:
    """Size-weighted arithmetic mean of client weight vectors."""
    vectors = np.asarray(vectors, dtype=float)
    sizes = np.asarray(sizes, dtype=float)
    if vectors.ndim != 2 or len(sizes) != vectors.shape[0]:
        raise ValueError("need one size per client vector")
    return np.average(vectors, axis=0, weights=sizes)


def evaluate(weights: np.ndarray, x: np.ndarray, y: np.ndarray, classes: int):
    """(accuracy, macro F1) of argmax-softmax predictions."""
    if len(x) == 0:
        raise ValueError("empty test set")
    w2d = _unpack(np.asarray(weights, dtype=float), x.shape[1], classes)
    pred = np.argmax(_logits(w2d, x), axis=1)
    acc = float(np.mean(pred == y))
    f1s = []
    for c in range(classes):
        tp = np.sum((pred == c) & (y == c))
        fp = np.sum((pred == c) & (y != c))
        fn = np.sum((pred != c) & (y == c))
        f1s.append(0.0 if tp == 0 else 2 * tp / (2 * tp + fp + fn))
    return acc, float(np.mean(f1s))


def _grad_variance(updates: np.ndarray) -> float:
    return float(np.mean((updates - updates.mean(axis=0)) ** 2))


def _round_epsilon(noise: NoiseModel, updates: np.ndarray, bounds) -> tuple:
    """Noise deviation of the round's mean encoded state under one gate-noise pass."""
    channels = noise.gate_channels()
    channel = identity_channel()
    for ch in channels:
        channel = compose_channels(channel, ch)
    angles = [normalize(float(v), b) for v, b in zip(updates.mean(axis=0), bounds)]
    mean_angle = float(np.mean(angles))
    eps = qagg.noise_deviation(encode(mean_angle), channel)
    return eps, mean_angle


def _aggregation_config(cfg: ExperimentConfig, strategy: str, n_selected: int) -> qagg.AggregationConfig:
    mitigation = frozenset(cfg.mitigation) if strategy == "nrqfl" else frozenset()
    repeats = cfg.repeats if strategy == "nrqfl" else 1
    return qagg.AggregationConfig(
        shots=cfg.shots,
        n_clients=n_selected,
        repeats=repeats,
        mitigation=mitigation,
        exact_expectation=cfg.exact_expectation,
    )


def run_round(
    strategy: str,
    round_index: int,
    weights: np.ndarray,
    partition: DataPartition,
    cfg: ExperimentConfig,
    entropy: qselect.EntropySource,
) -> tuple:
    """One Algorithm-1 round; returns (new_weights, RoundRecord)."""
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    t0 = time.perf_counter()
    p = len(weights)
    m = cfg.selection_m if cfg.selection_m is not None else partition.n_clients
    sv = qselect.select_clients(partition.n_clients, m, entropy, round_index)
    selected = sv.selected

    updates = np.stack(
        [
            local_train(weights, partition.client_features[i], partition.client_labels[i],
                        partition.classes, cfg.local_epochs, cfg.lr)
            for i in selected
        ]
    )
    sizes = np.array([len(partition.client_labels[i]) for i in selected])
    classical_mean = fedavg_aggregate(updates, sizes)

    epsilon, mean_angle, clip_count = 0.0, 0.0, 0
    if strategy == "fedavg":
        new_weights = classical_mean
    else:
        if strategy == "qfl":
            b = cfg.fixed_weight_bound
            bounds = [WeightBounds(-b, b)] * p
        else:
            bounds = [bounds_from_values(updates[:, j]) for j in range(p)]
        acfg = _aggregation_config(cfg, strategy, len(selected))
        result = qagg.replicated_aggregate(
            updates, bounds, acfg, cfg.noise, cfg.n_servers,
            seed_key=(cfg.seed, STRATEGIES.index(strategy), round_index),
        )
        new_weights = result.vector
        clip_count = result.clip_count
        epsilon, mean_angle = _round_epsilon(cfg.noise, updates, bounds)

    acc, f1 = evaluate(new_weights, partition.test_features, partition.test_labels, partition.classes)
    bytes_up = 8 * p * len(selected)
    if strategy == "nrqfl":
        bytes_up += 8 * p  # float32 (lo, hi) bounds metadata, once per round
    bytes_down = 8 * p * partition.n_clients
    wall_ms = int((time.perf_counter() - t0) * 1000) if cfg.record_timing else 0

    record = RoundRecord(
        round=round_index,
        strategy=strategy,
        accuracy=acc,
        f1=f1,
        grad_variance=_grad_variance(updates),
        bytes_up=bytes_up,
        bytes_down=bytes_down,
        selected=selected,
        wall_ms=wall_ms,
        epsilon=epsilon,
        mean_angle=mean_angle,
        agg_error=float(np.mean(np.abs(new_weights - classical_mean))),
        clip_count=clip_count,
    )
    return new_weights, record


def run_experiment(cfg: ExperimentConfig, strategy: str) -> list:
    """T rounds of `run_round`; deterministic per (seed, strategy)."""
    partition = make_partition(
        cfg.n_clients, cfg.classes, cfg.samples_per_client, cfg.skew, cfg.seed,
        feature_dim=cfg.feature_dim, class_sep=cfg.class_sep, test_samples=cfg.test_samples,
    )
    p = (cfg.feature_dim + 1) * cfg.classes
    weights = np.zeros(p)
    entropy = qselect.EntropySource(cfg.noise, seed=[cfg.seed, STRATEGIES.index(strategy), 0xE17])
    evaluate(weights, partition.test_features, partition.test_labels, partition.classes)
    records = []
    for t in range(1, cfg.rounds + 1):
        weights, record = run_round(strategy, t, weights, partition, cfg, entropy)
        records.append(record)
    return records
