"""Client selection driven by simulated quantum entropy.

Raw bits come from measuring H|0> (realized as Ry(pi/2)|0>, which has the same
measurement statistics) under the configured noise model. Noise biases the raw
bits, so a von Neumann extractor unbiases them before use; client subsets are
then drawn by rejection sampling on ceil(log2(n))-bit indices, which avoids
modulo bias.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .qcore import NoiseModel, apply_channel, apply_unitary, make_pure_state, prob_one, ry


@dataclass(frozen=True)
class SelectionVector:
    """One round's selected client subset and the entropy spent choosing it."""

    round: int
    selected: tuple
    entropy_bits_consumed: int

    def __post_init__(self):
        if len(set(self.selected)) != len(self.selected):
            raise ValueError("selected clients must be unique")
        object.__setattr__(self, "selected", tuple(sorted(int(c) for c in self.selected)))


def _bit_probability(noise: NoiseModel) -> float:
    """P(measure 1) of the noisy entropy circuit; shared by every bit."""
    state = apply_unitary(make_pure_state([1.0, 0.0]), ry(math.pi / 2), 0)
    for ch in noise.gate_channels():
        state = apply_channel(state, ch, 0)
    p1 = prob_one(state, 0)
    f = noise.readout_flip
    return p1 * (1 - f) + (1 - p1) * f


def quantum_random_bits(k: int, noise: NoiseModel, rng: np.random.Generator) -> np.ndarray:
    """k single-shot measurements of the noisy H|0> circuit.

    All k circuits prepare the same state, so sampling vectorizes into one
    Bernoulli draw per bit.
    """
    if k < 1:
        raise ValueError("need k >= 1 bits")
    p = _bit_probability(noise)
    return (rng.random(k) < p).astype(np.uint8)


def von_neumann_extract(bits: np.ndarray) -> np.ndarray:
    """Unbias by pairing: keep the first bit of each 01/10 pair, drop 00/11."""
    bits = np.asarray(bits, dtype=np.uint8)
    n = len(bits) - len(bits) % 2
    a, b = bits[:n:2], bits[1:n:2]
    return a[a != b]


class EntropySource:
    """Buffered stream of (optionally unbiased) quantum-entropy bits."""

    def __init__(self, noise: NoiseModel, seed, unbias: bool = True, chunk: int = 1 << 16):
        self.noise = noise
        self.unbias = unbias
        self.chunk = chunk
        self._rng = np.random.default_rng(seed)
        self._buffer = np.empty(0, dtype=np.uint8)
        self.bits_consumed = 0

    def _refill(self, need: int) -> None:
        while len(self._buffer) < need:
            raw = quantum_random_bits(self.chunk, self.noise, self._rng)
            fresh = von_neumann_extract(raw) if self.unbias else raw
            self._buffer = np.concatenate([self._buffer, fresh])

    def take(self, k: int) -> np.ndarray:
        self._refill(k)
        out, self._buffer = self._buffer[:k], self._buffer[k:]
        self.bits_consumed += k
        return out


class FixedBits:
    """Replayable bit source for deterministic tests."""

    def __init__(self, bits):
        self._bits = np.asarray(bits, dtype=np.uint8)
        self._pos = 0
        self.bits_consumed = 0

    def take(self, k: int) -> np.ndarray:
        if self._pos + k > len(self._bits):
            raise ValueError("fixed bit source exhausted")
        out = self._bits[self._pos : self._pos + k]
        self._pos += k
        self.bits_consumed += k
        return out


def select_clients(n: int, m: int, bits, round_index: int = 0) -> SelectionVector:
    """Uniformly draw an m-of-n subset via rejection sampling on bit-built indices."""
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
    start = bits.bits_consumed
    if m == n:
        return SelectionVector(round_index, tuple(range(n)), 0)
    n_bits = max(1, math.ceil(math.log2(n)))
    chosen: set = set()
    while len(chosen) < m:
        idx_bits = bits.take(n_bits)
        idx = int(np.dot(idx_bits, 1 << np.arange(n_bits - 1, -1, -1)))
        if idx < n and idx not in chosen:
            chosen.add(idx)
    return SelectionVector(round_index, tuple(chosen), bits.bits_consumed - start)


def fairness_report(history, n: int):
    """Per-client selection counts and Pearson chi-square against uniform."""
    if not history:
        raise ValueError("empty selection history")
    counts = np.zeros(n, dtype=int)
    for sv in history:
        for c in sv.selected:
            counts[c] += 1
    t = len(history)
    m = len(history[0].selected)
    expected = m * t / n
    chi_square = float(np.sum((counts - expected) ** 2 / expected))
    return chi_square, counts
