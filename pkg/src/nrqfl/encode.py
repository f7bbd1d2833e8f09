"""Angle codec between real-valued model parameters and single-qubit states.

A weight w is affinely mapped into [0, pi/2] and prepared as
cos(a)|0> + sin(a)|1>; decoding inverts via P(1) = sin^2(a). The encoding is
bijective only on [0, pi/2], hence the clamp in `normalize`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .qcore import DensityMatrix, apply_unitary, make_pure_state, prob_one, ry

HALF_PI = math.pi / 2


@dataclass(frozen=True)
class WeightBounds:
    """Parameter-space interval mapped onto the encodable angle range."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError("bounds must be finite")
        if not self.lo < self.hi:
            raise ValueError(f"bounds require lo < hi, got [{self.lo}, {self.hi}]")


def normalize(w: float, bounds: WeightBounds) -> float:
    """Affine map to an angle in [0, pi/2]; out-of-range weights are clamped."""
    if not math.isfinite(w):
        raise ValueError("weight must be finite")
    frac = (w - bounds.lo) / (bounds.hi - bounds.lo)
    return HALF_PI * min(max(frac, 0.0), 1.0)


def denormalize(angle: float, bounds: WeightBounds) -> float:
    """Exact inverse of `normalize` on [lo, hi]."""
    _check_angle(angle)
    return bounds.lo + (bounds.hi - bounds.lo) * angle / HALF_PI


def encode(angle: float) -> DensityMatrix:
    """Pure state Ry(2a)|0>, i.e. cos(a)|0> + sin(a)|1>."""
    _check_angle(angle)
    zero = make_pure_state([1.0, 0.0])
    return apply_unitary(zero, ry(2.0 * angle), 0)


def decode_exact(state: DensityMatrix) -> float:
    """arcsin(sqrt(P(1))) of a single-qubit state; inverse of `encode` on clean states."""
    if state.n_qubits != 1:
        raise ValueError("decode expects a single-qubit state")
    p1 = prob_one(state, 0)
    return math.asin(math.sqrt(min(max(p1, 0.0), 1.0)))


def decode_shots(counts) -> float:
    """arcsin(sqrt(ones/shots)) from measurement counts (zeros, ones)."""
    zeros, ones = counts
    total = zeros + ones
    if total < 1:
        raise ValueError("need at least one shot to decode")
    if zeros < 0 or ones < 0:
        raise ValueError("counts must be non-negative")
    return math.asin(math.sqrt(ones / total))


def z_to_angle(z: float) -> float:
    """Decode an (already clamped) <Z> value: P(1) = (1 - z)/2."""
    z = min(max(z, -1.0), 1.0)
    return math.asin(math.sqrt((1.0 - z) / 2.0))


def angle_to_z(angle: float) -> float:
    """Ideal <Z> of the encoded state: cos(2a)."""
    _check_angle(angle)
    return math.cos(2.0 * angle)


def bounds_from_values(values, pad: float = 1e-9) -> WeightBounds:
    """Min/max bounds over client values, padded so degenerate spans stay valid."""
    arr = np.asarray(values, dtype=float)
    lo, hi = float(arr.min()), float(arr.max())
    if hi - lo < pad:
        span = max(pad, abs(lo) * 1e-9)
        lo, hi = lo - span, hi + span
    return WeightBounds(lo, hi)


def _check_angle(angle: float) -> None:
    if not (0.0 <= angle <= HALF_PI + 1e-12):
        raise ValueError(f"angle {angle} outside [0, pi/2]")
