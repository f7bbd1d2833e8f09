"""Dense density-matrix simulator for small qubit registers.

States are 2^n x 2^n complex matrices (n <= 6, so at most 64x64). Noise is
modeled with Kraus channels; everything is validated against the standard
invariants (Hermitian, unit trace, PSD, channel completeness). All operations
are pure functions of their inputs; the only stateful object is the caller's
RNG stream.

Qubit index 0 is the leftmost tensor factor (most significant bit of the
computational-basis index).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

MAX_QUBITS = 6

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
COMPLETENESS_TOL = 1e-10
PSD_TOL = 1e-9  # slack for roundoff accumulated across repeated channel application


def _as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a.real)) or not np.all(np.isfinite(a.imag)):
        raise ValueError("matrix contains non-finite entries")
    return a


@dataclass(frozen=True)
class DensityMatrix:
    """State of an n-qubit register: Hermitian, PSD, unit-trace matrix."""

    n_qubits: int
    matrix: np.ndarray

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise ValueError(f"n_qubits must be in 1..{MAX_QUBITS}, got {self.n_qubits}")
        m = _as_matrix(self.matrix)
        dim = 2 ** self.n_qubits
        if m.shape != (dim, dim):
            raise ValueError(f"state matrix must be {dim}x{dim}, got {m.shape}")
        if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
            raise ValueError("state is not Hermitian")
        if abs(np.trace(m).real - 1.0) > TRACE_TOL or abs(np.trace(m).imag) > TRACE_TOL:
            raise ValueError(f"state trace is {np.trace(m)}, expected 1")
        if np.linalg.eigvalsh(m).min() < -PSD_TOL:
            raise ValueError("state is not positive semidefinite")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return 2 ** self.n_qubits


@dataclass(frozen=True)
class KrausChannel:
    """CPTP map given by Kraus operators {E_k} with sum_k E_k^dag E_k = I."""

    operators: tuple
    label: str = "channel"

    def __post_init__(self):
        ops = tuple(_as_matrix(e) for e in self.operators)
        if not ops:
            raise ValueError("channel needs at least one Kraus operator")
        d = ops[0].shape[0]
        for e in ops:
            if e.shape != (d, d):
                raise ValueError("all Kraus operators must be square and same-sized")
        total = sum(e.conj().T @ e for e in ops)
        if np.linalg.norm(total - np.eye(d)) > COMPLETENESS_TOL:
            raise ValueError(f"Kraus completeness violated for '{self.label}'")
        object.__setattr__(self, "operators", ops)

    @property
    def dim(self) -> int:
        return self.operators[0].shape[0]


@dataclass(frozen=True)
class Observable:
    """Hermitian measurement operator."""

    matrix: np.ndarray

    def __post_init__(self):
        m = _as_matrix(self.matrix)
        if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
            raise ValueError("observable is not Hermitian")
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class NoiseModel:
    """Per-gate channel parameters plus readout flip probability."""

    p_depol: float = 0.0
    p_deph: float = 0.0
    gamma: float = 0.0
    readout_flip: float = 0.0

    def __post_init__(self):
        for name in ("p_depol", "p_deph", "gamma", "readout_flip"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must be in [0, 1], got {v}")

    @property
    def is_noiseless(self) -> bool:
        return self.p_depol == self.p_deph == self.gamma == self.readout_flip == 0.0

    def gate_channels(self) -> list:
        """Channels applied after each gate, in fixed order."""
        out = []
        if self.p_depol > 0:
            out.append(depolarizing_channel(self.p_depol))
        if self.p_deph > 0:
            out.append(dephasing_channel(self.p_deph))
        if self.gamma > 0:
            out.append(amplitude_damping_channel(self.gamma))
        return out


# Pauli matrices
I2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)

Z_OBSERVABLE = Observable(PAULI_Z)


def make_pure_state(amplitudes) -> DensityMatrix:
    """Build |psi><psi| from a unit-norm amplitude vector (length 2..64, power of two)."""
    v = np.asarray(amplitudes, dtype=complex)
    if v.ndim != 1 or v.size < 2 or v.size > 64 or (v.size & (v.size - 1)) != 0:
        raise ValueError(f"amplitude vector length must be a power of two in [2, 64], got {v.size}")
    norm = np.linalg.norm(v)
    if abs(norm - 1.0) > 1e-10:
        raise ValueError(f"amplitudes must be unit norm, got ||v|| = {norm}")
    n = int(round(math.log2(v.size)))
    return DensityMatrix(n, np.outer(v, v.conj()))


def ry(theta: float) -> np.ndarray:
    """Rotation about Y: [[cos(t/2), -sin(t/2)], [sin(t/2), cos(t/2)]]."""
    if not math.isfinite(theta):
        raise ValueError("rotation angle must be finite")
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def depolarizing_channel(p: float) -> KrausChannel:
    """E(rho) = (1-p) rho + (p/3)(X rho X + Y rho Y + Z rho Z)."""
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"depolarizing probability must be in [0, 1], got {p}")
    if p == 0.0:
        return KrausChannel((I2,), label="depolarizing(0)")
    ops = (
        math.sqrt(1 - p) * I2,
        math.sqrt(p / 3) * PAULI_X,
        math.sqrt(p / 3) * PAULI_Y,
        math.sqrt(p / 3) * PAULI_Z,
    )
    return KrausChannel(ops, label=f"depolarizing({p})")


def dephasing_channel(p: float) -> KrausChannel:
    """E(rho) = (1-p) rho + p Z rho Z; off-diagonals scale by (1-2p)."""
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"dephasing probability must be in [0, 1], got {p}")
    if p == 0.0:
        return KrausChannel((I2,), label="dephasing(0)")
    return KrausChannel((math.sqrt(1 - p) * I2, math.sqrt(p) * PAULI_Z), label=f"dephasing({p})")


def amplitude_damping_channel(gamma: float) -> KrausChannel:
    """Energy relaxation |1> -> |0> with probability gamma (standard Kraus pair)."""
    if not (0.0 <= gamma <= 1.0):
        raise ValueError(f"damping probability must be in [0, 1], got {gamma}")
    e0 = np.array([[1, 0], [0, math.sqrt(1 - gamma)]], dtype=complex)
    e1 = np.array([[0, math.sqrt(gamma)], [0, 0]], dtype=complex)
    return KrausChannel((e0, e1), label=f"amplitude_damping({gamma})")


def identity_channel() -> KrausChannel:
    return KrausChannel((I2,), label="identity")


def compose_channels(first: KrausChannel, second: KrausChannel) -> KrausChannel:
    """Channel applying `first` then `second`: Kraus set {B_j A_i}."""
    if first.dim != second.dim:
        raise ValueError("channel dimensions do not match")
    ops = tuple(b @ a for a in first.operators for b in second.operators)
    return KrausChannel(ops, label=f"{second.label}∘{first.label}")


def _lift(op: np.ndarray, n_qubits: int, target_qubit: int) -> np.ndarray:
    """Embed a single-qubit operator at `target_qubit` of an n-qubit register."""
    if not 0 <= target_qubit < n_qubits:
        raise ValueError(f"qubit index {target_qubit} out of range for {n_qubits} qubits")
    if n_qubits == 1:
        return op
    left = np.eye(2 ** target_qubit, dtype=complex)
    right = np.eye(2 ** (n_qubits - target_qubit - 1), dtype=complex)
    return np.kron(np.kron(left, op), right)


def apply_unitary(state: DensityMatrix, u, target_qubit: int) -> DensityMatrix:
    """Conjugate the target qubit by a 2x2 unitary: rho -> U rho U^dag."""
    u = _as_matrix(u)
    if u.shape != (2, 2):
        raise ValueError(f"expected a 2x2 unitary, got shape {u.shape}")
    if np.linalg.norm(u.conj().T @ u - np.eye(2)) > 1e-10:
        raise ValueError("matrix is not unitary")
    big = _lift(u, state.n_qubits, target_qubit)
    return DensityMatrix(state.n_qubits, big @ state.matrix @ big.conj().T)


def apply_channel(state: DensityMatrix, channel: KrausChannel, target_qubit: int) -> DensityMatrix:
    """Kraus sum E(rho) = sum_k E_k rho E_k^dag on the target qubit."""
    if channel.dim != 2:
        raise ValueError("only single-qubit channels are supported")
    out = np.zeros_like(state.matrix)
    for e in channel.operators:
        big = _lift(e, state.n_qubits, target_qubit)
        out += big @ state.matrix @ big.conj().T
    return DensityMatrix(state.n_qubits, out)


def expectation(state: DensityMatrix, m: Observable) -> float:
    """Tr(M rho), guaranteed real up to a 1e-10 imaginary residue."""
    if m.matrix.shape != state.matrix.shape:
        raise ValueError("observable/state dimension mismatch")
    val = np.trace(m.matrix @ state.matrix)
    if abs(val.imag) > 1e-10:
        raise ValueError(f"expectation has imaginary residue {val.imag}")
    return float(val.real)


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """D(rho, sigma) = (1/2) sum |eigenvalues of rho - sigma|."""
    if rho.matrix.shape != sigma.matrix.shape:
        raise ValueError("state dimension mismatch")
    eigs = np.linalg.eigvalsh(rho.matrix - sigma.matrix)
    return float(0.5 * np.sum(np.abs(eigs)))


def prob_one(state: DensityMatrix, target_qubit: int) -> float:
    """Diagonal mass of the |1> subspace of the target qubit."""
    if not 0 <= target_qubit < state.n_qubits:
        raise ValueError(f"qubit index {target_qubit} out of range")
    diag = np.real(np.diag(state.matrix))
    idx = np.arange(state.dim)
    bit = (idx >> (state.n_qubits - target_qubit - 1)) & 1
    p1 = float(diag[bit == 1].sum())
    return min(max(p1, 0.0), 1.0)


def sample_measurement(
    state: DensityMatrix,
    target_qubit: int,
    shots: int,
    rng: np.random.Generator,
    readout_flip: float = 0.0,
) -> tuple:
    """Measure the target qubit `shots` times; returns (zeros, ones).

    Each Bernoulli outcome is flipped with probability readout_flip.
    Deterministic for a fixed RNG state.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if not (0.0 <= readout_flip <= 1.0):
        raise ValueError("readout_flip must be in [0, 1]")
    p1 = prob_one(state, target_qubit)
    p_eff = p1 * (1 - readout_flip) + (1 - p1) * readout_flip
    ones = int(rng.binomial(shots, p_eff))
    return shots - ones, ones


def random_density_matrix(n_qubits: int, rng: np.random.Generator, pure: bool = False) -> DensityMatrix:
    """Random state for property checks (Haar-ish pure or Wishart mixed)."""
    dim = 2 ** n_qubits
    if pure:
        v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        v /= np.linalg.norm(v)
        return DensityMatrix(n_qubits, np.outer(v, v.conj()))
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    m = g @ g.conj().T
    return DensityMatrix(n_qubits, m / np.trace(m).real)


def matrix_to_json(m) -> list:
    """Nested lists of [re, im] pairs, for debugging dumps."""
    a = _as_matrix(m)
    return [[[float(x.real), float(x.imag)] for x in row] for row in a]


def matrix_from_json(data) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in data], dtype=complex)
