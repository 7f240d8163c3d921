"""Dense statevector kernel.

Qubit 0 is the most significant bit of a basis-state index, so for a register
laid out as ``ancillas + system`` the ``|0^a><0^a|`` block of an operator is its
upper-left ``2^n x 2^n`` corner.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import RegisterBudgetError

MAX_QUBITS = 22
MAX_DENSE_QUBITS = 12

UNITARY_TOL = 1e-9
HERMITIAN_TOL = 1e-12

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def n_qubits_of(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 1 or 1 << n != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n


def is_unitary(op: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    op = np.asarray(op)
    return bool(np.max(np.abs(op.conj().T @ op - np.eye(op.shape[0]))) <= tol)


def is_hermitian(op: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    op = np.asarray(op)
    return bool(np.max(np.abs(op - op.conj().T), initial=0.0) <= tol)


def kron_all(*ops: np.ndarray) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for op in ops:
        out = np.kron(out, op)
    return out


def hadamard_all(n: int) -> np.ndarray:
    return kron_all(*([H] * n))


def controlled(op: np.ndarray) -> np.ndarray:
    """|0><0| (x) 1 + |1><1| (x) op, control on the new most significant qubit."""
    d = op.shape[0]
    out = np.zeros((2 * d, 2 * d), dtype=complex)
    out[:d, :d] = np.eye(d)
    out[d:, d:] = op
    return out


def matrix_power(op: np.ndarray, k: int) -> np.ndarray:
    """k-th power by repeated squaring."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    result = np.eye(op.shape[0], dtype=complex)
    base = np.array(op, dtype=complex)
    while k:
        if k & 1:
            result = base @ result
        k >>= 1
        if k:
            base = base @ base
    return result


def qft_matrix(t: int) -> np.ndarray:
    dim = 1 << t
    k = np.arange(dim)
    return np.exp(2j * np.pi * np.outer(k, k) / dim) / np.sqrt(dim)


@dataclass
class StateVector:
    """Amplitudes of an ``n_qubits`` register (qubit 0 = most significant bit)."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be >= 1")
        if self.n_qubits > MAX_QUBITS:
            raise RegisterBudgetError(f"{self.n_qubits} qubits exceeds the {MAX_QUBITS}-qubit cap")
        if self.amplitudes.shape[0] != 1 << self.n_qubits:
            raise ValueError(
                f"expected {1 << self.n_qubits} amplitudes, got {self.amplitudes.shape[0]}"
            )

    @classmethod
    def zero(cls, n_qubits: int) -> "StateVector":
        amps = np.zeros(1 << n_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(n_qubits, amps)

    @classmethod
    def basis(cls, n_qubits: int, index: int | str) -> "StateVector":
        if isinstance(index, str):
            if len(index) != n_qubits:
                raise ValueError("bitstring length must equal n_qubits")
            index = int(index, 2)
        amps = np.zeros(1 << n_qubits, dtype=complex)
        amps[index] = 1.0
        return cls(n_qubits, amps)

    @classmethod
    def from_amplitudes(cls, amplitudes) -> "StateVector":
        amplitudes = np.asarray(amplitudes, dtype=complex).reshape(-1)
        return cls(n_qubits_of(amplitudes.shape[0]), amplitudes)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def copy(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amplitudes.copy())

    def tensor(self, other: "StateVector") -> "StateVector":
        return StateVector(self.n_qubits + other.n_qubits, np.kron(self.amplitudes, other.amplitudes))


def _check_targets(targets: Sequence[int], n: int) -> list[int]:
    targets = [int(q) for q in targets]
    if len(set(targets)) != len(targets):
        raise ValueError(f"duplicate target qubits in {targets}")
    for q in targets:
        if not 0 <= q < n:
            raise ValueError(f"target qubit {q} out of range for {n} qubits")
    return targets


def apply_to_subset(op: np.ndarray, state: StateVector, targets: Sequence[int]) -> StateVector:
    """Apply ``op`` to the listed qubits (first listed = most significant)."""
    op = np.asarray(op, dtype=complex)
    targets = _check_targets(targets, state.n_qubits)
    k = len(targets)
    if op.shape != (1 << k, 1 << k):
        raise ValueError(f"operator of shape {op.shape} does not act on {k} qubits")
    n = state.n_qubits
    psi = state.amplitudes.reshape((2,) * n)
    psi = np.moveaxis(psi, targets, range(k)).reshape(1 << k, -1)
    psi = (op @ psi).reshape((2,) * n)
    psi = np.moveaxis(psi, range(k), targets)
    return StateVector(n, psi.reshape(-1))


def apply_permutation(perm: np.ndarray, state: StateVector, targets: Sequence[int]) -> StateVector:
    """Apply the basis permutation ``|x> -> |perm[x]>`` on the listed qubits."""
    targets = _check_targets(targets, state.n_qubits)
    k = len(targets)
    if perm.shape != (1 << k,):
        raise ValueError(f"permutation of length {perm.shape[0]} does not act on {k} qubits")
    n = state.n_qubits
    psi = state.amplitudes.reshape((2,) * n)
    psi = np.moveaxis(psi, targets, range(k)).reshape(1 << k, -1)
    out = np.empty_like(psi)
    out[perm] = psi
    out = np.moveaxis(out.reshape((2,) * n), range(k), targets)
    return StateVector(n, out.reshape(-1))


def marginal_probabilities(state: StateVector, qubit_subset: Sequence[int]) -> np.ndarray:
    """Probabilities of every bitstring on ``qubit_subset`` (first listed = MSB)."""
    subset = _check_targets(qubit_subset, state.n_qubits)
    n = state.n_qubits
    probs = (np.abs(state.amplitudes) ** 2).reshape((2,) * n)
    rest = [q for q in range(n) if q not in subset]
    probs = probs.sum(axis=tuple(rest)) if rest else probs
    # after summing, remaining axes are in increasing qubit order
    order = sorted(subset)
    probs = np.moveaxis(probs, [order.index(q) for q in subset], range(len(subset)))
    return probs.reshape(-1)


def measure_projector(state: StateVector, qubit_subset: Sequence[int], bitstring: str) -> float:
    """Probability ``||(|s><s| (x) 1)|psi>||^2`` of reading ``bitstring`` on the subset."""
    if len(bitstring) != len(qubit_subset):
        raise ValueError("bitstring length must match the qubit subset")
    return float(marginal_probabilities(state, qubit_subset)[int(bitstring, 2)])


def sample_bitstring(state: StateVector, qubit_subset: Sequence[int], rng_seed) -> str:
    probs = marginal_probabilities(state, qubit_subset)
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else make_rng(rng_seed)
    index = sample_index(probs, rng)
    return format(index, f"0{len(qubit_subset)}b")


def sample_index(probs: np.ndarray, rng: np.random.Generator) -> int:
    cdf = np.cumsum(probs)
    index = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(index, len(probs) - 1)


def make_rng(seed: int, trial: int = 0) -> np.random.Generator:
    """Counter-based generator; every (seed, trial) pair replays identically."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(trial)])))


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_hermitian(dim: int, rng: np.random.Generator, norm: float = 1.0) -> np.ndarray:
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    h = (a + a.conj().T) / 2
    return h * (norm / np.linalg.norm(h, 2))


def complete_unitary(columns: np.ndarray, positions: Sequence[int], dim: int) -> np.ndarray:
    """A unitary whose columns at ``positions`` are the given orthonormal vectors.

    The remaining columns span the orthogonal complement; their choice is
    deterministic but otherwise arbitrary.
    """
    columns = np.asarray(columns, dtype=complex).reshape(dim, -1)
    gram = columns.conj().T @ columns
    if np.max(np.abs(gram - np.eye(gram.shape[0])), initial=0.0) > 1e-9:
        raise ValueError("columns are not orthonormal")
    comp = scipy.linalg.null_space(columns.conj().T)
    u = np.zeros((dim, dim), dtype=complex)
    rest = [i for i in range(dim) if i not in set(positions)]
    u[:, list(positions)] = columns
    u[:, rest] = comp
    return u


def householder_preparer(target: np.ndarray) -> np.ndarray:
    """Unitary ``U`` with ``U|0> = target`` built from one Householder reflection."""
    b = np.asarray(target, dtype=complex).reshape(-1)
    b = b / np.linalg.norm(b)
    phase = b[0] / abs(b[0]) if abs(b[0]) > 0 else 1.0
    e0 = np.zeros_like(b)
    e0[0] = phase
    u = e0 - b
    if np.linalg.norm(u) < 1e-15:
        return phase * np.eye(len(b), dtype=complex)
    refl = np.eye(len(b), dtype=complex) - 2 * np.outer(u, u.conj()) / np.vdot(u, u)
    return phase * refl


def reorder_qubits(op: np.ndarray, order: Sequence[int]) -> np.ndarray:
    """Rewrite ``op`` whose k-th tensor factor is qubit ``order[k]`` in natural order."""
    op = np.asarray(op, dtype=complex)
    n = n_qubits_of(op.shape[0])
    order = list(order)
    if sorted(order) != list(range(n)):
        raise ValueError(f"{order} is not a permutation of {n} qubits")
    position = np.argsort(order)
    axes = list(position) + [n + p for p in position]
    return op.reshape((2,) * (2 * n)).transpose(axes).reshape(1 << n, 1 << n)


def expand_operator(op: np.ndarray, targets: Sequence[int], n_total: int) -> np.ndarray:
    """Dense matrix of ``op`` acting on ``targets`` of an ``n_total``-qubit register."""
    targets = _check_targets(targets, n_total)
    if n_total > MAX_DENSE_QUBITS:
        raise RegisterBudgetError(f"dense {n_total}-qubit operator exceeds the cap")
    rest = [q for q in range(n_total) if q not in targets]
    full = np.kron(np.asarray(op, dtype=complex), np.eye(1 << len(rest), dtype=complex))
    return reorder_qubits(full, targets + rest)


def qubit_permutation(order: Sequence[int]) -> np.ndarray:
    """Permutation matrix moving the content of qubit ``order[p]`` to qubit ``p``."""
    n = len(order)
    if sorted(order) != list(range(n)):
        raise ValueError(f"{order} is not a permutation of {n} qubits")
    index = np.arange(1 << n).reshape((2,) * n).transpose(list(order)).reshape(-1)
    out = np.zeros((1 << n, 1 << n), dtype=complex)
    out[np.arange(1 << n), index] = 1.0
    return out
