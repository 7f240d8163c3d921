"""Query-counted black-box unitaries and function oracles.

A :class:`Counter` tallies queries to one designated black box. Every
:class:`QueryCountedUnitary` carries a ``charges`` map from counters to the
number of queries one invocation costs, so a composite built from two calls to
``U_M`` and one call to ``V`` charges ``{U_M: 2, V: 1}`` each time it is used.
The adjoint and controlled variants share the base charges: a query to
``O``, ``O^dagger``, ``c-O`` or ``c-O^dagger`` costs the same.

The matrix of a box is available without charge (the simulator needs it to
build composites); only :meth:`QueryCountedUnitary.apply` and
:meth:`QueryCountedUnitary.charge` count as queries.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

import numpy as np

from .errors import RegisterBudgetError
from .simkern import (
    MAX_DENSE_QUBITS,
    MAX_QUBITS,
    StateVector,
    apply_permutation,
    apply_to_subset,
    controlled,
    n_qubits_of,
)


class Counter:
    """Thread-safe, monotone query tally for one black box."""

    def __init__(self, label: str):
        self.label = label
        self._value = 0
        self._lock = threading.Lock()

    @property
    def value(self) -> int:
        return self._value

    def increment(self, k: int = 1) -> None:
        if k < 0:
            raise ValueError("counters never decrease")
        with self._lock:
            self._value += int(k)

    def reset(self) -> None:
        with self._lock:
            self._value = 0

    def __repr__(self) -> str:
        return f"Counter({self.label!r}, value={self._value})"


def merge_charges(*parts: tuple[Mapping[Counter, int], int]) -> dict[Counter, int]:
    """Sum ``times * charges`` over ``(charges, times)`` pairs."""
    total: dict[Counter, int] = {}
    for charges, times in parts:
        for counter, k in charges.items():
            total[counter] = total.get(counter, 0) + k * times
    return {c: k for c, k in total.items() if k}


@dataclass(eq=False)
class QueryCountedUnitary:
    """A unitary black box with query accounting.

    Exactly one representation holds the action: ``dense`` (a matrix),
    ``perm`` (a basis permutation ``|x> -> |perm[x]>``) or ``xor_table``
    (``|x>|z> -> |x>|z xor table[x]>`` with a ``xor_bits``-qubit output
    register). XOR tables stay lazy so wide value registers cost nothing until
    a state is actually pushed through them.
    """

    label: str
    charges: dict[Counter, int]
    dense: np.ndarray | None = None
    perm: np.ndarray | None = None
    xor_table: np.ndarray | None = None
    xor_bits: int = 0

    def __post_init__(self):
        given = [x is not None for x in (self.dense, self.perm, self.xor_table)]
        if sum(given) != 1:
            raise ValueError("give exactly one of a dense matrix, a permutation or an XOR table")
        if self.dense is not None:
            self.dense = np.asarray(self.dense, dtype=complex)
            self.dense.setflags(write=False)
        elif self.perm is not None:
            self.perm = np.asarray(self.perm, dtype=np.int64)
            self.perm.setflags(write=False)
        else:
            self.xor_table = np.asarray(self.xor_table, dtype=np.int64)
            self.xor_table.setflags(write=False)
            n_qubits_of(len(self.xor_table))
            if self.xor_bits < 1 or np.any(self.xor_table >> self.xor_bits):
                raise ValueError("XOR table entries do not fit the output register")
        n_qubits_of(self.dim)

    @classmethod
    def primitive(cls, label: str, matrix: np.ndarray, counter: Counter | None = None):
        """A fresh black box with its own counter (or the given one)."""
        counter = counter if counter is not None else Counter(label)
        return cls(label, {counter: 1}, dense=matrix)

    @property
    def dim(self) -> int:
        if self.dense is not None:
            return self.dense.shape[0]
        if self.perm is not None:
            return self.perm.shape[0]
        return len(self.xor_table) << self.xor_bits

    @property
    def n_qubits(self) -> int:
        return n_qubits_of(self.dim)

    @property
    def counter(self) -> Counter:
        """The single counter of a primitive box."""
        if len(self.charges) != 1:
            raise ValueError(f"{self.label} is a composite charging {len(self.charges)} counters")
        return next(iter(self.charges))

    def permutation(self) -> np.ndarray:
        """Basis permutation of a classical (permutation or XOR) box."""
        if self.perm is not None:
            return self.perm
        if self.xor_table is None:
            raise ValueError(f"{self.label} is not a classical reversible box")
        if self.n_qubits > MAX_QUBITS:
            raise RegisterBudgetError(f"{self.label} acts on {self.n_qubits} qubits")
        size = 1 << self.xor_bits
        x = np.repeat(np.arange(len(self.xor_table), dtype=np.int64), size)
        z = np.tile(np.arange(size, dtype=np.int64), len(self.xor_table))
        return x * size + (self.xor_table[x] ^ z)

    @property
    def matrix(self) -> np.ndarray:
        """Dense matrix (uncharged simulator access)."""
        if self.dense is not None:
            return self.dense
        if self.n_qubits > MAX_DENSE_QUBITS:
            raise RegisterBudgetError(
                f"{self.label}: dense form of a {self.n_qubits}-qubit permutation is too large"
            )
        out = np.zeros((self.dim, self.dim), dtype=complex)
        out[self.permutation(), np.arange(self.dim)] = 1.0
        return out

    def charge(self, times: int = 1) -> None:
        for counter, k in self.charges.items():
            counter.increment(k * times)

    def apply(self, state: StateVector, targets=None) -> StateVector:
        """One charged invocation on ``targets`` (default: the whole register)."""
        targets = list(range(state.n_qubits)) if targets is None else list(targets)
        self.charge()
        if self.dense is None:
            return apply_permutation(self.permutation(), state, targets)
        return apply_to_subset(self.dense, state, targets)

    def adjoint(self) -> "QueryCountedUnitary":
        return make_adjoint(self)

    def controlled(self) -> "QueryCountedUnitary":
        return make_controlled(self)

    def counters(self) -> list[Counter]:
        return list(self.charges)

    def clone(self) -> "QueryCountedUnitary":
        """Same action with fresh counters (same labels), for per-trial attribution."""
        fresh = {Counter(c.label): k for c, k in self.charges.items()}
        return replace(self, charges=fresh)


def make_controlled(u: QueryCountedUnitary) -> QueryCountedUnitary:
    """``|0><0| (x) 1 + |1><1| (x) u`` with the control as the new top qubit."""
    if u.dense is None:
        perm = np.concatenate([np.arange(u.dim), u.dim + u.permutation()])
        return QueryCountedUnitary(f"c-{u.label}", dict(u.charges), perm=perm)
    return QueryCountedUnitary(f"c-{u.label}", dict(u.charges), dense=controlled(u.dense))


def make_adjoint(u: QueryCountedUnitary) -> QueryCountedUnitary:
    if u.xor_table is not None:  # XOR oracles are involutions
        return QueryCountedUnitary(
            f"{u.label}^+", dict(u.charges), xor_table=u.xor_table, xor_bits=u.xor_bits
        )
    if u.perm is not None:
        inv = np.empty_like(u.perm)
        inv[u.perm] = np.arange(u.dim)
        return QueryCountedUnitary(f"{u.label}^+", dict(u.charges), perm=inv)
    return QueryCountedUnitary(f"{u.label}^+", dict(u.charges), dense=u.dense.conj().T)


def reset_counters(oracles: Iterable) -> None:
    """Zero every counter reachable from the given boxes, oracles or counters."""
    for obj in oracles:
        if isinstance(obj, Counter):
            obj.reset()
        else:
            for counter in obj.charges:
                counter.reset()


def snapshot(counters: Iterable[Counter]) -> dict[Counter, int]:
    return {c: c.value for c in counters}


def delta_by_label(before: Mapping[Counter, int]) -> dict[str, int]:
    """Counter increments since ``before``, summed per label."""
    out: dict[str, int] = {}
    for counter, start in before.items():
        out[counter.label] = out.get(counter.label, 0) + counter.value - start
    return out


# ----------------------------------------------------------------------------
# Function oracles


def fixed_point_denominator(bits: int) -> int:
    """Codes 0..2^r-1 represent beta * code / (2^r - 1), so 0 and beta are exact."""
    return (1 << bits) - 1


@dataclass(eq=False)
class FunctionOracle:
    """Black-box access to ``g: [N] -> [0, beta]`` on an r-bit fixed-point grid.

    Values are rounded to the grid ``beta * k / (2^r - 1)`` at construction, so
    every later computation (means, entry sums) sees exactly the values the
    quantum oracle encodes. Non-power-of-two domains are zero-padded; ``N``
    keeps the true domain size for the caller's mean correction.
    """

    N: int
    beta: float
    codes: np.ndarray
    bits: int = 16
    charges: dict[Counter, int] = field(default_factory=dict)
    label: str = "f"

    def __post_init__(self):
        if self.bits < 1:
            raise ValueError("value register needs at least one bit")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        self.codes = np.asarray(self.codes, dtype=np.int64)
        if self.codes.shape != (self.N,):
            raise ValueError(f"expected {self.N} codes, got shape {self.codes.shape}")
        if np.any(self.codes < 0) or np.any(self.codes > fixed_point_denominator(self.bits)):
            raise ValueError("codes out of range for the value register")
        if not self.charges:
            self.charges = {Counter(self.label): 1}

    @classmethod
    def from_values(
        cls, values, beta: float, bits: int = 16, label: str = "f", counter: Counter | None = None
    ) -> "FunctionOracle":
        values = np.asarray(values, dtype=float).reshape(-1)
        if np.any(values < 0) or np.any(values > beta * (1 + 1e-12)):
            raise ValueError("function values must lie in [0, beta]")
        denom = fixed_point_denominator(bits)
        codes = np.rint(np.clip(values / beta, 0.0, 1.0) * denom).astype(np.int64)
        tiny = beta / (1 << bits)
        if np.any((codes == 0) & (values > tiny)):
            raise ValueError(f"{bits} value bits cannot distinguish a nonzero value from 0")
        charges = {counter: 1} if counter is not None else {}
        return cls(len(values), float(beta), codes, bits, charges, label)

    @property
    def counter(self) -> Counter:
        return next(iter(self.charges))

    @property
    def denominator(self) -> int:
        return fixed_point_denominator(self.bits)

    @property
    def values(self) -> np.ndarray:
        """The grid values ``beta * code / (2^r - 1)`` (uncharged)."""
        return self.beta * self.codes / self.denominator

    @property
    def domain_qubits(self) -> int:
        return max(1, (self.N - 1).bit_length())

    def peek(self, j: int) -> float:
        """Uncharged table read (simulator introspection only)."""
        return float(self.values[j])

    def query(self, j: int) -> float:
        """Charged classical evaluation of g(j)."""
        for counter, k in self.charges.items():
            counter.increment(k)
        return self.peek(j)

    def padded_codes(self) -> np.ndarray:
        size = 1 << self.domain_qubits
        return np.concatenate([self.codes, np.zeros(size - self.N, dtype=np.int64)])

    def mean(self) -> float:
        """Exact mean of the grid values over the true domain."""
        return float(self.values.sum() / self.N)


def function_to_unitary(g: FunctionOracle, value_bits: int | None = None) -> QueryCountedUnitary:
    """XOR oracle ``|j>|s> -> |j>|code(g(j)) xor s>`` on ceil(log2 N) + r qubits."""
    r = g.bits if value_bits is None else int(value_bits)
    if r < 1:
        raise ValueError("value register needs at least one bit")
    codes = g.padded_codes()
    if r != g.bits:
        fractions = codes / g.denominator
        codes = np.rint(fractions * fixed_point_denominator(r)).astype(np.int64)
        if np.any((codes == 0) & (fractions > 2.0**-r)):
            raise ValueError(f"{r} value bits cannot distinguish a nonzero value from 0")
    return QueryCountedUnitary(f"O_{g.label}", dict(g.charges), xor_table=codes, xor_bits=r)
