"""Executable reductions: mean estimation -> sparse expectation-value estimation.

The chain rescales a ``[0, 1]``-valued function ``f`` into ``g = beta f``,
packs ``g`` into the ``(n, d)``-matrix encoding ``M`` and estimates
``<+^n|M|+^n> = (d/2) mean(g)`` with the sparse-access estimator. Every query
the estimator makes to the value oracle is one query to ``g`` and hence to
``f``, so the query counters show the reduction's cost directly.

These constructions demonstrate how query counts of *these* estimators track
the lower-bound envelopes; they do not prove the bounds.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blockenc import BlockAccess, SparseAccess
from .estimate import EstimationResult, ExpectationPlan, as_rng, sevhm_plan
from .oracle import Counter, FunctionOracle, QueryCountedUnitary, merge_charges
from .simkern import hadamard_all, make_rng
from .sparsemat import (
    MatrixEncoding,
    build_matrix_encoding,
    encoding_oracles,
    mean_from_expectation,
    plus_expectation,
)


@dataclass(frozen=True, eq=False)
class AMInstance:
    """Estimate the mean of ``f: [N] -> [0, 1]`` to additive ``eps``."""

    N: int
    eps: float
    f: FunctionOracle

    def __post_init__(self):
        if self.f.N != self.N or self.f.beta != 1.0:
            raise ValueError("f must map [N] to [0, 1]")
        if not 0 < self.eps <= 1:
            raise ValueError("eps must lie in (0, 1]")

    @property
    def in_problem_range(self) -> bool:
        """Whether ``eps`` lies in the problem's stated range ``(1/(2N), 1]``."""
        return 1 / (2 * self.N) < self.eps <= 1


@dataclass(frozen=True, eq=False)
class SAMInstance:
    """Estimate the mean of ``g: [N] -> [0, beta]`` to additive ``eps``."""

    N: int
    eps: float
    beta: float
    g: FunctionOracle

    def __post_init__(self):
        if self.g.N != self.N or self.g.beta != self.beta:
            raise ValueError("g does not match the instance's domain or range")
        if self.eps <= 0:
            raise ValueError("eps must be positive")

    @property
    def in_problem_range(self) -> bool:
        return self.beta / (2 * self.N) <= self.eps < self.beta


def am_instance(values, eps: float, bits: int = 16, counter: Counter | None = None) -> AMInstance:
    f = FunctionOracle.from_values(values, 1.0, bits, label="f", counter=counter)
    return AMInstance(f.N, float(eps), f)


def am_to_sam(am: AMInstance, beta: float) -> SAMInstance:
    """``g = beta f`` on the same fixed-point codes; each ``g`` query is one ``f`` query."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    g = FunctionOracle(
        am.N,
        float(beta),
        am.f.codes,
        am.f.bits,
        merge_charges(({Counter("g"): 1}, 1), (am.f.charges, 1)),
        "g",
    )
    return SAMInstance(am.N, am.eps * beta, float(beta), g)


def pad_function(g: FunctionOracle, size: int) -> FunctionOracle:
    """Zero-extend ``g`` to a domain of ``size``; the mean shrinks by ``N/size``."""
    if size < g.N:
        raise ValueError("cannot pad to a smaller domain")
    codes = np.concatenate([g.codes, np.zeros(size - g.N, dtype=np.int64)])
    return FunctionOracle(size, g.beta, codes, g.bits, dict(g.charges), g.label)


def sam_to_sevhm(
    sam: SAMInstance, n: int, d: int
) -> tuple[SparseAccess, QueryCountedUnitary, float]:
    """Sparse access to the matrix encoding of ``g``, the preparer ``H^n`` and the factor ``2/d``.

    An estimate ``u~`` of ``<+^n|M|+^n>`` gives the mean as ``(2/d) u~``.
    """
    if sam.N != d << (n - 1):
        raise ValueError(f"g's domain size {sam.N} differs from d 2^(n-1) = {d << (n - 1)}")
    sparse = encoding_oracles(MatrixEncoding(n, d, sam.beta, sam.g))
    v = QueryCountedUnitary.primitive("V", hadamard_all(n))
    return sparse, v, 2.0 / d


def exact_mean_via_encoding(sam: SAMInstance, n: int, d: int) -> float:
    """Mean recovered from the exact expectation ``<+^n|M|+^n>`` (no estimator)."""
    m = build_matrix_encoding(MatrixEncoding(n, d, sam.beta, sam.g))
    return mean_from_expectation(n, d, plus_expectation(m))


@dataclass
class MeanReductionPlan:
    """AM -> SAM -> sparse expectation value, with the classical rescaling folded in."""

    am: AMInstance
    sam: SAMInstance
    sparse: SparseAccess
    estimator: ExpectationPlan
    eps_sevhm: float

    def run(self, rng) -> EstimationResult:
        return self.estimator.run(as_rng(rng))

    def trials(self, seed: int, count: int) -> list[EstimationResult]:
        return [self.run(make_rng(seed, k)) for k in range(count)]


def end_to_end_plan(
    am: AMInstance, n: int, d: int, beta: float = 1.0, mode: str = "auto"
) -> MeanReductionPlan:
    """Plan the full chain. Domains smaller than ``d 2^(n-1)`` are zero-padded.

    With padding factor ``rho = N / (d 2^(n-1))`` the mean is
    ``mu_f = (2/d) u / (rho beta)``; the sparse estimator therefore runs at
    ``eps_sevhm = eps d beta rho / 2`` so the recovered mean is ``eps``-accurate.
    """
    sam = am_to_sam(am, beta)
    size = d << (n - 1)
    if am.N > size:
        raise ValueError(f"domain size {am.N} exceeds the encoding capacity {size}")
    rho = am.N / size
    padded = SAMInstance(size, sam.eps * rho, beta, pad_function(sam.g, size))
    sparse, v, factor = sam_to_sevhm(padded, n, d)
    eps_sevhm = am.eps * d * beta * rho / 2
    inner = sevhm_plan(n, sparse, eps_sevhm, v, mode)
    conv = factor / (rho * beta)
    estimator = ExpectationPlan(
        inner.amplitude, inner.scale * conv, inner.offset * conv, am.eps, inner.counters
    )
    return MeanReductionPlan(am, sam, sparse, estimator, eps_sevhm)


def end_to_end_mean(am: AMInstance, n: int, d: int, seed, beta: float = 1.0) -> float:
    """One run of the chain; within ``am.eps`` of the mean of ``f`` w.p. >= 2/3."""
    return end_to_end_plan(am, n, d, beta).run(seed).value


def conjugate_block(
    b: BlockAccess, v: QueryCountedUnitary, v_fixed: np.ndarray
) -> BlockAccess:
    """Block access ``(alpha, a, 0)`` to ``F = V_n V^+ M V V_n^+``.

    Realized as the unitary sandwich ``(1_a (x) V_n V^+) U_M (1_a (x) V V_n^+)``,
    which has the intended upper-left block. One ``U_M`` and two ``V`` calls per use.
    Then ``<0|V_n^+ F V_n|0> = <0|V^+ M V|0>`` with the fixed ``V_n``.
    """
    v_fixed = np.asarray(v_fixed, dtype=complex)
    if v.n_qubits != b.n or v_fixed.shape != (1 << b.n, 1 << b.n):
        raise ValueError("V and V_n must act on the block's system register")
    if b.delta != 0:
        raise ValueError("conjugate_block needs an exact (delta = 0) block encoding")
    ident = np.eye(1 << b.a)
    left = np.kron(ident, v_fixed @ v.matrix.conj().T)
    right = np.kron(ident, v.matrix @ v_fixed.conj().T)
    u = left @ b.u.matrix @ right
    charges = merge_charges((b.u.charges, 1), (v.charges, 2))
    box = QueryCountedUnitary(f"conj({b.u.label})", charges, dense=u)
    return BlockAccess(b.alpha, b.a, 0.0, box, b.n)
