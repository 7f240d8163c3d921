"""End-to-end estimation of ``x^+ M x`` for ``x = A^{-1} b`` from block access.

The solver builds block access to ``A^{-1}`` with scale ``8 kappa / 3``,
extends ``M`` by the projector onto the inverse's ancilla-zero subspace, and
runs the block-access expectation-value estimator on the state
``U_{A^{-1}} (1 (x) U_b)|0>``. That expectation equals ``x^+ M x / (8 kappa/3)^2``
up to the inverse's block error, so the final estimate is rescaled by
``(8 kappa / 3)^2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .blockenc import BlockAccess, dilate_exact, tensor_projector, verify_block_encoding
from .errors import PromiseError
from .estimate import (
    EstimationResult,
    ExpectationPlan,
    as_rng,
    bevhm_plan,
    reachable_counters,
    register_width,
)
from .matfun import InverseBlockResult, inverse_block, inverse_poly
from .oracle import Counter, QueryCountedUnitary, merge_charges
from .simkern import householder_preparer, random_unitary

# Envelope constants for one solver run (alpha_A = 1). C_M and C_b follow from
# the phase-register width; C_A was calibrated once (scripts/calibrate_slep.py)
# and frozen with headroom.
C_M = 456
C_B = 911
C_A = 8800


@dataclass(eq=False)
class SLEPInstance:
    """Input of the solver: block access to ``A`` and ``M``, a preparer ``U_b`` and ``eps``.

    The optional dense ``a``, ``m``, ``b`` record the instance's source data
    (for files and the classical reference); when absent the reference is read
    off the block encodings.
    """

    n: int
    kappa: float
    block_a: BlockAccess
    block_m: BlockAccess
    eps: float
    u_b: QueryCountedUnitary
    a: np.ndarray | None = None
    m: np.ndarray | None = None
    b: np.ndarray | None = None

    def __post_init__(self):
        if self.kappa < 1:
            raise PromiseError("kappa must be >= 1")
        if self.block_a.delta != 0 or self.block_m.delta != 0:
            raise PromiseError("the solver takes exact block encodings of A and M")
        if self.block_a.n != self.n or self.block_m.n != self.n or self.u_b.n_qubits != self.n:
            raise ValueError(f"all inputs must act on {self.n} system qubits")
        if not 0 < self.eps <= self.block_m.alpha:
            raise PromiseError(f"eps must lie in (0, alpha_M = {self.block_m.alpha}]")

    @property
    def alpha_m(self) -> float:
        return self.block_m.alpha

    @property
    def alpha_a(self) -> float:
        return self.block_a.alpha

    @property
    def below_problem_range(self) -> bool:
        """True when ``eps < alpha_M / 2^n`` (accepted, but outside the problem's stated range)."""
        return self.eps < self.alpha_m / (1 << self.n)

    def matrices(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        a = self.a if self.a is not None else self.block_a.encoded()
        m = self.m if self.m is not None else self.block_m.encoded()
        b = self.b if self.b is not None else self.u_b.matrix[:, 0]
        return a, m, b


@dataclass(frozen=True)
class ClassicalTruth:
    x: np.ndarray
    value: float
    residual: float


def classical_solve(inst: SLEPInstance) -> ClassicalTruth:
    """Dense reference: ``x = A^{-1} b`` and ``x^+ M x``."""
    a, m, b = inst.matrices()
    if np.linalg.cond(a) > 1e12:
        raise PromiseError("A is singular to working precision")
    x = np.linalg.solve(a, b)
    value = np.vdot(x, m @ x)
    return ClassicalTruth(x, float(value.real), float(np.linalg.norm(a @ x - b)))


def choose_gamma(alpha_m: float) -> float:
    """``alpha_M`` if ``alpha_M >= 1``, otherwise ``sqrt(alpha_M)``."""
    return alpha_m if alpha_m >= 1 else math.sqrt(alpha_m)


@dataclass
class SLEPPlan:
    """Everything one solver run needs, built once."""

    instance: SLEPInstance
    gamma: float
    inverse: InverseBlockResult
    estimator: ExpectationPlan
    inverse_error: float
    scale: float

    def run(self, rng) -> EstimationResult:
        return self.estimator.run(as_rng(rng))

    def trials(self, seed: int, count: int) -> list[EstimationResult]:
        return self.estimator.trials(seed, count)

    def success_probability(self, truth: float) -> float:
        return self.estimator.success_probability(truth, self.instance.eps)


def bslep_plan(inst: SLEPInstance, mode: str = "auto") -> SLEPPlan:
    """Assemble the solver for ``inst``.

    A block access ``(alpha_A, a, 0, U_A)`` to ``A`` is also block access
    ``(1, a, 0, U_A)`` to ``A / alpha_A``, whose solution is ``alpha_A x``.
    The solver runs on that normalized system at accuracy ``eps alpha_A^2`` and
    divides the result by ``alpha_A^2``; with ``alpha_A = 1`` this is a no-op.
    """
    kappa, alpha_a = inst.kappa, inst.alpha_a
    eps = inst.eps * alpha_a**2
    gamma = choose_gamma(inst.alpha_m)
    unit_a = BlockAccess(1.0, inst.block_a.a, 0.0, inst.block_a.u, inst.n)
    inverse = inverse_block(unit_a, kappa, eps / (8 * gamma * kappa))
    inv = inverse.block
    a, m, b = inst.matrices()
    inverse_error = verify_block_encoding(inv, alpha_a * np.linalg.inv(a))

    extended_m = tensor_projector(inst.block_m, inv.a)
    prep = inv.u.matrix @ np.kron(np.eye(1 << inv.a), inst.u_b.matrix)
    preparer = QueryCountedUnitary(
        f"{inv.u.label}(1(x){inst.u_b.label})",
        merge_charges((inv.u.charges, 1), (inst.u_b.charges, 1)),
        dense=prep,
    )
    scale = inv.alpha**2
    inner = bevhm_plan(inst.n + inv.a, extended_m, eps / (2 * scale), preparer, mode)
    factor = scale / alpha_a**2
    estimator = ExpectationPlan(
        inner.amplitude,
        inner.scale * factor,
        inner.offset * factor,
        inst.eps,
        reachable_counters(inst.block_a.u, inst.block_m.u, inst.u_b),
    )
    return SLEPPlan(inst, gamma, inverse, estimator, inverse_error, scale)


def solve_bslep(inst: SLEPInstance, seed, mode: str = "auto") -> EstimationResult:
    """One run of the solver; within ``eps`` of ``x^+ M x`` with probability >= 2/3."""
    return bslep_plan(inst, mode).run(seed)


# ----------------------------------------------------------------------------
# Query accounting


def _log_term(alpha_m: float, kappa: float, eps: float) -> float:
    # floor at 1 so the envelope stays positive when alpha_M kappa^2 <= e * eps
    return max(1.0, math.log(alpha_m * kappa**2 / eps))


def query_envelopes(alpha_m: float, kappa: float, eps: float) -> dict[str, float]:
    base = alpha_m * kappa**2 / eps
    return {
        "U_M": C_M * base,
        "U_b": C_B * base,
        "U_A": C_A * base * kappa * _log_term(alpha_m, kappa, eps),
    }


def predicted_query_counts(alpha_m: float, kappa: float, eps: float) -> dict[str, int]:
    """Exact per-run counts from the circuit structure (``alpha_A = 1``).

    Phase estimation uses ``S`` ``2^t - 1`` times plus one preparer call; ``S``
    calls the controlled block twice (one ``U_M`` each) and the preparer four
    times (one ``U_b`` and ``2d + 1`` ``U_A`` each).
    """
    gamma = choose_gamma(alpha_m)
    inner_eps = (eps / 2) * (3 / (8 * kappa)) ** 2
    t = register_width(inner_eps / alpha_m)
    uses = (1 << t) - 1
    poly_eps = min(3 * (eps / (8 * gamma * kappa)) / (8 * kappa), 0.5)
    degree = inverse_poly(kappa, poly_eps).degree
    preparer_calls = 4 * uses + 1
    return {
        "U_M": 2 * uses,
        "U_b": preparer_calls,
        "U_A": preparer_calls * (2 * degree + 1),
    }


@dataclass
class QueryReport:
    counts: dict[str, int]
    envelopes: dict[str, float]
    ratios: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        self.ratios = {k: self.counts.get(k, 0) / v for k, v in self.envelopes.items()}

    @property
    def within(self) -> bool:
        return all(r <= 1.0 for r in self.ratios.values())

    def rows(self) -> list[tuple[str, int, float, float]]:
        return [(k, self.counts.get(k, 0), v, self.ratios[k]) for k, v in self.envelopes.items()]


def query_report(inst: SLEPInstance, result: EstimationResult) -> QueryReport:
    """Tabulate a run's counter deltas against the frozen envelopes."""
    return QueryReport(dict(result.query_counts), query_envelopes(inst.alpha_m, inst.kappa, inst.eps))


# ----------------------------------------------------------------------------
# Instances


def random_spectrum_matrix(
    dim: int, kappa: float, rng: np.random.Generator, scale: float = 1.0
) -> np.ndarray:
    """Hermitian matrix with eigenvalues in ``+-[1/kappa, 1] * scale`` in a random basis.

    One eigenvalue sits exactly at ``+-scale/kappa`` so the promise is tight.
    """
    lam = rng.uniform(1.0 / kappa, 1.0, dim) * rng.choice([-1.0, 1.0], dim)
    lam[0] = np.sign(lam[0]) / kappa
    q = random_unitary(dim, rng)
    a = (q * (scale * lam)) @ q.conj().T
    return (a + a.conj().T) / 2


def build_instance(
    a: np.ndarray,
    m: np.ndarray,
    b: np.ndarray,
    kappa: float,
    eps: float,
    alpha_a: float = 1.0,
    alpha_m: float | None = None,
) -> SLEPInstance:
    """Wrap dense data as black boxes: exact dilations of ``A`` and ``M``, Householder ``U_b``."""
    a = np.asarray(a, dtype=complex)
    m = np.asarray(m, dtype=complex)
    b = np.asarray(b, dtype=complex).reshape(-1)
    if abs(np.linalg.norm(b) - 1) > 1e-12:
        raise PromiseError("b must be a unit vector")
    if alpha_m is None:
        alpha_m = float(np.linalg.norm(m, 2))
    n = a.shape[0].bit_length() - 1
    block_a = dilate_exact(a, alpha_a, "U_A", Counter("U_A"))
    block_m = dilate_exact(m, alpha_m, "U_M", Counter("U_M"))
    u_b = QueryCountedUnitary.primitive("U_b", householder_preparer(b))
    lam = np.linalg.eigvalsh(a / alpha_a)
    if np.min(np.abs(lam)) < 1.0 / kappa - 1e-9:
        raise PromiseError("A/alpha_A has an eigenvalue inside (-1/kappa, 1/kappa)")
    return SLEPInstance(n, float(kappa), block_a, block_m, float(eps), u_b, a, m, b)


def random_instance(
    n: int, kappa: float, alpha_m: float, eps: float, rng: np.random.Generator
) -> SLEPInstance:
    """Random instance: ``A`` with spectrum in ``+-[1/kappa, 1]``, ``||M|| <= alpha_M``, random ``b``."""
    dim = 1 << n
    a = random_spectrum_matrix(dim, kappa, rng)
    lam_m = rng.uniform(-1.0, 1.0, dim)
    lam_m *= alpha_m / np.max(np.abs(lam_m))
    q = random_unitary(dim, rng)
    m = (q * lam_m) @ q.conj().T
    m = (m + m.conj().T) / 2
    b = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    b /= np.linalg.norm(b)
    return build_instance(a, m, b, kappa, eps, 1.0, alpha_m)


def _complex_lines(values: np.ndarray) -> list[str]:
    return [f"{float(z.real)!r} {float(z.imag)!r}" for z in np.asarray(values).reshape(-1)]


def write_instance(path, inst: SLEPInstance) -> None:
    """Text format: header (n, kappa, alpha_A, alpha_M, eps), then A, M row-major and b."""
    a, m, b = inst.matrices()
    lines = [
        f"n {inst.n}",
        f"kappa {inst.kappa!r}",
        f"alpha_A {inst.alpha_a!r}",
        f"alpha_M {inst.alpha_m!r}",
        f"eps {inst.eps!r}",
        "A",
        *_complex_lines(a),
        "M",
        *_complex_lines(m),
        "b",
        *_complex_lines(b),
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_instance(path) -> SLEPInstance:
    header: dict[str, str] = {}
    sections: dict[str, list[complex]] = {}
    current = None
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line in ("A", "M", "b"):
            current = sections.setdefault(line, [])
        elif current is None:
            key, _, value = line.partition(" ")
            header[key] = value.strip()
        else:
            re, im = line.split()
            current.append(complex(float(re), float(im)))
    try:
        n = int(header["n"])
        dim = 1 << n
        a = np.array(sections["A"]).reshape(dim, dim)
        m = np.array(sections["M"]).reshape(dim, dim)
        b = np.array(sections["b"])
        return build_instance(
            a,
            m,
            b,
            float(header["kappa"]),
            float(header["eps"]),
            float(header["alpha_A"]),
            float(header["alpha_M"]),
        )
    except KeyError as missing:
        raise ValueError(f"instance file lacks {missing}") from None
