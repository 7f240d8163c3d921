"""Phase estimation, amplitude estimation and expectation-value estimation.

Every estimator is split into a *plan* (build the unitaries and the exact
outcome distribution once) and a *sample* step (charge the queries one run of
the circuit makes and draw one measurement outcome). Running many seeded
trials therefore costs one simulation plus cheap sampling, while each trial is
still charged the full query cost.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np
import scipy.linalg

from .blockenc import BlockAccess, SparseAccess, control_block, sparse_to_block
from .errors import RegisterBudgetError
from .oracle import Counter, QueryCountedUnitary, delta_by_label, merge_charges, snapshot
from .simkern import (
    MAX_DENSE_QUBITS,
    MAX_QUBITS,
    H,
    StateVector,
    apply_to_subset,
    controlled,
    kron_all,
    make_rng,
    marginal_probabilities,
    qft_matrix,
    sample_index,
)

PHASE_MODES = ("auto", "spectral", "power", "faithful")
# "auto" simulates the circuit gate by gate up to this many qubits
_POWER_MODE_QUBITS = 14


def as_rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else make_rng(seed, 0)


def register_width(eps: float) -> int:
    """Phase-register qubits for accuracy ``eps``: ``ceil(log2(1/eps)) + 3``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    # the 1e-12 guard keeps exact powers of two from rounding up a whole qubit
    return max(0, math.ceil(math.log2(1.0 / eps) - 1e-12)) + 3


# ----------------------------------------------------------------------------
# Phase estimation


def fejer_distribution(phases: np.ndarray, weights: np.ndarray, t: int) -> np.ndarray:
    """Exact QPE outcome distribution for eigenphases with the given weights.

    ``P(m) = sum_j w_j |sin(2^t x/2) / (2^t sin(x/2))|^2`` with
    ``x = theta_j - 2 pi m / 2^t``.
    """
    size = 1 << t
    grid = 2 * np.pi * np.arange(size) / size
    probs = np.zeros(size)
    for theta, weight in zip(phases, weights):
        x = theta - grid
        half = np.sin(x / 2)
        near = np.abs(half) < 1e-12
        ratio = np.where(near, 1.0, np.sin(size * x / 2) / np.where(near, 1.0, size * half))
        probs += weight * ratio**2
    return probs / probs.sum()


def _spectral_distribution(v: np.ndarray, psi: np.ndarray, t: int) -> np.ndarray:
    schur, basis = scipy.linalg.schur(v, output="complex")
    eig = np.diag(schur)
    weights = np.abs(basis.conj().T @ psi) ** 2
    keep = weights > 1e-15
    return fejer_distribution(np.mod(np.angle(eig[keep]), 2 * np.pi), weights[keep], t)


def _circuit_distribution(v: np.ndarray, psi: np.ndarray, t: int, faithful: bool) -> np.ndarray:
    """Statevector run of the textbook circuit; ancilla ``k`` controls ``V^(2^(t-1-k))``."""
    n_sys = v.shape[0].bit_length() - 1
    state = StateVector(t + n_sys, np.kron(np.eye(1 << t)[0], psi))
    for k in range(t):
        state = apply_to_subset(H, state, [k])
    system = list(range(t, t + n_sys))
    cv = controlled(v)
    power = v
    for k in reversed(range(t)):
        if faithful:
            for _ in range(1 << (t - 1 - k)):
                state = apply_to_subset(cv, state, [k] + system)
        else:
            state = apply_to_subset(controlled(power), state, [k] + system)
            power = power @ power
    state = apply_to_subset(qft_matrix(t).conj().T, state, list(range(t)))
    probs = marginal_probabilities(state, list(range(t)))
    return probs / probs.sum()


@dataclass
class PhaseEstimationPlan:
    """QPE of ``v`` on the state ``w|0>`` with a ``t``-qubit phase register."""

    v: QueryCountedUnitary
    w: QueryCountedUnitary
    t: int
    probs: np.ndarray

    @classmethod
    def build(cls, v: QueryCountedUnitary, w: QueryCountedUnitary, eps: float, mode: str = "auto"):
        if v.dim != w.dim:
            raise ValueError("v and w act on different registers")
        if mode not in PHASE_MODES:
            raise ValueError(f"unknown phase-estimation mode {mode!r}")
        t = register_width(eps)
        n_sys = v.n_qubits
        if n_sys + t > MAX_QUBITS:
            raise RegisterBudgetError(
                f"phase estimation needs {n_sys} + {t} = {n_sys + t} qubits (cap {MAX_QUBITS})"
            )
        psi = w.matrix[:, 0]
        if mode == "auto":
            fits = n_sys + t <= _POWER_MODE_QUBITS and n_sys < MAX_DENSE_QUBITS
            mode = "power" if fits else "spectral"
        if mode == "spectral":
            probs = _spectral_distribution(v.matrix, psi, t)
        else:
            probs = _circuit_distribution(v.matrix, psi, t, faithful=mode == "faithful")
        return cls(v, w, t, probs)

    @property
    def grid(self) -> np.ndarray:
        return 2 * np.pi * np.arange(1 << self.t) / (1 << self.t)

    def charge(self) -> None:
        """Queries of one circuit run: ``2^t - 1`` uses of ``v``, one of ``w``."""
        self.v.charge((1 << self.t) - 1)
        self.w.charge(1)

    def sample(self, rng: np.random.Generator) -> float:
        self.charge()
        return float(self.grid[sample_index(self.probs, rng)])


def phase_estimate(
    v: QueryCountedUnitary, w: QueryCountedUnitary, eps: float, seed, mode: str = "auto"
) -> float:
    """Sample one eigenphase estimate in ``[0, 2 pi)`` of ``v`` on ``w|0>``."""
    return PhaseEstimationPlan.build(v, w, eps, mode).sample(as_rng(seed))


# ----------------------------------------------------------------------------
# Amplitude estimation


def reflection_about_zero(dim: int) -> np.ndarray:
    """``P_0 = 1 - 2|0><0|``."""
    p0 = np.eye(dim, dtype=complex)
    p0[0, 0] = -1.0
    return p0


def amplitude_operator(v: QueryCountedUnitary, w: QueryCountedUnitary) -> QueryCountedUnitary:
    """``S = W P_0 W^+ V W P_0 W^+ V^+``; two calls to ``V`` and four to ``W``."""
    if v.dim != w.dim:
        raise ValueError("v and w act on different registers")
    wm, vm = w.matrix, v.matrix
    refl = wm @ reflection_about_zero(w.dim) @ wm.conj().T
    s = refl @ vm @ refl @ vm.conj().T
    charges = merge_charges((v.charges, 2), (w.charges, 4))
    return QueryCountedUnitary(f"S[{v.label},{w.label}]", charges, dense=s)


def amplitude_from_phase(theta: float) -> float:
    """``|cos(theta/2)|``; the absolute value removes the branch ambiguity of ``theta``."""
    return abs(math.cos(theta / 2))


@dataclass
class AmplitudeEstimationPlan:
    """Estimates ``r = |<0|W^+ V W|0>|`` via phase estimation of ``S`` at accuracy ``2 eps``."""

    phase: PhaseEstimationPlan
    eps: float

    @classmethod
    def build(cls, eps: float, v: QueryCountedUnitary, w: QueryCountedUnitary, mode: str = "auto"):
        s = amplitude_operator(v, w)
        return cls(PhaseEstimationPlan.build(s, w, 2 * eps, mode), eps)

    def distribution(self) -> tuple[np.ndarray, np.ndarray]:
        """Possible outputs ``r~`` on the phase grid and their probabilities."""
        return np.abs(np.cos(self.phase.grid / 2)), self.phase.probs

    def sample(self, rng: np.random.Generator) -> float:
        return amplitude_from_phase(self.phase.sample(rng))


def amplitude_estimate(
    n: int, eps: float, v: QueryCountedUnitary, w: QueryCountedUnitary, seed, mode: str = "auto"
) -> float:
    """Sample one estimate of ``|<0^n|W^+ V W|0^n>|`` (within ``eps`` w.p. >= 2/3)."""
    if v.n_qubits != n or w.n_qubits != n:
        raise ValueError(f"v and w must act on {n} qubits")
    return AmplitudeEstimationPlan.build(eps, v, w, mode).sample(as_rng(seed))


# ----------------------------------------------------------------------------
# Expectation values


@dataclass
class EstimationResult:
    value: float
    query_counts: dict[str, int]
    trials_used: int
    target_eps: float
    amplitude: float = float("nan")


def reachable_counters(*boxes) -> list[Counter]:
    seen: dict[Counter, None] = {}
    for box in boxes:
        for counter in box.charges:
            seen.setdefault(counter, None)
    return list(seen)


@dataclass
class ExpectationPlan:
    """Shared sampling machinery: ``value = offset + scale * r~``."""

    amplitude: AmplitudeEstimationPlan
    scale: float
    offset: float
    eps: float
    counters: list[Counter]

    def run(self, rng: np.random.Generator) -> EstimationResult:
        before = snapshot(self.counters)
        r = self.amplitude.sample(rng)
        return EstimationResult(
            self.offset + self.scale * r, delta_by_label(before), 1, self.eps, r
        )

    def trials(self, seed: int, count: int) -> list[EstimationResult]:
        """``count`` independent runs; trial ``k`` replays from ``(seed, k)``."""
        return [self.run(make_rng(seed, k)) for k in range(count)]

    def outcome_distribution(self) -> tuple[np.ndarray, np.ndarray]:
        r, p = self.amplitude.distribution()
        return self.offset + self.scale * r, p

    def success_probability(self, truth: float, eps: float | None = None) -> float:
        """Exact probability that one run lands within ``eps`` of ``truth``."""
        eps = self.eps if eps is None else eps
        values, probs = self.outcome_distribution()
        return float(probs[np.abs(values - truth) <= eps].sum())


def evhm_preparer(a: int, v: QueryCountedUnitary) -> QueryCountedUnitary:
    """``1_a (x) H (x) V``: one call to ``V``."""
    mat = kron_all(np.eye(1 << a), H, v.matrix)
    return QueryCountedUnitary(f"1(x)H(x){v.label}", dict(v.charges), dense=mat)


def bevhm_plan(
    n: int,
    block_m: BlockAccess,
    eps: float,
    v: QueryCountedUnitary,
    mode: str = "auto",
    allow_inexact: bool = False,
) -> ExpectationPlan:
    """Plan for estimating ``<0|V^+ M V|0>`` from block access to ``M``.

    Amplitude estimation runs at accuracy ``eps / (2 alpha)`` on
    ``c-(M/alpha)`` with preparer ``1_a (x) H (x) V``, whose amplitude is
    ``r = (1 + <psi|M|psi>/alpha) / 2``; hence ``u~ = alpha (2 r~ - 1)`` keeps
    the sign of the expectation value.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if block_m.n != n or v.n_qubits != n:
        raise ValueError(f"block and V must act on {n} system qubits")
    if block_m.delta != 0:
        if not allow_inexact:
            raise ValueError("bevhm needs an exact (delta = 0) block encoding")
        block_m = dataclasses.replace(block_m, delta=0.0)
    controlled_m = control_block(block_m)
    w = evhm_preparer(block_m.a, v)
    alpha = block_m.alpha
    amp = AmplitudeEstimationPlan.build(eps / (2 * alpha), controlled_m.u, w, mode)
    counters = reachable_counters(block_m.u, v)
    return ExpectationPlan(amp, 2 * alpha, -alpha, eps, counters)


def bevhm(
    n: int, block_m: BlockAccess, eps: float, v: QueryCountedUnitary, seed, mode: str = "auto"
) -> EstimationResult:
    """One run of the block-access expectation-value estimator."""
    return bevhm_plan(n, block_m, eps, v, mode).run(as_rng(seed))


def sevhm_plan(
    n: int, sparse_m: SparseAccess, eps: float, v: QueryCountedUnitary, mode: str = "auto"
) -> ExpectationPlan:
    """Sparse access -> ``(d beta, n + 2, eps/2)`` block access -> estimator at ``eps/2``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    block = sparse_to_block(sparse_m, eps / 2)
    plan = bevhm_plan(n, block, eps / 2, v, mode, allow_inexact=True)
    plan.eps = eps
    return plan


def sevhm(
    n: int, sparse_m: SparseAccess, eps: float, v: QueryCountedUnitary, seed, mode: str = "auto"
) -> EstimationResult:
    """One run of the sparse-access expectation-value estimator."""
    return sevhm_plan(n, sparse_m, eps, v, mode).run(as_rng(seed))


def bevhm_query_bound(alpha: float, eps: float) -> int:
    """Exact ``U_M`` count of one run: ``2 (2^t - 1)`` with ``t`` for accuracy ``eps/alpha``."""
    t = register_width(eps / alpha)
    return 2 * ((1 << t) - 1)


def boost_median(estimator: Callable[[np.random.Generator], float], repetitions: int, seed) -> float:
    """Median of ``repetitions`` independent runs; run ``k`` draws from ``(seed, k)``."""
    if repetitions < 1 or repetitions % 2 == 0:
        raise ValueError("repetitions must be a positive odd integer")
    if repetitions == 1:
        return float(estimator(as_rng(seed)))
    base = seed if isinstance(seed, int) else int(as_rng(seed).integers(2**63))
    return float(np.median([estimator(make_rng(base, k)) for k in range(repetitions)]))


def success_rate(values: Iterable[float], truth: float, eps: float) -> float:
    values = np.asarray(list(values), dtype=float)
    return float(np.mean(np.abs(values - truth) <= eps))


def exact_expectation(m: np.ndarray, v: np.ndarray) -> float:
    """``<0|V^+ M V|0>`` by direct matrix evaluation."""
    psi = np.asarray(v)[:, 0]
    return float(np.real(np.vdot(psi, m @ psi)))
