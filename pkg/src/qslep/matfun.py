"""Polynomial eigenvalue transformations and block access to matrix inverses."""
from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev
from scipy.optimize import linprog

from .blockenc import BlockAccess, embed_block
from .errors import PromiseError
from .oracle import QueryCountedUnitary, merge_charges

DEGREE_CAP = 4000
# Keep the fitted polynomial strictly inside the unit band: the constraint is
# only imposed on a grid, and the slack absorbs overshoot between grid points.
_BAND = 0.995
# Demand this fraction of the requested accuracy on the dense verification grid.
_ACCURACY_MARGIN = 0.9


@dataclass(frozen=True)
class Polynomial:
    """A real polynomial in the Chebyshev basis, ``sum_k c_k T_k(x)``."""

    coefficients: tuple[float, ...]

    @classmethod
    def from_array(cls, coefficients) -> "Polynomial":
        c = np.trim_zeros(np.asarray(coefficients, dtype=float), "b")
        return cls(tuple(float(x) for x in (c if len(c) else [0.0])))

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    @property
    def parity(self) -> str:
        c = np.asarray(self.coefficients)
        odd = np.any(c[1::2] != 0)
        even = np.any(c[0::2] != 0)
        if odd and even:
            return "mixed"
        return "odd" if odd else "even"

    def __call__(self, x):
        return chebyshev.chebval(x, self.coefficients)

    def scaled(self, factor: float) -> "Polynomial":
        return Polynomial(tuple(factor * c for c in self.coefficients))

    def max_abs(self, points: int = 20001) -> float:
        """Grid maximum of ``|P|`` on ``[-1, 1]``."""
        return float(np.max(np.abs(self(np.linspace(-1.0, 1.0, points)))))

    def of_matrix(self, h: np.ndarray) -> np.ndarray:
        """``P(h)`` for a Hermitian matrix, evaluated on its eigenvalues."""
        lam, vec = np.linalg.eigh((h + h.conj().T) / 2)
        return (vec * self(lam)) @ vec.conj().T


def _odd_chebyshev_basis(x: np.ndarray, degree: int) -> np.ndarray:
    return chebyshev.chebvander(x, degree)[:, 1::2]


def _fit_inverse(kappa: float, degree: int) -> tuple[np.ndarray, float, float]:
    """Minimax odd fit of ``(3/(4 kappa))/x`` on ``[1/kappa, 1]`` with ``|P| <= _BAND``.

    Solved as a linear program over the odd Chebyshev coefficients. Returns
    the coefficients plus the error and ``max |P|`` on dense verification grids.
    """
    delta = 1.0 / kappa
    m = max(1500, 12 * degree)
    u = np.cos(np.pi * (np.arange(m) + 0.5) / m)
    x_fit = (1 + delta) / 2 + (1 - delta) / 2 * u
    x_gap = delta / 2 + delta / 2 * u
    b_fit = _odd_chebyshev_basis(x_fit, degree)
    b_gap = _odd_chebyshev_basis(x_gap, degree)
    target = 0.75 * delta / x_fit
    k = b_fit.shape[1]
    ones = np.ones((m, 1))
    zeros = np.zeros((m, 1))
    a_ub = np.vstack(
        [
            np.hstack([b_fit, -ones]),
            np.hstack([-b_fit, -ones]),
            np.hstack([b_fit, zeros]),
            np.hstack([-b_fit, zeros]),
            np.hstack([b_gap, zeros]),
            np.hstack([-b_gap, zeros]),
        ]
    )
    b_ub = np.concatenate([target, -target] + [np.full(m, _BAND)] * 4)
    cost = np.zeros(k + 1)
    cost[-1] = 1.0
    res = linprog(
        cost, A_ub=a_ub, b_ub=b_ub, bounds=[(None, None)] * k + [(0, None)], method="highs"
    )
    if not res.success:
        raise RuntimeError(f"minimax fit failed at degree {degree}: {res.message}")
    coef = np.zeros(degree + 1)
    coef[1::2] = res.x[:k]
    xs = np.linspace(delta, 1.0, 20001)
    err = float(np.max(np.abs(chebyshev.chebval(xs, coef) - 0.75 * delta / xs)))
    peak = float(np.max(np.abs(chebyshev.chebval(np.linspace(0.0, 1.0, 40001), coef))))
    return coef, err, peak


@functools.lru_cache(maxsize=128)
def _inverse_poly_cached(kappa: float, eps: float, max_degree: int) -> Polynomial:
    def good(fit):
        _, err, peak = fit
        return err <= _ACCURACY_MARGIN * eps and peak <= 1.0

    degree, last_bad = 1, -1
    fit = _fit_inverse(kappa, degree)
    while not good(fit):
        last_bad = degree
        if degree >= max_degree:
            raise ValueError(
                f"inverse polynomial for kappa={kappa}, eps={eps} needs degree above "
                f"{max_degree}; best achieved error {fit[1]:.3g} at degree {degree}"
            )
        degree = min(2 * degree + 1, max_degree if max_degree % 2 else max_degree - 1)
        fit = _fit_inverse(kappa, degree)
    # bisect over odd degrees in (last_bad, degree]
    lo, hi = last_bad, degree
    while hi - lo > 2:
        mid = (lo + hi) // 2
        mid += 1 - mid % 2
        if mid >= hi:
            break
        trial = _fit_inverse(kappa, mid)
        if good(trial):
            hi, fit = mid, trial
        else:
            lo = mid
    return Polynomial.from_array(fit[0])


def inverse_poly(kappa: float, eps: float, max_degree: int = DEGREE_CAP) -> Polynomial:
    """Odd polynomial with ``|P(x) - (3/(4 kappa))/x| < eps`` on ``1/kappa <= |x| <= 1``.

    Also ``|P(x)| <= 1`` on ``[-1, 1]``. The coefficients come from a minimax
    linear program; the smallest odd degree passing a 20001-point check (with a
    10% accuracy margin) is returned. Results are cached on ``(kappa, eps)``.

    Raises
    ------
    ValueError
        If ``eps`` cannot be met below ``max_degree``; the message carries the
        best error achieved.
    """
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    if not 0 < eps <= 0.5:
        raise ValueError("eps must lie in (0, 1/2]")
    return _inverse_poly_cached(float(kappa), float(eps), int(max_degree))


def apply_polynomial(b: BlockAccess, p: Polynomial, sigma: float) -> BlockAccess:
    """Block access ``(1, a + 2, 4 d sqrt(delta/alpha) + sigma)`` to ``P(A/alpha)``.

    The unitary is realized as an exact dilation of ``P(A/alpha)`` computed on
    the eigenvalues of the input block; one use is charged as ``2d + 1`` calls
    to the input unitary, the cost of the signal-processing circuit it stands
    in for.
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if p.parity == "mixed":
        raise ValueError("the transformation needs a polynomial of definite parity")
    if p.max_abs() > 0.5 + 1e-12:
        raise ValueError("polynomial must satisfy |P(x)| <= 1/2 on [-1, 1]")
    block = b.block()
    transformed = p.of_matrix(block)
    a = b.a + 2
    u = embed_block(transformed, a, b.n)
    queries = 2 * p.degree + 1
    charges = merge_charges((b.u.charges, queries))
    box = QueryCountedUnitary(f"P({b.u.label})", charges, dense=u)
    delta = 4 * p.degree * np.sqrt(b.delta / b.alpha) + sigma
    return BlockAccess(1.0, a, float(delta), box, b.n)


@dataclass(frozen=True)
class InverseBlockResult:
    block: BlockAccess
    degree_used: int
    queries_per_application: int


def check_spectral_gap(b: BlockAccess, kappa: float, tol: float = 1e-9) -> np.ndarray:
    """Eigenvalues of ``A/alpha``; raises if any lies inside ``(-1/kappa, 1/kappa)``."""
    lam = np.linalg.eigvalsh((b.block() + b.block().conj().T) / 2)
    if np.min(np.abs(lam)) < 1.0 / kappa - tol:
        raise PromiseError(
            f"spectrum of A/alpha reaches {np.min(np.abs(lam)):.6g}, inside the gap 1/kappa = {1 / kappa:.6g}"
        )
    return lam


def inverse_block(b: BlockAccess, kappa: float, eps: float) -> InverseBlockResult:
    """Block access ``(8 kappa / (3 alpha_A), a + 2, eps)`` to ``A^{-1}``.

    Half the error budget goes to the polynomial approximation and half is
    declared for the transformation (which the exact dilation realizes with no
    error). With ``alpha_A = 1`` the scale is the familiar ``8 kappa / 3``.
    """
    if b.delta != 0:
        raise ValueError("inverse_block needs an exact (delta = 0) block encoding of A")
    if eps <= 0:
        raise ValueError("eps must be positive")
    check_spectral_gap(b, kappa)
    poly_eps = min(3 * eps * b.alpha / (8 * kappa), 0.5)
    p = inverse_poly(kappa, poly_eps).scaled(0.5)
    sigma = 3 * eps * b.alpha / (16 * kappa)
    transformed = apply_polynomial(b, p, sigma)
    scale = 8 * kappa / (3 * b.alpha)
    box = QueryCountedUnitary(
        f"inv({b.u.label})", dict(transformed.u.charges), dense=transformed.u.matrix
    )
    block = BlockAccess(scale, transformed.a, float(eps), box, b.n)
    return InverseBlockResult(block, p.degree, 2 * p.degree + 1)
