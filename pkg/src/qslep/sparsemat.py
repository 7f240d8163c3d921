"""Packing a black-box function into the entries of a sparse Hermitian matrix.

The index map ``ind(i, j) = 2^n ((j - i) mod 2^n) + i`` is a bijection from
matrix positions to ``[2^{2n}]``. The ``(n, d)``-matrix encoding of
``g: [d 2^{n-1}] -> [0, beta]`` places ``g(k)`` on the diagonal when
``ind(i, i) = k`` and ``g(k)/2`` on both mirror positions of an off-diagonal
pair otherwise, which makes the encoding Hermitian, d-sparse and gives
``<+^n|M|+^n> = (d/2) mean(g)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .blockenc import SparseAccess
from .oracle import Counter, FunctionOracle, QueryCountedUnitary, merge_charges


def ind(n: int, i, j):
    """``2^n ((j - i) mod 2^n) + i``; accepts scalars or integer arrays."""
    size = 1 << n
    i_arr, j_arr = np.asarray(i), np.asarray(j)
    if np.any((i_arr < 0) | (i_arr >= size) | (j_arr < 0) | (j_arr >= size)):
        raise ValueError(f"indices out of range for n = {n}")
    out = size * ((j_arr - i_arr) % size) + i_arr
    return int(out) if out.ndim == 0 else out


def ind_inverse(n: int, k):
    """Inverse of :func:`ind`: ``i = k mod 2^n``, ``j = (i + k // 2^n) mod 2^n``."""
    size = 1 << n
    k_arr = np.asarray(k)
    if np.any((k_arr < 0) | (k_arr >= size * size)):
        raise ValueError(f"k out of range for n = {n}")
    i = k_arr % size
    j = (i + k_arr // size) % size
    if k_arr.ndim == 0:
        return int(i), int(j)
    return i, j


def ind_table(n: int) -> np.ndarray:
    size = 1 << n
    rows, cols = np.indices((size, size))
    return ind(n, rows, cols)


@dataclass(frozen=True, eq=False)
class MatrixEncoding:
    """The ``(n, d)``-matrix encoding of ``g`` on ``[d 2^{n-1}]``."""

    n: int
    d: int
    beta: float
    g: FunctionOracle

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not 1 <= self.d <= 1 << self.n:
            raise ValueError(f"d = {self.d} outside 1..{1 << self.n}")
        if self.g.N != self.domain_size:
            raise ValueError(
                f"g has domain size {self.g.N}, the encoding needs d 2^(n-1) = {self.domain_size}"
            )
        if self.g.beta != self.beta:
            raise ValueError("g's range bound differs from the encoding's beta")

    @property
    def domain_size(self) -> int:
        return self.d << (self.n - 1)

    def code_matrix(self) -> np.ndarray:
        """Entries in units of ``beta / (2 (2^r - 1))`` as exact integers."""
        n, size, limit = self.n, 1 << self.n, self.domain_size
        k_ij = ind_table(n)
        k_ji = k_ij.T
        codes = self.g.codes
        out = np.zeros((size, size), dtype=np.int64)
        upper = k_ij < limit
        lower = (k_ji < limit) & ~upper
        out[upper] = codes[k_ij[upper]]
        out[lower] = codes[k_ji[lower]]
        diag = np.arange(size)
        out[diag, diag] *= 2  # diagonal carries g, off-diagonal g/2
        return out

    @property
    def unit(self) -> float:
        return self.beta / (2 * self.g.denominator)


def build_matrix_encoding(enc: MatrixEncoding) -> np.ndarray:
    """Dense ``M`` with ``M_ii = g(ind(i,i))`` and mirrored ``g(ind(i,j))/2`` off the diagonal."""
    return (enc.code_matrix() * enc.unit).astype(complex)


def entry_sum_exact(enc: MatrixEncoding) -> tuple[Fraction, Fraction]:
    """``(sum_ij M_ij, sum_k g(k))`` as exact rationals of the fixed-point grid."""
    unit = Fraction(enc.beta) / (2 * enc.g.denominator)
    return int(enc.code_matrix().sum()) * unit, 2 * int(enc.g.codes.sum()) * unit


def location_offsets(d: int) -> np.ndarray:
    """Column offsets ``l - floor(d/2)`` for ``l`` in ``[d]``."""
    return np.arange(d) - d // 2


def encoding_oracles(
    enc: MatrixEncoding, val_counter: Counter | None = None, loc_counter: Counter | None = None
) -> SparseAccess:
    """Sparse access ``(d, beta, O_val, O_loc)`` to the matrix encoding of ``g``.

    ``O_val`` computes ``ind``, queries ``g`` once and uncomputes ``ind``;
    every use charges one query to ``g``'s counters. ``O_loc`` maps
    ``(j, l) -> (j + l - floor(d/2)) mod 2^n`` and never touches ``g``. The
    location list may include structural zeros; at build time every nonzero
    of the encoding is checked to lie among the first ``d`` listed columns.
    """
    n, d, size = enc.n, enc.d, 1 << enc.n
    codes = enc.code_matrix()
    o_val = QueryCountedUnitary(
        "O_val",
        merge_charges(({val_counter or Counter("O_val"): 1}, 1), (enc.g.charges, 1)),
        xor_table=codes.reshape(-1),
        xor_bits=enc.g.bits + 1,
    )
    j = np.repeat(np.arange(size), size)
    l = np.tile(np.arange(size), size)
    loc_perm = (j << n) | ((j + l - d // 2) % size)
    o_loc = QueryCountedUnitary("O_loc", {loc_counter or Counter("O_loc"): 1}, perm=loc_perm)
    unit = enc.unit
    access = SparseAccess(n, d, enc.beta, o_val, o_loc, lambda c: np.asarray(c) * unit + 0j)

    listed = np.zeros((size, size), dtype=bool)
    listed[np.arange(size)[:, None], access.locations()] = True
    if np.any((codes != 0) & ~listed):
        raise AssertionError("location oracle misses a nonzero entry of the encoding")
    return access


def mean_from_expectation(n: int, d: int, expectation: float) -> float:
    """Mean of ``g`` from ``<+^n|M|+^n>``: ``2 expectation / d``."""
    return 2.0 * expectation / d


def plus_expectation(m: np.ndarray) -> float:
    """``<+^n|M|+^n>``, the average of all entries."""
    return float(np.real(np.sum(m)) / m.shape[0])


# ----------------------------------------------------------------------------
# Instance files


def write_encoding(path, enc: MatrixEncoding) -> None:
    """Header lines ``n``, ``d``, ``beta``, ``bits`` then ``g(k)`` one per line."""
    lines = [f"n {enc.n}", f"d {enc.d}", f"beta {enc.beta!r}", f"bits {enc.g.bits}", "g"]
    lines += [repr(float(v)) for v in enc.g.values]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_encoding(path, label: str = "g") -> MatrixEncoding:
    header: dict[str, str] = {}
    values: list[float] = []
    in_body = False
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if in_body:
            values.append(float(line))
        elif line == "g":
            in_body = True
        else:
            key, _, value = line.partition(" ")
            header[key] = value.strip()
    try:
        n, d = int(header["n"]), int(header["d"])
        beta, bits = float(header["beta"]), int(header.get("bits", 16))
    except KeyError as missing:
        raise ValueError(f"instance file lacks header field {missing}") from None
    g = FunctionOracle.from_values(values, beta, bits, label=label)
    return MatrixEncoding(n, d, beta, g)
