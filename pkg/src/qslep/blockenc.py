"""Block encodings: representation, verification and constructors.

A :class:`BlockAccess` ``(alpha, a, delta, U)`` promises
``||H - alpha <0^a|U|0^a>|| <= delta``. Ancilla qubits come first, so the
encoded block is the upper-left ``2^n x 2^n`` corner of ``U``.

Composite constructors build their unitary from the component matrices and
charge the component queries analytically: one invocation of the composite
increments the component counters by exactly the number of component calls the
circuit makes.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import PromiseError
from .oracle import Counter, QueryCountedUnitary, merge_charges
from .simkern import (
    HERMITIAN_TOL,
    X,
    complete_unitary,
    controlled,
    expand_operator,
    is_hermitian,
    qubit_permutation,
    reorder_qubits,
)


@dataclass(frozen=True, eq=False)
class BlockAccess:
    """``(alpha, a, delta, U)`` block access to an ``n``-qubit Hermitian matrix."""

    alpha: float
    a: int
    delta: float
    u: QueryCountedUnitary
    n: int

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.a < 0 or self.delta < 0:
            raise ValueError("ancilla count and delta must be nonnegative")
        if self.u.dim != 1 << (self.n + self.a):
            raise ValueError(
                f"unitary of dimension {self.u.dim} does not act on {self.n}+{self.a} qubits"
            )

    @property
    def n_total(self) -> int:
        return self.n + self.a

    def block(self) -> np.ndarray:
        """``<0^a|U|0^a>`` (uncharged read-off)."""
        size = 1 << self.n
        return self.u.matrix[:size, :size]

    def encoded(self) -> np.ndarray:
        """``alpha <0^a|U|0^a>``, the matrix this access realizes."""
        return self.alpha * self.block()


def verify_block_encoding(b: BlockAccess, h: np.ndarray) -> float:
    """Operator-norm distance ``||h - alpha <0^a|U|0^a>||``."""
    h = np.asarray(h, dtype=complex)
    if h.shape != (1 << b.n, 1 << b.n):
        raise ValueError(f"matrix of shape {h.shape} does not act on {b.n} qubits")
    return float(np.linalg.norm(h - b.encoded(), 2))


def hermitian_sqrt_complement(b: np.ndarray) -> np.ndarray:
    """``sqrt(1 - b^2)`` for a Hermitian contraction ``b``, via its eigenbasis."""
    lam, vec = np.linalg.eigh(b)
    root = np.sqrt(np.clip(1.0 - lam**2, 0.0, None))
    return (vec * root) @ vec.conj().T


def dilate_exact(
    h: np.ndarray, alpha: float, label: str = "U_M", counter: Counter | None = None
) -> BlockAccess:
    """Exact one-ancilla block encoding ``[[B, S], [S, -B]]`` of ``h`` with ``B = h/alpha``."""
    h = np.asarray(h, dtype=complex)
    if not is_hermitian(h, HERMITIAN_TOL * max(1.0, np.abs(h).max(initial=0.0))):
        raise PromiseError("dilation needs a Hermitian matrix")
    h = (h + h.conj().T) / 2
    norm = np.linalg.norm(h, 2)
    if alpha < norm * (1 - 1e-12):
        raise PromiseError(f"alpha = {alpha} is below the spectral norm {norm}")
    b = h / alpha
    s = hermitian_sqrt_complement(b)
    u = np.block([[b, s], [s, -b]])
    n = h.shape[0].bit_length() - 1
    return BlockAccess(float(alpha), 1, 0.0, QueryCountedUnitary.primitive(label, u, counter), n)


def unitary_access(u: np.ndarray, label: str = "U", counter: Counter | None = None) -> BlockAccess:
    """A Hermitian unitary block-encodes itself with no ancillas."""
    u = np.asarray(u, dtype=complex)
    n = u.shape[0].bit_length() - 1
    return BlockAccess(1.0, 0, 0.0, QueryCountedUnitary.primitive(label, u, counter), n)


def _require_exact(b: BlockAccess, what: str) -> None:
    if b.delta != 0:
        raise ValueError(f"{what} needs an exact (delta = 0) block encoding")


def control_block(b: BlockAccess) -> BlockAccess:
    """Block access ``(1, a, 0)`` to ``c-(M/alpha) = |0><0| (x) 1 + |1><1| (x) M/alpha``.

    Register layout: ``[a ancillas][control][n system]``; the unitary is
    ``c-U_M`` with the control sitting just after the ancillas, so one query to
    ``U_M`` per use.
    """
    _require_exact(b, "control_block")
    a, n = b.a, b.n
    cu = controlled(b.u.matrix)  # natural order: [control][ancillas][system]
    order = [a] + list(range(a)) + list(range(a + 1, a + 1 + n))
    u = reorder_qubits(cu, order)
    box = QueryCountedUnitary(f"c-({b.u.label})", dict(b.u.charges), dense=u)
    return BlockAccess(1.0, a, 0.0, box, n + 1)


def tensor_projector(b: BlockAccess, m: int) -> BlockAccess:
    """Block access ``(alpha, a+1, 0)`` to ``|0^m><0^m| (x) M``.

    Register layout: ``[flag][a ancillas][m projector qubits][n system]``. The
    circuit flips the flag when the projector register reads ``0^m``, calls
    ``U_M`` on ``(ancillas, system)``, then applies ``X`` to the flag; the flag
    returns to ``|0>`` only on the ``0^m`` branch. One query to ``U_M`` per use.
    """
    _require_exact(b, "tensor_projector")
    if m < 1:
        raise ValueError("m must be >= 1")
    a, n = b.a, b.n
    total = 1 + a + m + n
    flag_regs = [0] + list(range(1 + a, 1 + a + m))
    zero_controlled_not = np.eye(1 << (1 + m), dtype=complex)
    # swap |0,0^m> <-> |1,0^m> on (flag, projector register)
    zero_controlled_not[[0, 1 << m]] = zero_controlled_not[[1 << m, 0]]
    step1 = expand_operator(zero_controlled_not, flag_regs, total)
    system = list(range(1, 1 + a)) + list(range(1 + a + m, total))
    step2 = expand_operator(b.u.matrix, system, total)
    step3 = expand_operator(X, [0], total)
    u = step3 @ step2 @ step1
    box = QueryCountedUnitary(f"proj-({b.u.label})", dict(b.u.charges), dense=u)
    return BlockAccess(b.alpha, a + 1, 0.0, box, m + n)


def multiply_blocks(b_a: BlockAccess, b_b: BlockAccess) -> BlockAccess:
    """Block access ``(alpha_A alpha_B, a_A + a_B, 0)`` to ``AB``.

    Register layout ``[a_A][a_B][system]``; ``U_AB = U_A U_B`` with each factor
    acting on its own ancillas plus the system. One query to each per use.
    """
    _require_exact(b_a, "multiply_blocks")
    _require_exact(b_b, "multiply_blocks")
    if b_a.n != b_b.n:
        raise ValueError("factors act on different system sizes")
    n, aa, ab = b_a.n, b_a.a, b_b.a
    total = aa + ab + n
    system = list(range(aa + ab, total))
    ua = expand_operator(b_a.u.matrix, list(range(aa)) + system, total)
    ub = expand_operator(b_b.u.matrix, list(range(aa, aa + ab)) + system, total)
    charges = merge_charges((b_a.u.charges, 1), (b_b.u.charges, 1))
    box = QueryCountedUnitary(f"({b_a.u.label})({b_b.u.label})", charges, dense=ua @ ub)
    return BlockAccess(b_a.alpha * b_b.alpha, aa + ab, 0.0, box, n)


def embed_block(matrix: np.ndarray, a: int, n: int) -> np.ndarray:
    """A unitary on ``a + n`` qubits whose upper-left block is ``matrix``.

    ``matrix`` must be a Hermitian contraction; it is dilated on one ancilla and
    padded with the identity over the remaining ancilla space.
    """
    if a < 1:
        raise ValueError("dilation needs at least one ancilla")
    s = hermitian_sqrt_complement(matrix)
    dil = np.block([[matrix, s], [s, -matrix]])
    size = 1 << (a + n)
    u = np.eye(size, dtype=complex)
    u[: dil.shape[0], : dil.shape[0]] = dil
    return u


# ----------------------------------------------------------------------------
# Sparse access


@dataclass(frozen=True, eq=False)
class SparseAccess:
    """``(d, beta, O_val, O_loc)`` oracles for a d-sparse Hermitian matrix.

    ``o_val``: XOR oracle ``|j>|k>|z> -> |j>|k>|z xor code(H_jk)>`` on
    ``2n + w`` qubits; ``decode`` maps value-register codes back to entries.
    ``o_loc``: in-place permutation ``|j>|l> -> |j>|nu(j, l)>`` on ``2n`` qubits
    whose first ``d`` outputs per row cover every nonzero column of row ``j``.
    """

    n: int
    d: int
    beta: float
    o_val: QueryCountedUnitary
    o_loc: QueryCountedUnitary
    decode: Callable[[np.ndarray], np.ndarray]
    quantization: float = 0.0

    def __post_init__(self):
        if not 1 <= self.d <= 1 << self.n:
            raise ValueError(f"sparsity {self.d} outside 1..{1 << self.n}")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if len(self.o_val.xor_table) != 1 << (2 * self.n):
            raise ValueError("value oracle must be indexed by (row, column) pairs")
        if self.o_loc.dim != 1 << (2 * self.n):
            raise ValueError("location oracle must act on two n-qubit registers")

    def entries(self) -> np.ndarray:
        """Dense matrix the value oracle encodes (uncharged, desk scale)."""
        size = 1 << self.n
        return self.decode(self.o_val.xor_table).reshape(size, size)

    def entry(self, j: int, k: int) -> complex:
        return complex(self.decode(self.o_val.xor_table[[(j << self.n) | k]])[0])

    def locations(self) -> np.ndarray:
        """``nu(j, l)`` for all ``j`` and ``l < d`` (uncharged)."""
        size = 1 << self.n
        cols = self.o_loc.permutation().reshape(size, size) & (size - 1)
        return cols[:, : self.d]

    def location(self, j: int, l: int) -> int:
        return int(self.locations()[j, l])


def signed_codec(bits: int, beta: float) -> tuple[Callable, Callable]:
    """Encode/decode complex entries as two ``bits``-bit two's-complement parts.

    The value register holds ``re`` in its high half and ``im`` in its low
    half; each part represents ``beta * k / (2^(bits-1) - 1)``, rounded toward
    zero.
    """
    scale = (1 << (bits - 1)) - 1
    mask = (1 << bits) - 1

    def encode(z: np.ndarray) -> np.ndarray:
        # truncation toward zero keeps |decoded| <= |z| <= beta
        re = np.trunc(np.real(z) / beta * scale).astype(np.int64) & mask
        im = np.trunc(np.imag(z) / beta * scale).astype(np.int64) & mask
        return (re << bits) | im

    def signed(part: np.ndarray) -> np.ndarray:
        return np.where(part >> (bits - 1), part - (1 << bits), part)

    def decode(code: np.ndarray) -> np.ndarray:
        code = np.asarray(code, dtype=np.int64)
        re = signed((code >> bits) & mask)
        im = signed(code & mask)
        return beta * (re + 1j * im) / scale

    return encode, decode


def location_table(h: np.ndarray, d: int) -> np.ndarray:
    """Per-row column permutations listing the nonzero columns first."""
    size = h.shape[0]
    table = np.empty((size, size), dtype=np.int64)
    for j in range(size):
        nz = np.flatnonzero(h[j])
        if len(nz) > d:
            raise PromiseError(f"row {j} has {len(nz)} nonzeros, more than d = {d}")
        rest = np.setdiff1d(np.arange(size), nz)
        table[j] = np.concatenate([nz, rest])
    return table


def sparse_access_from_dense(
    h: np.ndarray,
    d: int | None = None,
    beta: float | None = None,
    bits: int = 28,
    val_counter: Counter | None = None,
    loc_counter: Counter | None = None,
) -> SparseAccess:
    """Sparse-access oracles for a dense Hermitian matrix (desk-scale fixture).

    Entries are quantized to a signed fixed-point grid of ``bits`` bits per
    real/imaginary part; the upper triangle is encoded and mirrored so the
    encoded matrix is exactly Hermitian.
    """
    h = np.asarray(h, dtype=complex)
    if not is_hermitian(h, HERMITIAN_TOL * max(1.0, np.abs(h).max(initial=0.0))):
        raise PromiseError("sparse access needs a Hermitian matrix")
    size = h.shape[0]
    n = size.bit_length() - 1
    if d is None:
        d = max(1, int(np.max(np.count_nonzero(h, axis=1))))
    if beta is None:
        beta = float(np.abs(h).max(initial=0.0)) or 1.0
    if np.abs(h).max(initial=0.0) > beta * (1 + 1e-12):
        raise PromiseError(f"beta = {beta} is below the max-norm of the matrix")
    encode, decode = signed_codec(bits, beta)
    upper = np.triu(h)
    codes = encode(upper)
    # mirror: code(H_kj) = code(conj(H_jk)) for k > j
    lower = encode(np.conj(upper.T))
    codes = np.where(np.tri(size, k=-1, dtype=bool), lower, codes)
    table = location_table(h, d)
    j = np.repeat(np.arange(size), size)
    loc_perm = (j << n) | table.reshape(-1)
    o_val = QueryCountedUnitary(
        "O_val",
        {val_counter or Counter("O_val"): 1},
        xor_table=codes.reshape(-1),
        xor_bits=2 * bits,
    )
    o_loc = QueryCountedUnitary("O_loc", {loc_counter or Counter("O_loc"): 1}, perm=loc_perm)
    quant = float(np.linalg.norm(decode(codes) - h, 2))
    return SparseAccess(n, d, float(beta), o_val, o_loc, decode, quant)


def _walk_preparation(s: SparseAccess, amplitudes: np.ndarray) -> np.ndarray:
    """Unitary ``T`` with ``T|0,0,0^n>|k> = |0> (1/sqrt d) sum_l |nu(k,l)>(c|0> + s|1>) |k>``.

    Register layout ``[row flag][column flag][column n][row n]``; the row
    register is the system. ``amplitudes[k, l]`` is the flag-0 amplitude for
    the l-th listed column of row ``k``.
    """
    n, d = s.n, s.d
    size = 1 << n
    a = n + 2
    dim = 1 << (a + n)
    locs = s.locations()
    flag1 = np.sqrt(np.clip(1.0 - np.abs(amplitudes) ** 2, 0.0, None))
    cols = np.zeros((dim, size), dtype=complex)
    for k in range(size):
        for l in range(d):
            col = int(locs[k, l])
            # column flag = qubit 1, column register = qubits 2..n+1
            idx0 = ((0 << n) | col) << n | k
            idx1 = ((1 << n) | col) << n | k
            cols[idx0, k] += amplitudes[k, l] / np.sqrt(d)
            cols[idx1, k] += flag1[k, l] / np.sqrt(d)
    return complete_unitary(cols, list(range(size)), dim)


def sparse_to_block(s: SparseAccess, eps: float) -> BlockAccess:
    """``(d beta, n + 2, eps)`` block access from sparse access.

    ``U_H = T_L^dagger U_swap T_R``: ``T_R`` prepares column states with
    flag amplitudes ``sqrt(conj(H_kl)/beta)`` (principal root) and ``T_L`` with
    ``conj(sqrt(H_kl/beta))``; the swap exchanges the (flag, index) register
    pairs, so ``<0|U_H|0>_{jk} = H_jk / (d beta)`` including entries on the
    negative real axis. Each preparation computes the location, queries the
    value and uncomputes it: 2 ``O_val`` + 1 ``O_loc`` per ``T``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    h = s.entries()
    n, d, beta = s.n, s.d, s.beta
    if np.abs(h).max(initial=0.0) > beta * (1 + 1e-12):
        raise PromiseError(f"beta = {beta} is below the max-norm of the encoded matrix")
    if s.quantization > eps:
        raise ValueError(
            f"oracle quantization error {s.quantization:.3g} exceeds eps = {eps:.3g}; "
            "use a wider value register"
        )
    locs = s.locations()
    rows = np.arange(1 << n)[:, None]
    vals = h[rows, locs] / beta
    conj_vals = np.conj(vals)
    # drop signed zeros so negative reals take the +i branch of the principal root
    conj_vals = conj_vals.real + 1j * (conj_vals.imag + 0.0)
    t_right = _walk_preparation(s, np.sqrt(conj_vals))
    t_left = _walk_preparation(s, np.conj(np.sqrt(vals)))
    a = n + 2
    total = a + n
    # swap (row flag, row register) <-> (column flag, column register)
    order = [1, 0] + list(range(a, total)) + list(range(2, a))
    swap = qubit_permutation(order)
    u = t_left.conj().T @ swap @ t_right
    charges = merge_charges((s.o_val.charges, 4), (s.o_loc.charges, 2))
    box = QueryCountedUnitary("U_H", charges, dense=u)
    return BlockAccess(d * beta, a, float(eps), box, n)
