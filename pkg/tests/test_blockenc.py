import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qslep.blockenc import (
    BlockAccess,
    control_block,
    dilate_exact,
    multiply_blocks,
    sparse_access_from_dense,
    sparse_to_block,
    tensor_projector,
    unitary_access,
    verify_block_encoding,
)
from qslep.errors import PromiseError
from qslep.oracle import QueryCountedUnitary
from qslep.simkern import I2, X, Z, is_unitary, random_hermitian

seeds = st.integers(0, 2**32 - 1)


def banded(n, rng):
    """Random Hermitian matrix with 2 nonzeros per row: the diagonal and a paired neighbour."""
    size = 1 << n
    h = np.diag(rng.standard_normal(size)).astype(complex)
    for j in range(0, size, 2):
        z = rng.standard_normal() + 1j * rng.standard_normal()
        h[j, j + 1], h[j + 1, j] = z, np.conj(z)
    return h


class TestVerify:
    def test_unitary_encodes_itself(self):
        assert verify_block_encoding(unitary_access(Z), Z) == 0

    def test_zero_block(self):
        b = BlockAccess(1.0, 1, 0.0, QueryCountedUnitary.primitive("U", np.kron(X, I2)), 1)
        assert verify_block_encoding(b, np.zeros((2, 2))) == 0

    def test_perturbation_is_measured(self, rng):
        h = random_hermitian(4, rng, 0.8)
        b = dilate_exact(h, 1.0)
        pert = 1e-3 * random_hermitian(4, rng)
        assert verify_block_encoding(b, h + pert) == pytest.approx(np.linalg.norm(pert, 2), abs=1e-9)


class TestDilate:
    def test_z(self):
        np.testing.assert_array_equal(dilate_exact(Z, 1.0).block(), Z)

    def test_half_x(self):
        assert verify_block_encoding(dilate_exact(0.5 * X, 1.0), 0.5 * X) <= 1e-9

    def test_diagonal_scaled(self):
        h = np.diag([1, -1, 0.3, -0.2]).astype(complex)
        np.testing.assert_allclose(dilate_exact(h, 2.0).block(), h / 2, atol=1e-12)

    def test_promises(self):
        with pytest.raises(PromiseError):
            dilate_exact(2 * Z, 1.0)
        with pytest.raises(PromiseError):
            dilate_exact(np.array([[0, 1], [0, 0]], dtype=complex), 1.0)

    @given(seeds, st.integers(1, 3), st.floats(1.0, 3.0))
    def test_random(self, seed, n, scale):
        rng = np.random.default_rng(seed)
        h = random_hermitian(1 << n, rng)
        b = dilate_exact(h, scale)
        assert is_unitary(b.u.matrix)
        assert verify_block_encoding(b, h) <= 1e-9
        assert np.linalg.norm(b.block(), 2) <= 1 + 1e-12


class TestControlBlock:
    def test_identity(self):
        b = control_block(dilate_exact(2 * np.eye(2), 2.0))
        np.testing.assert_allclose(b.block(), np.eye(4), atol=1e-12)

    def test_z(self):
        b = control_block(dilate_exact(Z, 1.0))
        np.testing.assert_allclose(b.block(), np.diag([1, 1, 1, -1]), atol=1e-12)

    @given(seeds, st.integers(1, 3))
    def test_control_zero_gives_identity(self, seed, n):
        rng = np.random.default_rng(seed)
        m = random_hermitian(1 << n, rng, 1.3)
        b = control_block(dilate_exact(m, 1.5))
        size = 1 << n
        np.testing.assert_allclose(b.block()[:size, :size], np.eye(size), atol=1e-9)
        np.testing.assert_allclose(b.block()[size:, size:], m / 1.5, atol=1e-9)
        np.testing.assert_allclose(b.block()[:size, size:], 0, atol=1e-12)

    def test_one_query_per_use(self):
        base = dilate_exact(Z, 1.0)
        control_block(base).u.charge()
        assert base.u.counter.value == 1


class TestTensorProjector:
    @given(seeds, st.integers(1, 2), st.integers(1, 2))
    def test_block_elements(self, seed, n, m):
        rng = np.random.default_rng(seed)
        h = random_hermitian(1 << n, rng)
        b = tensor_projector(dilate_exact(h, 1.0), m)
        assert b.a == 2 and b.n == m + n
        expected = np.zeros((1 << (m + n),) * 2, dtype=complex)
        expected[: 1 << n, : 1 << n] = h  # |0^m><0^m| (x) h
        assert verify_block_encoding(b, expected) <= 1e-9

    def test_identity_m1(self):
        b = tensor_projector(dilate_exact(np.eye(2), 1.0), 1)
        np.testing.assert_allclose(b.block(), np.diag([1, 1, 0, 0]), atol=1e-12)

    def test_one_query_per_use(self):
        base = dilate_exact(Z, 1.0)
        tensor_projector(base, 2).u.charge()
        assert base.u.counter.value == 1


class TestMultiply:
    def test_z_squared(self):
        b = multiply_blocks(unitary_access(Z), unitary_access(Z))
        np.testing.assert_allclose(b.block(), np.eye(2))

    def test_x_z(self):
        b = multiply_blocks(dilate_exact(X, 1.0), dilate_exact(Z, 1.0))
        np.testing.assert_allclose(b.block(), X @ Z, atol=1e-9)

    @given(seeds, st.integers(1, 2))
    def test_random_pair(self, seed, n):
        rng = np.random.default_rng(seed)
        a, c = random_hermitian(1 << n, rng), random_hermitian(1 << n, rng)
        b = multiply_blocks(dilate_exact(a, 1.0), dilate_exact(c, 2.0))
        assert b.alpha == 2.0
        assert np.linalg.norm(b.encoded() - a @ c, 2) <= 1e-9


class TestSparseToBlock:
    def test_scaled_identity(self):
        s = sparse_access_from_dense(0.5 * np.eye(4), 1, 0.5)
        b = sparse_to_block(s, 1e-6)
        np.testing.assert_allclose(b.block(), np.eye(4), atol=1e-6)
        assert b.a == s.n + 2

    def test_z(self):
        b = sparse_to_block(sparse_access_from_dense(Z, 1, 1.0), 1e-6)
        assert verify_block_encoding(b, Z) <= 1e-6

    @given(seeds, st.integers(1, 3))
    def test_random_two_sparse(self, seed, n):
        rng = np.random.default_rng(seed)
        h = banded(n, rng)
        beta = float(np.abs(h).max())
        b = sparse_to_block(sparse_access_from_dense(h, 2, beta), 1e-6)
        assert is_unitary(b.u.matrix)
        assert verify_block_encoding(b, h) <= b.delta + 1e-9

    @given(seeds)
    def test_negative_real_entries(self, seed):
        rng = np.random.default_rng(seed)
        h = -np.abs(random_hermitian(4, rng).real)
        h = (h + h.T) / 2
        b = sparse_to_block(sparse_access_from_dense(h, 4), 1e-6)
        assert verify_block_encoding(b, h) <= 1e-6

    def test_queries_per_use(self):
        s = sparse_access_from_dense(Z, 1, 1.0)
        sparse_to_block(s, 1e-6).u.charge()
        assert (s.o_val.counter.value, s.o_loc.counter.value) == (4, 2)

    def test_location_oracle_is_permutation(self, rng):
        s = sparse_access_from_dense(banded(2, rng), 2)
        perm = s.o_loc.permutation()
        np.testing.assert_array_equal(np.sort(perm), np.arange(perm.size))

    def test_sparsity_and_beta(self, rng):
        h = banded(3, rng)
        s = sparse_access_from_dense(h, 2)
        assert np.all(np.count_nonzero(np.round(s.entries(), 12), axis=1) <= 2)
        assert np.abs(s.entries()).max() <= s.beta
        with pytest.raises(PromiseError):
            sparse_access_from_dense(h, 2, 0.5 * np.abs(h).max())

    def test_quantization_check(self):
        s = sparse_access_from_dense(0.3 * Z, 1, 1.0, bits=4)
        with pytest.raises(ValueError):
            sparse_to_block(s, 1e-6)
