from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qslep.oracle import FunctionOracle
from qslep.simkern import hadamard_all
from qslep.sparsemat import (
    MatrixEncoding,
    build_matrix_encoding,
    encoding_oracles,
    entry_sum_exact,
    ind,
    ind_inverse,
    ind_table,
    mean_from_expectation,
    plus_expectation,
    read_encoding,
    write_encoding,
)

TABLE_N2 = [[0, 4, 8, 12], [13, 1, 5, 9], [10, 14, 2, 6], [7, 11, 15, 3]]


def encoding(n, d, values, beta=1.0):
    return MatrixEncoding(n, d, beta, FunctionOracle.from_values(values, beta, label="g"))


@st.composite
def encodings(draw, max_n=4):
    n = draw(st.integers(1, max_n))
    d = draw(st.integers(1, 1 << n))
    beta = draw(st.sampled_from([0.5, 1.0, 2.5]))
    seed = draw(st.integers(0, 2**32 - 1))
    values = np.random.default_rng(seed).uniform(0, beta, d << (n - 1))
    return encoding(n, d, values, beta)


class TestInd:
    def test_table_n2(self):
        assert ind_table(2).tolist() == TABLE_N2

    def test_diagonal(self):
        assert all(ind(3, i, i) == i for i in range(8))

    def test_pair_sum(self):
        assert ind(2, 1, 0) + ind(2, 0, 1) == 17 >= 16

    def test_inverse_examples(self):
        assert ind_inverse(2, 13) == (1, 0)
        assert all(ind_inverse(3, i) == (i, i) for i in range(8))
        assert all(ind(2, *ind_inverse(2, k)) == k for k in range(16))

    @pytest.mark.parametrize("n", range(1, 7))
    def test_bijective_and_pair_property(self, n):
        t = ind_table(n)
        np.testing.assert_array_equal(np.sort(t.reshape(-1)), np.arange(1 << (2 * n)))
        off = ~np.eye(1 << n, dtype=bool)
        assert np.all((t + t.T)[off] >= 1 << (2 * n))

    def test_range_checked(self):
        with pytest.raises(ValueError):
            ind(2, 4, 0)
        with pytest.raises(ValueError):
            ind_inverse(2, 16)


class TestEncoding:
    def test_diagonal_example(self):
        m = build_matrix_encoding(encoding(2, 2, [0.4, 0.8, 0.2, 0.6]))
        np.testing.assert_allclose(m, np.diag([0.4, 0.8, 0.2, 0.6]), atol=1e-4)

    def test_d4_example(self, rng):
        g = rng.uniform(0, 1, 8)
        enc = encoding(2, 4, g)
        m = build_matrix_encoding(enc)
        vals = enc.g.values
        np.testing.assert_allclose(np.diag(m), vals[:4])
        for i in range(4):
            assert m[i, (i + 1) % 4] == pytest.approx(vals[4 + i] / 2)
        assert set(np.flatnonzero(m[0])) == {0, 1, 3}

    def test_zero(self):
        assert not np.any(build_matrix_encoding(encoding(2, 4, np.zeros(8))))

    def test_domain_checked(self):
        with pytest.raises(ValueError):
            encoding(2, 2, np.zeros(5))

    @pytest.mark.parametrize("n", range(1, 6))
    def test_no_double_assignment_and_sparsity(self, n, rng):
        size = 1 << n
        t = ind_table(n)
        for d in range(1, size + 1):
            limit = d << (n - 1)
            off = ~np.eye(size, dtype=bool)
            assert not np.any((t < limit) & (t.T < limit) & off)
            m = build_matrix_encoding(encoding(n, d, rng.uniform(0.01, 1, limit)))
            assert np.count_nonzero(m, axis=1).max() <= d

    @given(encodings())
    def test_encoding_structural_properties(self, enc):
        m = build_matrix_encoding(enc)
        np.testing.assert_allclose(m, m.conj().T, atol=1e-12)
        assert np.count_nonzero(m, axis=1).max() <= enc.d
        matrix_sum, g_sum = entry_sum_exact(enc)
        assert matrix_sum == g_sum
        assert abs(m.sum().real - enc.g.values.sum()) <= 1e-12 * max(1, enc.g.values.sum())
        mu = mean_from_expectation(enc.n, enc.d, plus_expectation(m))
        assert abs(mu - enc.g.mean()) <= 1e-12

    def test_plus_expectation_by_inner_product(self):
        m = build_matrix_encoding(encoding(2, 2, [0.4, 0.8, 0.2, 0.6]))
        plus = hadamard_all(2)[:, 0]
        assert np.vdot(plus, m @ plus).real == pytest.approx(0.5, abs=1e-4)
        assert mean_from_expectation(2, 2, plus_expectation(m)) == pytest.approx(0.5, abs=1e-4)
        assert mean_from_expectation(2, 2, 0.0) == 0

    def test_entry_sum_is_exact_rational(self):
        matrix_sum, g_sum = entry_sum_exact(encoding(2, 4, [1 / 3] * 8))
        assert isinstance(matrix_sum, Fraction) and matrix_sum == g_sum


class TestOracles:
    def test_value_oracle_diagonal(self):
        s = encoding_oracles(encoding(2, 2, [0.4, 0.8, 0.2, 0.6]))
        assert s.entry(0, 0).real == pytest.approx(0.4, abs=1e-4)

    @pytest.mark.parametrize("n", range(1, 5))
    def test_oracles_match_matrix(self, n, rng):
        for d in range(1, (1 << n) + 1):
            enc = encoding(n, d, rng.uniform(0, 1, d << (n - 1)))
            s = encoding_oracles(enc)
            m = build_matrix_encoding(enc)
            np.testing.assert_allclose(s.entries(), m, atol=1e-15)
            locs = s.locations()
            listed = np.zeros_like(m, dtype=bool)
            listed[np.arange(1 << n)[:, None], locs] = True
            assert not np.any((m != 0) & ~listed)

    def test_hermitian_values(self, rng):
        s = encoding_oracles(encoding(2, 4, rng.uniform(0, 1, 8)))
        e = s.entries()
        np.testing.assert_array_equal(e, e.conj().T)

    def test_value_query_charges_g_location_does_not(self):
        enc = encoding(2, 4, np.full(8, 0.5))
        s = encoding_oracles(enc)
        s.o_val.charge()
        s.o_loc.charge(5)
        assert enc.g.counter.value == 1
        assert s.o_loc.charges == {s.o_loc.counter: 1}
        assert enc.g.counter not in s.o_loc.charges


class TestFiles:
    @given(encodings(max_n=3))
    def test_round_trip(self, tmp_path_factory, enc):
        path = tmp_path_factory.mktemp("enc") / "g.txt"
        write_encoding(path, enc)
        back = read_encoding(path)
        assert (back.n, back.d, back.beta) == (enc.n, enc.d, enc.beta)
        np.testing.assert_array_equal(back.g.codes, enc.g.codes)

    def test_missing_header(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("n 2\ng\n0.5\n")
        with pytest.raises(ValueError):
            read_encoding(path)
