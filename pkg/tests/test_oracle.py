import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qslep.oracle import (
    Counter,
    FunctionOracle,
    QueryCountedUnitary,
    delta_by_label,
    function_to_unitary,
    make_adjoint,
    make_controlled,
    merge_charges,
    reset_counters,
    snapshot,
)
from qslep.simkern import I2, X, Z, StateVector, controlled, random_unitary

CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


class TestVariants:
    def test_controlled_x_is_cnot(self):
        np.testing.assert_allclose(make_controlled(QueryCountedUnitary.primitive("X", X)).matrix, CNOT)

    def test_controlled_identity(self):
        np.testing.assert_allclose(make_controlled(QueryCountedUnitary.primitive("I", I2)).matrix, np.eye(4))

    @given(st.integers(0, 2**32 - 1))
    def test_control_zero_block_is_identity(self, seed):
        u = random_unitary(4, np.random.default_rng(seed))
        cu = make_controlled(QueryCountedUnitary.primitive("U", u)).matrix
        np.testing.assert_allclose(cu[:4, :4], np.eye(4), atol=1e-12)
        np.testing.assert_allclose(cu[4:, 4:], u, atol=1e-12)

    def test_adjoint_examples(self):
        np.testing.assert_allclose(make_adjoint(QueryCountedUnitary.primitive("X", X)).matrix, X)
        theta = 0.3
        rot = np.diag(np.exp(1j * theta * np.array([1, -1])))
        adj = make_adjoint(QueryCountedUnitary.primitive("R", rot)).matrix
        np.testing.assert_allclose(adj, np.diag(np.exp(-1j * theta * np.array([1, -1]))))

    @given(st.integers(0, 2**32 - 1))
    def test_adjoint_inverts(self, seed):
        u = QueryCountedUnitary.primitive("U", random_unitary(8, np.random.default_rng(seed)))
        np.testing.assert_allclose(make_adjoint(u).matrix @ u.matrix, np.eye(8), atol=1e-9)

    @given(st.integers(0, 2**32 - 1))
    def test_control_in_one_applies_u(self, seed):
        rng = np.random.default_rng(seed)
        u = QueryCountedUnitary.primitive("U", random_unitary(4, rng))
        psi = StateVector.from_amplitudes(random_unitary(4, rng)[:, 0])
        with_control = StateVector.basis(1, 1).tensor(psi)
        out = make_controlled(u).apply(with_control)
        np.testing.assert_allclose(out.amplitudes[4:], u.matrix @ psi.amplitudes, atol=1e-9)

    def test_permutation_box_variants(self):
        perm = np.array([2, 0, 3, 1])
        box = QueryCountedUnitary("P", {Counter("P"): 1}, perm=perm)
        np.testing.assert_allclose(box.adjoint().matrix, box.matrix.T)
        np.testing.assert_allclose(box.controlled().matrix, controlled(box.matrix))


class TestCounting:
    def test_each_variant_costs_one_query(self):
        u = QueryCountedUnitary.primitive("U", Z)
        psi1, psi2 = StateVector.zero(1), StateVector.zero(2)
        u.apply(psi1)
        u.adjoint().apply(psi1)
        u.controlled().apply(psi2)
        u.controlled().adjoint().apply(psi2)
        assert u.counter.value == 4

    def test_reset_then_three_calls(self):
        u = QueryCountedUnitary.primitive("U", Z)
        u.charge(5)
        reset_counters([u])
        assert u.counter.value == 0
        for _ in range(3):
            u.apply(StateVector.zero(1))
        assert u.counter.value == 3

    def test_shared_counter_across_variants(self):
        u = QueryCountedUnitary.primitive("U", X)
        u.apply(StateVector.zero(1))
        u.controlled().apply(StateVector.zero(2))
        assert u.counter.value == 2

    def test_counters_never_decrease(self):
        with pytest.raises(ValueError):
            Counter("c").increment(-1)

    def test_composite_charges(self):
        m, v = Counter("U_M"), Counter("V")
        charges = merge_charges(({m: 1}, 2), ({v: 1}, 1))
        box = QueryCountedUnitary("S", charges, dense=np.eye(2))
        before = snapshot([m, v])
        box.charge(3)
        assert delta_by_label(before) == {"U_M": 6, "V": 3}

    def test_clone_has_fresh_counter(self):
        u = QueryCountedUnitary.primitive("V", X)
        c = u.clone()
        c.charge()
        assert (u.counter.value, c.counter.value, c.counter.label) == (0, 1, "V")


class TestFunctionOracle:
    def test_zero_function_is_identity(self):
        g = FunctionOracle.from_values(np.zeros(4), 1.0, bits=3)
        np.testing.assert_array_equal(function_to_unitary(g).permutation(), np.arange(32))

    def test_fixed_point_table(self):
        beta = 2.0
        g = FunctionOracle.from_values([0, beta / 2, beta / 4, beta], beta, bits=2)
        perm = function_to_unitary(g).permutation()
        encodings = [format(perm[j << 2] & 3, "02b") for j in range(4)]
        assert encodings == ["00", "10", "01", "11"]

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=9), st.integers(1, 6))
    def test_xor_oracle_is_involution(self, values, bits):
        values = [v if v > 2.0**-bits else 0.0 for v in values]
        o = function_to_unitary(FunctionOracle.from_values(values, 1.0, bits=bits))
        perm = o.permutation()
        np.testing.assert_array_equal(perm[perm], np.arange(o.dim))

    @given(st.lists(st.floats(0, 3), min_size=1, max_size=20))
    def test_values_in_range_and_close(self, values):
        g = FunctionOracle.from_values(values, 3.0)
        assert np.all((g.values >= 0) & (g.values <= 3.0))
        np.testing.assert_allclose(g.values, values, atol=3.0 / 2**16)

    def test_query_charges_peek_does_not(self):
        g = FunctionOracle.from_values([0.25, 0.5], 1.0)
        g.peek(0)
        assert g.counter.value == 0
        assert g.query(1) == pytest.approx(0.5, abs=1e-4)
        assert g.counter.value == 1

    def test_range_checked(self):
        with pytest.raises(ValueError):
            FunctionOracle.from_values([1.5], 1.0)

    def test_padding_keeps_true_domain(self):
        g = FunctionOracle.from_values([1.0, 1.0, 1.0], 1.0)
        assert g.padded_codes().tolist()[-1] == 0
        assert g.mean() == pytest.approx(1.0)
