import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qslep.blockenc import dilate_exact, verify_block_encoding
from qslep.estimate import bevhm_plan, exact_expectation
from qslep.oracle import FunctionOracle, QueryCountedUnitary
from qslep.reduce import (
    AMInstance,
    SAMInstance,
    am_instance,
    am_to_sam,
    conjugate_block,
    end_to_end_mean,
    end_to_end_plan,
    exact_mean_via_encoding,
    sam_to_sevhm,
)
from qslep.simkern import H, X, Z, hadamard_all, random_hermitian, random_unitary


def sam(values, beta):
    g = FunctionOracle.from_values(values, beta, label="g")
    return SAMInstance(len(values), 0.1, beta, g)


class TestAmToSam:
    def test_zero(self):
        assert am_to_sam(am_instance(np.zeros(4), 0.5), 2.0).g.mean() == 0

    def test_constant(self):
        assert am_to_sam(am_instance(np.ones(4), 0.5), 2.5).g.mean() == pytest.approx(2.5)

    def test_example(self):
        s = am_to_sam(am_instance([0, 1, 1, 0], 0.5), 2.0)
        assert s.g.mean() == pytest.approx(1.0)
        assert s.g.mean() / 2.0 == pytest.approx(0.5)
        assert s.eps == pytest.approx(1.0)

    def test_one_f_query_per_g_query(self):
        am = am_instance([0.2, 0.4], 0.5)
        s = am_to_sam(am, 3.0)
        s.g.query(0)
        assert am.f.counter.value == 1

    def test_ranges(self):
        assert am_instance([0.5] * 4, 0.2).in_problem_range
        assert not am_instance([0.5] * 4, 0.1).in_problem_range
        with pytest.raises(ValueError):
            AMInstance(2, 0.5, FunctionOracle.from_values([1.0, 2.0], 2.0))


class TestSamToSevhm:
    def test_example(self):
        s = sam([0.4, 0.8, 0.2, 0.6], 1.0)
        sparse, v, factor = sam_to_sevhm(s, 2, 2)
        np.testing.assert_allclose(v.matrix, hadamard_all(2))
        assert factor == 1.0
        assert exact_mean_via_encoding(s, 2, 2) == pytest.approx(0.5, abs=1e-4)

    def test_constant(self):
        s = sam(np.full(8, 1.5), 1.5)
        assert exact_mean_via_encoding(s, 3, 2) == pytest.approx(1.5, abs=1e-12)

    def test_domain_mismatch(self):
        with pytest.raises(ValueError):
            sam_to_sevhm(sam(np.ones(5), 1.0), 2, 2)

    @pytest.mark.parametrize("n", range(1, 5))
    def test_exact_tier_all_d(self, n, rng):
        for d in range(1, (1 << n) + 1):
            s = sam(rng.uniform(0, 2.0, d << (n - 1)), 2.0)
            assert abs(exact_mean_via_encoding(s, n, d) - s.g.mean()) <= 1e-12

    def test_location_oracle_never_queries_g(self):
        s = sam(np.full(8, 0.5), 1.0)
        sparse, _, _ = sam_to_sevhm(s, 3, 2)
        sparse.o_loc.charge(10)
        assert s.g.counter.value == 0
        sparse.o_val.charge(3)
        assert s.g.counter.value == 3


class TestEndToEnd:
    def test_constant_half(self):
        am = am_instance(np.full(4, 0.5), 0.1)
        assert abs(end_to_end_mean(am, 2, 2, 0) - 0.5) <= 0.1

    def test_example(self):
        am = am_instance([0, 1, 1, 0], 0.1)
        plan = end_to_end_plan(am, 2, 2)
        assert plan.estimator.success_probability(0.5) >= 2 / 3
        values = np.array([r.value for r in plan.trials(1, 100)])
        assert np.mean(np.abs(values - 0.5) <= 0.1) >= 2 / 3 - 0.05

    def test_padding(self, rng):
        am = am_instance(rng.uniform(0, 1, 5), 0.1)
        plan = end_to_end_plan(am, 2, 4)
        assert plan.estimator.success_probability(am.f.mean()) >= 2 / 3

    @pytest.mark.parametrize("beta", [0.5, 2.0])
    def test_beta(self, beta, rng):
        am = am_instance(rng.uniform(0, 1, 8), 0.1)
        assert end_to_end_plan(am, 3, 2, beta).estimator.success_probability(am.f.mean()) >= 2 / 3

    def test_f_queries_equal_value_oracle_queries(self):
        am = am_instance([0.1, 0.7, 0.3, 0.9], 0.1)
        res = end_to_end_plan(am, 2, 2).run(0)
        assert res.query_counts["f"] == res.query_counts["O_val"] > 0

    def test_f_query_scaling(self):
        eps = np.array([0.2, 0.1, 0.05, 0.025])
        counts = []
        for e in eps:
            am = am_instance([0.1, 0.7, 0.3, 0.9], e)
            counts.append(end_to_end_plan(am, 2, 2).run(0).query_counts["f"])
        slope = np.polyfit(np.log(1 / eps), np.log(counts), 1)[0]
        assert abs(slope - 1) <= 0.15

    def test_capacity(self):
        with pytest.raises(ValueError):
            end_to_end_plan(am_instance(np.ones(9), 0.1), 2, 4)


class TestConjugate:
    def test_same_v(self, rng):
        m = random_hermitian(4, rng, 0.9)
        v = random_unitary(4, rng)
        f = conjugate_block(dilate_exact(m, 1.0), QueryCountedUnitary.primitive("V", v), v)
        assert verify_block_encoding(f, m) <= 1e-9

    def test_hzh(self):
        f = conjugate_block(dilate_exact(Z, 1.0), QueryCountedUnitary.primitive("V", H), np.eye(2))
        np.testing.assert_allclose(f.block(), X, atol=1e-12)

    def test_charges(self):
        b = dilate_exact(Z, 1.0)
        v = QueryCountedUnitary.primitive("V", H)
        conjugate_block(b, v, np.eye(2)).u.charge()
        assert (b.u.counter.value, v.counter.value) == (1, 2)

    @given(st.integers(0, 2**32 - 1), st.integers(1, 3))
    def test_expectation_identity(self, seed, n):
        rng = np.random.default_rng(seed)
        m = random_hermitian(1 << n, rng, 1.0)
        v, v_n = random_unitary(1 << n, rng), hadamard_all(n)
        f = conjugate_block(dilate_exact(m, 1.0), QueryCountedUnitary.primitive("V", v), v_n)
        assert abs(exact_expectation(f.encoded(), v_n) - exact_expectation(m, v)) <= 1e-9

    def test_estimator_on_conjugated_block(self, rng):
        m = random_hermitian(4, rng, 1.0)
        v = random_unitary(4, rng)
        f = conjugate_block(dilate_exact(m, 1.0), QueryCountedUnitary.primitive("V", v), hadamard_all(2))
        plan = bevhm_plan(2, f, 0.05, QueryCountedUnitary.primitive("V_n", hadamard_all(2)))
        assert plan.success_probability(exact_expectation(m, v)) >= 2 / 3
