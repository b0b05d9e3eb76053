import itertools
import random
from fractions import Fraction

import numpy as np
import pytest

from hyperperc import harris, ncpart
from hyperperc.errors import CapacityError, InvalidInputError


def chain2():
    return harris.FinitePoset.from_relations(("lo", "hi"), [(0, 1)])


class TestFinitePoset:
    def test_rejects_non_transitive(self):
        le = np.eye(3, dtype=bool)
        le[0, 1] = le[1, 2] = True
        with pytest.raises(InvalidInputError):
            harris.FinitePoset("abc", le)

    def test_rejects_non_antisymmetric(self):
        le = np.ones((2, 2), dtype=bool)
        with pytest.raises(InvalidInputError):
            harris.FinitePoset("ab", le)

    def test_greatest_least_cached(self):
        p = chain2()
        assert p.greatest == 1 and p.least == 0
        r = p.reverse()
        assert r.greatest == 0 and r.least == 1

    def test_nc_poset_shape(self):
        p = harris.nc_poset(3)
        assert p.n == 5
        assert p.elements[p.greatest] == ncpart.top(3)
        assert p.elements[p.least] == ncpart.bottom(3)


class TestEnumerateUpsets:
    def test_single_element(self):
        p = harris.FinitePoset(("x",), np.eye(1, dtype=bool))
        assert len(harris.enumerate_upsets(p)) == 2

    def test_two_chain(self):
        assert len(harris.enumerate_upsets(chain2())) == 3

    def test_nc3_has_ten(self):
        ups = harris.enumerate_upsets(harris.nc_poset(3))
        assert len(ups) == 10
        # brute force over all subsets
        p = harris.nc_poset(3)
        brute = 0
        for mask in range(2 ** p.n):
            sel = {i for i in range(p.n) if mask >> i & 1}
            if all(j in sel for i in sel for j in range(p.n) if p.le[i, j]):
                brute += 1
        assert brute == 10

    def test_capacity(self):
        p = harris.FinitePoset(range(17), np.eye(17, dtype=bool))
        with pytest.raises(CapacityError):
            harris.enumerate_upsets(p)


class TestProductProb:
    def test_full_space(self):
        m = harris.uniform_measure(harris.nc_poset(3))
        full = harris.ProductUpset.explicit(
            m.poset, 2, set(itertools.product(range(5), repeat=2)))
        assert harris.product_prob(m, 2, full) == pytest.approx(1.0)

    def test_top_power(self):
        m = harris.counterexample_measure(0.3)
        top = {(0, 0, 0)}
        a = harris.ProductUpset.explicit(m.poset, 3, top)
        assert harris.product_prob(m, 3, a) == pytest.approx(0.3 ** 3)

    def test_direct_sum(self):
        m = harris.uniform_measure(harris.nc_poset(3))
        i_top = m.poset.index(ncpart.top(3))
        i_ab = m.poset.index(ncpart.NCPartition(3, [[0, 1], [2]]))
        a = harris.ProductUpset.explicit(m.poset, 1, {(i_top,), (i_ab,)})
        assert harris.product_prob(m, 1, a) == pytest.approx(0.4)

    def test_predicate_agrees_with_explicit(self):
        m = harris.counterexample_measure(0.2)
        members = {(0, 0), (0, 1), (1, 0), (1, 1)}
        a = harris.ProductUpset.explicit(m.poset, 2, members)
        b = harris.ProductUpset(2, predicate=lambda t: t in members)
        assert harris.product_prob(m, 2, a) == pytest.approx(
            harris.product_prob(m, 2, b))

    def test_explicit_rejects_non_upset(self):
        m = harris.counterexample_measure(0.2)
        with pytest.raises(InvalidInputError):
            harris.ProductUpset.explicit(m.poset, 1, {(1,)})  # x1 without x0


class TestHarrisCheck:
    def test_full_spaces_hold_trivially(self):
        m = harris.counterexample_measure(0.5)
        full = harris.ProductUpset.explicit(
            m.poset, 1, {(i,) for i in range(m.poset.n)})
        rep = harris.harris_check(m, 1, full, full)
        assert rep.lhs == pytest.approx(1.0) and rep.rhs == pytest.approx(1.0)
        assert rep.holds

    def test_counterexample_family(self):
        # Pr(A) = Pr(B) = (1+p0)/2 and Pr(A∩B) = p0, exactly
        for p0 in (0.1, 0.2, 0.3):
            m = harris.counterexample_measure(p0)
            a = harris.ProductUpset.explicit(m.poset, 1, {(0,), (1,)})
            b = harris.ProductUpset.explicit(m.poset, 1, {(0,), (2,)})
            rep = harris.harris_check(m, 1, a, b)
            assert rep.prob_a == pytest.approx((1 + p0) / 2)
            assert rep.prob_b == pytest.approx((1 + p0) / 2)
            assert rep.lhs == pytest.approx(p0)
            assert rep.holds
            plain = harris.harris_check(m, 1, a, b, exponent=1)
            assert not plain.holds

    def test_spec_numbers_at_p0_02(self):
        m = harris.counterexample_measure(0.2)
        a = harris.ProductUpset.explicit(m.poset, 1, {(0,), (1,)})
        b = harris.ProductUpset.explicit(m.poset, 1, {(0,), (2,)})
        rep = harris.harris_check(m, 1, a, b)
        assert rep.exponent == 10
        assert rep.lhs == pytest.approx(0.2)
        assert rep.rhs == pytest.approx(0.36 ** 10)

    def test_exhaustive_small_posets(self):
        # every pair of upsets, every measure tried, |P| <= 5, n <= 2
        rng = random.Random(0)
        posets = [
            chain2(),
            harris.counterexample_measure(0.4).poset,
            harris.nc_poset(3),
        ]
        for poset in posets:
            for _ in range(3):
                raw = [rng.random() + 0.05 for _ in range(poset.n)]
                s = sum(raw)
                m = harris.PosetMeasure(poset, [x / s for x in raw])
                upsets = harris.enumerate_upsets(poset)
                for n in (1, 2):
                    produpsets = []
                    for u in upsets:
                        members = {t for t in itertools.product(u, repeat=n)}
                        produpsets.append(
                            harris.ProductUpset(n, members=members, _checked=True))
                    for a, b in itertools.combinations_with_replacement(produpsets, 2):
                        assert harris.harris_check(m, n, a, b).holds

    def test_exhaustive_nc3_uniform_n1(self):
        m = harris.uniform_measure(harris.nc_poset(3))
        ups = [harris.ProductUpset(1, members={(i,) for i in u}, _checked=True)
               for u in harris.enumerate_upsets(m.poset)]
        for a, b in itertools.combinations_with_replacement(ups, 2):
            assert harris.harris_check(m, 1, a, b).holds

    def test_requires_greatest_element(self):
        two = harris.FinitePoset(("a", "b"), np.eye(2, dtype=bool))
        m = harris.PosetMeasure(two, [0.5, 0.5])
        a = harris.ProductUpset(1, members={(0,)}, _checked=True)
        with pytest.raises(InvalidInputError):
            harris.harris_check(m, 1, a, a)


class TestDeltaChains:
    def test_csr_k1_is_half_eps(self):
        m = harris.uniform_measure(harris.nc_poset(3))
        assert harris.csr_delta(m, 1, 0.1) == Fraction(0.1) / 2

    def test_csr_k2_spec_value(self):
        m = harris.PosetMeasure(chain2(), [0.5, 0.5])
        assert float(harris.csr_delta(m, 2, 0.1)) == pytest.approx(5e-9)

    def test_csr_monotone_in_k(self):
        m = harris.uniform_measure(harris.nc_poset(3))
        vals = [harris.csr_delta(m, k, 0.25) for k in range(1, 5)]
        assert all(a > b for a, b in zip(vals, vals[1:]))
        assert all(v > 0 for v in vals)

    def test_manyhold_n1_is_eps(self):
        assert harris.manyhold_delta(0.5, 1, 0.125) == Fraction(0.125)

    def test_manyhold_n2_spec_value(self):
        eps_prime = (Fraction(0.2) / 2 * Fraction(0.2)) ** 4
        expect = (eps_prime * Fraction(0.2) / 2) ** 4
        assert harris.manyhold_delta(0.5, 2, 0.2) == expect

    def test_manyhold_decreasing_in_n(self):
        vals = [harris.manyhold_delta(0.5, n, 0.2) for n in range(1, 5)]
        assert all(a > b for a, b in zip(vals, vals[1:]))
        assert all(v > 0 for v in vals)

    def test_chain_capacity(self):
        with pytest.raises(CapacityError):
            harris.manyhold_delta(0.01, 8, 0.1)

    def test_bad_inputs(self):
        m = harris.uniform_measure(harris.nc_poset(3))
        with pytest.raises(InvalidInputError):
            harris.csr_delta(m, 2, 1.5)
        with pytest.raises(InvalidInputError):
            harris.manyhold_delta(0.5, 0, 0.1)


class TestSqrtTrickStress:
    def test_nc3_uniform_no_violations(self):
        m = harris.uniform_measure(harris.nc_poset(3))
        rep = harris.sqrt_trick_stress(m, k=2, eps=0.3, trials=2000, seed=42)
        assert rep.violations == 0
        assert rep.families_tested > 0

    def test_k1_reduces_to_single_upset(self):
        m = harris.uniform_measure(harris.nc_poset(3))
        rep = harris.sqrt_trick_stress(m, k=1, eps=0.2, trials=500, seed=1)
        assert rep.violations == 0

    def test_n2_runs(self):
        m = harris.PosetMeasure(chain2(), [0.4, 0.6])
        rep = harris.sqrt_trick_stress(m, k=3, eps=0.4, trials=300, seed=7, n=2)
        assert rep.violations == 0
        assert rep.trials == 300
