import itertools
import json
import math
from fractions import Fraction

import pytest

from hyperperc import ncpart, szgen
from hyperperc.errors import CapacityError, InvalidInputError

X = szgen.Poly.x()
TRI_ROOT = 2 * math.sin(math.pi / 18)


def brute_connection_probs(g, p):
    """Oracle: float enumeration over all bond states."""
    out = {}
    bonds = list(g.bonds)
    for state in itertools.product((0, 1), repeat=len(bonds)):
        w = 1.0
        pairs = []
        for open_, (u, v, poly) in zip(state, bonds):
            q = poly(p)
            w *= q if open_ else 1 - q
            if open_:
                pairs.append((u, v))
        index = {v: i for i, v in enumerate(g.vertices)}
        blocks = szgen._terminal_partition(g.k, g.terminals, pairs, index)
        out[blocks] = out.get(blocks, 0.0) + w
    return out


class TestPoly:
    def test_arithmetic(self):
        f = (X + 1) * (X - 1)
        assert f == szgen.Poly((-1, 0, 1))
        assert f(2) == 3.0
        assert f(Fraction(1, 2)) == Fraction(-3, 4)

    def test_zero_normalization(self):
        assert (X - X).is_zero()
        assert szgen.Poly((0, 0)).degree == -1

    def test_derivative(self):
        assert szgen.Poly((1, 2, 3)).derivative() == szgen.Poly((2, 6))


class TestGenerator:
    def test_builtin_shapes(self):
        assert szgen.triangle_generator().k == 3
        assert len(szgen.star_generator().internals()) == 1
        assert szgen.bond_generator().k == 2

    def test_rejects_disconnected(self):
        with pytest.raises(InvalidInputError):
            szgen.Generator(terminals=("A", "B"), vertices=("A", "B"), bonds=())

    def test_rejects_out_of_range_poly(self):
        with pytest.raises(InvalidInputError):
            szgen.Generator(terminals=("A", "B"), vertices=("A", "B"),
                            bonds=(("A", "B", szgen.Poly((0, 2))),))

    def test_rejects_duplicate_terminals(self):
        with pytest.raises(InvalidInputError):
            szgen.Generator(terminals=("A", "A"), vertices=("A", "B"),
                            bonds=(("A", "B", X),))


class TestConnectionVector:
    def test_triangle_polynomials(self):
        cv = szgen.connection_vector(szgen.triangle_generator())
        # all three connected: p^3 + 3p^2(1-p); none: (1-p)^3
        assert cv.poly([[0, 1, 2]]) == szgen.Poly((0, 0, 3, -2))
        assert cv.poly([[0], [1], [2]]) == szgen.Poly((1, -3, 3, -1))
        pair = cv.poly([[0, 1], [2]])
        assert pair == szgen.Poly((0, 1, -2, 1))  # p(1-p)^2

    def test_star_all_connected_is_p_cubed(self):
        cv = szgen.connection_vector(szgen.star_generator())
        assert cv.poly([[0, 1, 2]]) == szgen.Poly((0, 0, 0, 1))

    def test_single_bond(self):
        cv = szgen.connection_vector(szgen.bond_generator())
        assert cv.poly([[0, 1]]) == X
        assert cv.poly([[0], [1]]) == 1 - X

    def test_sums_to_one_exactly(self):
        for g in (szgen.triangle_generator(), szgen.star_generator()):
            total = szgen.Poly()
            for poly in szgen.connection_vector(g).polys.values():
                total = total + poly
            assert total == szgen.ONE

    def test_matches_float_oracle(self):
        for g in (szgen.triangle_generator(), szgen.star_generator()):
            cv = szgen.connection_vector(g)
            for p in (0.2, 0.5, 0.8):
                brute = brute_connection_probs(g, p)
                for blocks, val in brute.items():
                    assert cv.poly(blocks)(p) == pytest.approx(val)

    def test_evaluations_are_valid_vectors(self):
        cv = szgen.connection_vector(szgen.triangle_generator())
        for p in (0.0, 0.3, 0.5, 0.7, 1.0):
            v = cv.evaluate(p)
            assert v.k == 3
            assert cv.noncrossing_support()

    def test_site_mode_star(self):
        g = szgen.Generator(
            terminals=("A", "B", "C"), vertices=("A", "B", "C", "O"),
            bonds=(("A", "O", szgen.ONE), ("B", "O", szgen.ONE),
                   ("C", "O", szgen.ONE)),
            mode="site")
        cv = szgen.connection_vector(g)
        assert cv.poly([[0, 1, 2]]) == X          # centre open
        assert cv.poly([[0], [1], [2]]) == 1 - X  # centre closed

    def test_capacity(self):
        verts = tuple(f"v{i}" for i in range(26)) + ("A", "B")
        bonds = tuple((verts[i], verts[i + 1], X) for i in range(25))
        bonds += (("v25", "A", X), ("A", "B", X))
        g = szgen.Generator(terminals=("A", "B"), vertices=verts, bonds=bonds)
        with pytest.raises(CapacityError):
            szgen.connection_vector(g)


class TestSelfDualEquation:
    def test_triangle_equation(self):
        f = szgen.selfdual_equation(szgen.triangle_generator())
        # -(p^3 - 3p + 1)
        assert f == szgen.Poly((-1, 3, 0, -1))

    def test_star_equation(self):
        f = szgen.selfdual_equation(szgen.star_generator())
        assert f == szgen.Poly((-1, 0, 3, -1))

    def test_symmetric_site_generator_is_identically_zero(self):
        g = szgen.Generator(
            terminals=("A", "B", "C"), vertices=("A", "B", "C", "O"),
            bonds=(("A", "O", szgen.ONE), ("B", "O", szgen.ONE),
                   ("C", "O", szgen.ONE)),
            mode="site", site_probs={"O": szgen.Poly.const(Fraction(1, 2))})
        assert szgen.selfdual_equation(g).is_zero()

    def test_k4_returns_constraint_system(self):
        g4 = szgen.Generator(
            terminals=("A", "B", "C", "D"), vertices=("A", "B", "C", "D"),
            bonds=(("A", "B", X), ("B", "C", X), ("C", "D", X), ("D", "A", X)))
        system = szgen.selfdual_equation(g4)
        assert isinstance(system, list)
        pairs = {(c.partition, c.dual_partition) for c in system}
        # bottom pairs with top under any labelling convention
        assert (tuple((i,) for i in range(4)), (tuple(range(4)),)) in pairs

    def test_k3_system_reduces_to_single_constraint(self):
        system = szgen.selfduality_system(szgen.triangle_generator())
        assert len(system) == 1
        assert system[0].partition == ((0,), (1,), (2,))


class TestCriticalPoint:
    def test_triangle_root(self):
        rep = szgen.critical_point(szgen.triangle_generator())
        assert rep.status == "ok"
        assert rep.root == pytest.approx(TRI_ROOT, abs=1e-9)
        assert rep.root == pytest.approx(0.347296355334, abs=1e-9)

    def test_star_root(self):
        rep = szgen.critical_point(szgen.star_generator())
        assert rep.root == pytest.approx(1 - TRI_ROOT, abs=1e-9)

    def test_roots_sum_to_one(self):
        a = szgen.critical_point(szgen.triangle_generator()).root
        b = szgen.critical_point(szgen.star_generator()).root
        assert a + b == pytest.approx(1.0, abs=1e-9)

    def test_degenerate_symmetric_generator(self):
        # all-or-nothing: open centre connects everything, p_top = p,
        # p_bottom = 1 - p, so the equation is p - (1 - p) with root 1/2
        g = szgen.Generator(
            terminals=("A", "B", "C"), vertices=("A", "B", "C", "O"),
            bonds=(("A", "O", szgen.ONE), ("B", "O", szgen.ONE),
                   ("C", "O", szgen.ONE)),
            mode="site")
        rep = szgen.critical_point(g)
        assert rep.root == pytest.approx(0.5, abs=1e-12)

    def test_no_root_is_a_result(self):
        g = szgen.Generator(
            terminals=("A", "B", "C"), vertices=("A", "B", "C"),
            bonds=(("A", "B", szgen.Poly.const(Fraction(9, 10))),
                   ("B", "C", szgen.Poly.const(Fraction(9, 10))),
                   ("C", "A", szgen.Poly.const(Fraction(9, 10)))))
        rep = szgen.critical_point(g)
        assert rep.status == "no-root"
        assert rep.roots == []

    def test_identically_zero_status(self):
        g = szgen.Generator(
            terminals=("A", "B", "C"), vertices=("A", "B", "C", "O"),
            bonds=(("A", "O", szgen.ONE), ("B", "O", szgen.ONE),
                   ("C", "O", szgen.ONE)),
            mode="site", site_probs={"O": szgen.Poly.const(Fraction(1, 2))})
        assert szgen.critical_point(g).status == "identically-zero"

    def test_requires_three_terminals(self):
        with pytest.raises(InvalidInputError):
            szgen.critical_point(szgen.bond_generator())


class TestRealizability:
    def test_competition_half_fails_with_spec_numbers(self):
        rep = szgen.realizability_check(ncpart.competition_vector(0.5))
        assert not rep.passes
        corr = [c for c in rep.checks if c.name.startswith("corr")]
        assert all(not c.holds for c in corr)
        assert corr[0].lhs == pytest.approx(0.125)
        assert corr[0].rhs == pytest.approx(0.140625)

    def test_connection_vectors_pass(self):
        for g in (szgen.triangle_generator(), szgen.star_generator()):
            cv = szgen.connection_vector(g)
            for p in (0.3, 0.5, 0.7):
                assert szgen.realizability_check(cv.evaluate(p)).passes

    def test_point_mass_top_passes(self):
        assert szgen.realizability_check(ncpart.point_mass(ncpart.top(3))).passes

    def test_requires_k3(self):
        with pytest.raises(InvalidInputError):
            szgen.realizability_check(ncpart.uniform_vector(4))


class TestJson:
    def test_generator_round_trip(self):
        g = szgen.star_generator()
        obj = json.loads(json.dumps(szgen.generator_to_json(g)))
        again = szgen.generator_from_json(obj)
        assert again.terminals == g.terminals
        assert szgen.critical_point(again).root == pytest.approx(1 - TRI_ROOT)

    def test_fraction_coefficients(self):
        g = szgen.generator_from_json({
            "terminals": ["A", "B"],
            "bonds": [{"u": "A", "v": "B", "p": ["1/3"]}],
        })
        cv = szgen.connection_vector(g)
        assert cv.poly([[0, 1]]) == szgen.Poly.const(Fraction(1, 3))

    def test_malformed(self):
        with pytest.raises(InvalidInputError):
            szgen.generator_from_json({"bonds": []})

    def test_connection_vector_json(self):
        obj = szgen.connection_vector_to_json(
            szgen.connection_vector(szgen.triangle_generator()))
        assert obj["k"] == 3
        assert len(obj["polys"]) == 5
