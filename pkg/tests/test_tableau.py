from fractions import Fraction

import pytest
import sympy

from helpers import load
from relalg.algebroid import load_algebroid
from relalg.tableau import (
    TableauData,
    TableauError,
    UnsupportedCohomology,
    cartan_characters,
    cartan_search,
    cartan_test,
    prolongation_rank,
    spencer_cohomology_dim,
    spencer_differential,
    symbol_block,
    tableau_map,
    tautological_tableau,
)

phi = sympy.Symbol("phi")
POINT = {"K": Fraction(1), "phi": Fraction(1, 3)}


def full_tableau(n: int, brackets: int, symbols: int) -> TableauData:
    """Every derivation of degree one: identity rows over all columns."""
    shape = TableauData(n, tuple(f"b{i}" for i in range(brackets)), tuple(f"s{i}" for i in range(symbols)), (), ())
    width = len(shape.columns())
    rows = tuple(tuple(sympy.Integer(int(i == j)) for j in range(width)) for i in range(width))
    return TableauData(n, shape.bracket_slots, shape.symbol_slots, tuple(f"e{i}" for i in range(width)), rows)


def zero_tableau(n: int) -> TableauData:
    return TableauData(n, (), ("x",), (), ())


@pytest.fixture(scope="module")
def surfaces_tableau():
    return tableau_map(load("surfaces"))


class TestTableauMap:
    def test_surfaces_row(self, surfaces_tableau):
        t = surfaces_tableau
        assert t.r == 1
        assert symbol_block(t) == [[-sympy.sin(phi), sympy.cos(phi), 0]]
        bracket = [v for v, col in zip(t.matrix[0], t.columns()) if col[0] == "c"]
        assert all(v == 0 for v in bracket)

    def test_constant_in_fiber(self):
        a = load_algebroid("frame t1 t2\nbase x\nfiber y\nd x = x*t1\n")
        assert all(v == 0 for v in tableau_map(a).matrix[0])

    def test_relative_vector_field(self):
        a = load_algebroid("frame t\nbase x1 x2\nfiber y\nd x1 = y**2*t\nd x2 = x1*y*t\n")
        assert symbol_block(tableau_map(a)) == [[2 * sympy.Symbol("y"), sympy.Symbol("x1")]]

    def test_shape_checked(self):
        with pytest.raises(TableauError):
            TableauData(2, (), ("x",), ("r",), ((1, 2, 3),))


class TestSpencerDifferential:
    def test_symmetric_input_vanishes(self):
        t = tautological_tableau(2, 1, 1)
        xi = [[1, 5], [5, -2]]
        assert all(f.is_zero() for f in spencer_differential(xi, t).values())

    def test_skew_input_survives(self):
        t = tautological_tableau(2, 1, 1)
        out = spencer_differential([[0, 1], [-1, 0]], t)
        assert out["v1"].coefficient((1, 2)) == -2

    def test_shape(self):
        with pytest.raises(TableauError):
            spencer_differential([[1]], tautological_tableau(2, 1, 1))


class TestCharacters:
    def test_surfaces(self, surfaces_tableau):
        assert cartan_characters(surfaces_tableau).s == (1, 0, 0)
        test = cartan_test(surfaces_tableau)
        assert (test.prolongation_rank, test.bound, test.involutive) == (1, 1, "yes")

    def test_zero_tableau(self):
        t = zero_tableau(3)
        assert cartan_characters(t).s == (0, 0, 0)
        test = cartan_test(t)
        assert (test.prolongation_rank, test.bound, test.involutive) == (0, 0, "yes")

    def test_two_forms(self):
        t = tautological_tableau(3, 2, 2)
        assert cartan_characters(t).s == (0, 2, 4)
        assert prolongation_rank(t) == 16
        assert cartan_test(t).involutive == "yes"

    def test_permutation_flag(self, surfaces_tableau):
        assert cartan_characters(surfaces_tableau, [3, 1, 2]).s == (0, 1, 0)
        with pytest.raises(TableauError):
            cartan_characters(surfaces_tableau, [1, 1, 2])

    def test_search_report(self, surfaces_tableau):
        d = cartan_search(surfaces_tableau, seed=0)
        assert set(d) >= {"s", "bound", "prolongation_rank", "involutive", "flag", "warnings"}
        assert d["flags_tested"] == 9 and d["involutive"] == "yes"

    def test_non_involutive_wording(self):
        # one row (theta1, theta2): characters (1, 0) but the prolongation is zero
        a = load_algebroid("frame t1 t2\nbase x w\nfiber y\nd x = y*t1\nd w = y*t2\n")
        test = cartan_test(tableau_map(a))
        assert (test.s, test.bound, test.prolongation_rank, test.involutive) == ((1, 0), 1, 0, "no")
        assert any("not involutive by this test" in w for w in test.warnings)


class TestCohomology:
    def test_surfaces(self, surfaces_tableau):
        dims = {(m, l): spencer_cohomology_dim(surfaces_tableau, m, l, POINT) for m in (-1, 0, 1) for l in (2, 3)}
        assert dims[(0, 2)] == 0 and dims[(1, 2)] == 0
        assert dims[(-1, 2)] == 4

    def test_full_tableau_has_no_torsion_class(self):
        assert spencer_cohomology_dim(full_tableau(2, 1, 1), -1, 2, {}) == 0
        assert spencer_cohomology_dim(full_tableau(3, 0, 1), -1, 2, {}) == 0

    def test_zero_tableau(self):
        assert spencer_cohomology_dim(zero_tableau(2), 0, 2, {}) == 0

    def test_tautological_vanishes(self):
        t = tautological_tableau(3, 1, 1)
        assert all(spencer_cohomology_dim(t, m, l, {}) == 0 for m in (0, 1) for l in (2, 3))

    def test_errors(self, surfaces_tableau):
        with pytest.raises(UnsupportedCohomology):
            spencer_cohomology_dim(surfaces_tableau, 2, 2, POINT)
        with pytest.raises(TableauError, match="phi"):
            spencer_cohomology_dim(surfaces_tableau, 0, 2, {"K": 1})
