"""Blow-ups of parameter families and of points over the base: chart
substitutions, stabilization certificates, and exceptional trees."""

from fractions import Fraction

import pytest

from meroconn.blowups import (
    BlowupSurface,
    dual_tree_matrix,
    enumerate_blowup_sequences,
    family_blowup,
    stabilize_by_blowup,
    stable_transversal_point,
    component_irregularity,
    surface_from_moves,
)
from meroconn.diffmod import DiffModule, newton_polygon
from meroconn.errors import UserInputError
from meroconn.fields import QQ, FunctionField
from meroconn.geometry import branch_intersection, intersection_multiplicity
from meroconn.parametric import (
    ParametricModule,
    check_point,
    slope_divisor,
    specialize,
)
from meroconn.series import RamifiedSeries, SeriesMatrix
from meroconn.turrittin import turrittin_levelt

F = Fraction
Ft = FunctionField(QQ, "t")


def entry(terms):
    coeffs = {}
    for exp, c in terms.items():
        coeffs[F(exp)] = c if not isinstance(c, (int, Fraction)) else Ft.from_fraction(F(c))
    return RamifiedSeries(Ft, coeffs)


def pm_from_rows(rows):
    n = len(rows)
    z = RamifiedSeries.zero(Ft)
    mat = [[rows[i][j] if rows[i][j] is not None else z for j in range(n)] for i in range(n)]
    return ParametricModule(DiffModule(Ft, SeriesMatrix(Ft, mat)))


def linear_pole_family():
    return pm_from_rows([[entry({-1: Ft.gen})]])


def euler_family():
    return pm_from_rows([[entry({-1: Ft.gen}), entry({0: -1})], [None, None]])


# -- family blow-up charts -------------------------------------------------------


def test_family_blowup_substitutes_the_arc():
    fb = family_blowup(linear_pole_family())
    assert fb.center == 0
    inner = fb.chart1
    assert inner.param == "u"
    Fu = inner.field
    e = inner.module.matrix.rows[0][0]
    # t/x with t = x*u collapses to the unit u
    assert set(e.coeffs) == {F(0)}
    assert Fu.eq(e.coeff(F(0)), Fu.gen)
    assert e.prec is None

    outer = fb.chart2
    assert outer.module.var == "w"
    e2 = outer.module.matrix.rows[0][0]
    # t/x with x = t*w loses the parameter: 1/w
    assert set(e2.coeffs) == {F(-1)}
    assert Ft.eq(e2.coeff(F(-1)), Ft.one)


def test_family_blowup_needs_integer_exponents():
    half = RamifiedSeries(Ft, {F(1, 2): Ft.one}, e=2)
    pm = ParametricModule(DiffModule(Ft, SeriesMatrix(Ft, [[half]], e=2)))
    with pytest.raises(UserInputError, match="unramified"):
        family_blowup(pm)


def test_family_blowup_center_on_coefficient_pole():
    pm = pm_from_rows([[entry({-1: Ft.inv(Ft.gen)})]])
    fb = family_blowup(pm, center=0)
    # 1/t = 1/(x*u) puts u into the polar locus of the new family
    assert QQ.is_zero(fb.chart1.locus.evaluate(QQ.zero))


def test_family_blowup_expands_non_monomial_denominators():
    pm = pm_from_rows([[entry({-1: Ft.inv(Ft.add(Ft.one, Ft.gen))})]])
    fb = family_blowup(pm, center=1)
    e = fb.chart1.module.matrix.rows[0][0]
    Fu = fb.chart1.field
    # 1/(1 + t) at t = 1 + x*u is 1/2 - u x/4 + u^2 x^2/8 - ...
    assert e.prec is not None
    assert Fu.eq(e.coeff(F(-1)), Fu.from_fraction(F(1, 2)))
    assert Fu.eq(e.coeff(F(0)), Fu.mul(Fu.from_fraction(F(-1, 4)), Fu.gen))
    assert Fu.eq(e.coeff(F(1)), Fu.mul(Fu.from_fraction(F(1, 8)), Fu.mul(Fu.gen, Fu.gen)))


# -- stabilization certificates --------------------------------------------------


def test_linear_pole_stabilizes_in_one_step():
    cert = stabilize_by_blowup(linear_pole_family(), 0)
    assert cert.steps == 1
    assert cert.bound == 2
    assert cert.stable
    assert cert.substitutions == ("t = 0 + x^1*u",)
    assert cert.reports[0].verdict == "turning"
    assert cert.reports[1].verdict == "stable"
    assert cert.to_str() == "stable after 1 blow-ups (bound 2)"


def test_euler_family_stabilizes_within_bound():
    cert = stabilize_by_blowup(euler_family(), 0, wprec=8)
    assert cert.stable
    assert cert.steps == 1
    assert cert.steps <= cert.bound == 2


def test_double_pole_needs_two_steps():
    pm = pm_from_rows([[entry({-2: Ft.gen})]])
    cert = stabilize_by_blowup(pm, 0)
    assert cert.steps == 2
    assert cert.bound == 3
    assert cert.substitutions == ("t = 0 + x^1*u", "t = 0 + x^2*u")
    assert [r.verdict for r in cert.reports] == ["turning", "turning", "stable"]


def test_stable_point_needs_no_blowup():
    cert = stabilize_by_blowup(linear_pole_family(), 1)
    assert cert.steps == 0
    assert cert.bound == 0
    assert cert.substitutions == ()
    assert cert.stable
    assert cert.family is not None
    assert cert.to_str() == "stable after 0 blow-ups (bound 0)"


def test_certified_points_and_fiber_irregularity():
    pm = euler_family()
    assert stable_transversal_point(pm) == 1
    assert component_irregularity(pm) == 1
    assert component_irregularity(linear_pole_family()) == 1


def test_stabilized_family_transports_invariants():
    cert = stabilize_by_blowup(euler_family(), 0, wprec=8)
    fam = cert.family
    assert check_point(fam, 0, wprec=8).verdict == "stable"
    m1 = specialize(fam, 1)
    m2 = specialize(fam, 2)
    assert newton_polygon(m1).slopes() == newton_polygon(m2).slopes()
    assert turrittin_levelt(m1).phi_multiset() == turrittin_levelt(m2).phi_multiset()


def test_slope_divisor_is_polynomial_after_stabilization():
    pm = pm_from_rows([[entry({-2: Ft.gen, -1: 1})]])
    cert = stabilize_by_blowup(pm, 0)
    assert cert.steps == 1
    fam = cert.family
    div = slope_divisor(fam, 1)
    assert div.part_rank == 1
    assert div.poly.degree == 1
    Fu = fam.field
    assert all(len(c.den) == 1 for c in div.poly.coeffs)
    assert Fu.eq(div.poly.coeffs[0], Fu.neg(Fu.add(Fu.one, Fu.gen)))


# -- exceptional trees -----------------------------------------------------------


def test_single_blowup_tree():
    T = dual_tree_matrix([])
    assert T.selfints == (-1,)
    assert T.edges == ()
    assert T.matrix == ((QQ.one,),)
    assert T.inverse == ((QQ.one,),)


def test_second_blowup_on_the_line():
    T = dual_tree_matrix([("on", 0)])
    assert T.selfints == (-2, -1)
    assert T.edges == ((0, 1),)
    q = QQ.from_int
    assert T.matrix == ((q(2), q(-1)), (q(-1), q(1)))
    assert T.inverse == ((q(1), q(1)), (q(1), q(2)))


def test_chain_of_three():
    T = dual_tree_matrix([("on", 0), ("on", 1)])
    assert T.selfints == (-2, -2, -1)
    for i in range(3):
        for j in range(3):
            assert T.inverse[i][j] == min(i, j) + 1


def test_subdividing_a_crossing():
    T = dual_tree_matrix([("on", 0), ("cross", 0, 1)])
    assert T.selfints == (-3, -2, -1)
    assert T.edges == ((0, 2), (1, 2))
    q = QQ.from_int
    assert T.matrix == (
        (q(3), QQ.zero, q(-1)),
        (QQ.zero, q(2), q(-1)),
        (q(-1), q(-1), q(1)),
    )
    assert T.inverse == (
        (q(1), q(1), q(2)),
        (q(1), q(2), q(3)),
        (q(2), q(3), q(6)),
    )


def test_last_column_recurrence():
    # a blow-up on E_v copies the column entry of v; one at a crossing
    # of E_v and E_w adds the two entries
    for moves in enumerate_blowup_sequences(4):
        if not moves:
            continue
        before = dual_tree_matrix(moves[:-1])
        after = dual_tree_matrix(moves)
        n = len(after.selfints) - 1
        last = moves[-1]
        for row in range(n):
            if last[0] == "on":
                expected = before.inverse[row][last[1]]
            else:
                expected = before.inverse[row][last[1]] + before.inverse[row][last[2]]
            assert after.inverse[row][n] == expected


def test_sequence_enumeration_counts():
    assert [len(enumerate_blowup_sequences(k)) for k in range(1, 6)] == [1, 2, 5, 20, 125]


def test_move_validation():
    with pytest.raises(UserInputError, match="unknown blow-up move"):
        dual_tree_matrix([("spin", 0)])
    S = BlowupSurface()
    with pytest.raises(UserInputError, match="already a marked point"):
        S.blow_up_on(0, 0)
    with pytest.raises(UserInputError, match="do not cross"):
        S.blow_up_cross(0, 1)
    S2 = surface_from_moves([("on", 0), ("cross", 0, 1)])
    with pytest.raises(UserInputError, match="do not cross"):
        S2.blow_up_cross(0, 1)


def test_transversal_germs_have_defining_polynomials():
    S = BlowupSurface()
    C = S.transversal_germ(0, 1)
    assert C.y1.valuation() == 1 and C.y2.valuation() == 1
    assert C.poly is not None
    with pytest.raises(UserInputError, match="marked"):
        S.transversal_germ(0, 0)


def test_inverse_entries_count_germ_intersections():
    for moves in enumerate_blowup_sequences(3):
        S = surface_from_moves(moves)
        T = S.tree()
        germs = {}
        for v in range(S.size):
            u1, u2 = S.fresh_values(v, 2)
            germs[v] = (S.transversal_germ(v, u1), S.transversal_germ(v, u2))
        for v in range(S.size):
            for w in range(v, S.size):
                C = germs[v][0]
                Z = germs[w][0] if v != w else germs[w][1]
                pairing = branch_intersection(C, Z)
                assert pairing == T.inverse[v][w]
                assert intersection_multiplicity(C, Z) >= pairing


def test_deep_tree_matches_germ_pairings():
    moves = [("on", 0), ("cross", 0, 1), ("on", 2), ("cross", 2, 3)]
    S = surface_from_moves(moves)
    T = S.tree()
    assert T.selfints == (-3, -2, -3, -2, -1)
    assert T.edges == ((0, 2), (1, 2), (2, 4), (3, 4))
    a = S.transversal_germ(0)
    b = S.transversal_germ(4)
    assert branch_intersection(a, b) == T.inverse[0][4]
    c1, c2 = (S.transversal_germ(2, u) for u in S.fresh_values(2, 2))
    assert branch_intersection(c1, c2) == T.inverse[2][2]
