import random
from fractions import Fraction

import pytest

from _corpus import (
    family_end_polygon,
    family_polygon,
    random_family,
    stable_points,
)
from meroconn.diffmod import (
    DiffModule,
    NewtonPolygon,
    end_module,
    katz_rank,
    newton_polygon,
)
from meroconn.errors import PoleError, UserInputError
from meroconn.fields import QQ, ExtensionField, FunctionField
from meroconn.parametric import (
    ParametricModule,
    check_point,
    check_semistable_descent,
    projector_parameter_defect,
    slope_divisor,
    slope_divisors,
    specialize,
    stability_candidate_polynomial,
    turning_locus,
)
from meroconn.polynomials import Poly
from meroconn.series import RamifiedSeries, SeriesMatrix
from meroconn.turrittin import normal_form

F = Fraction
Ft = FunctionField(QQ, "t")


def mono(c, exp, e=1):
    if isinstance(c, int):
        c = Ft.from_int(c)
    return RamifiedSeries.monomial(Ft, c, F(exp), e)


def pm_from_rows(rows):
    n = len(rows)
    z = RamifiedSeries.zero(Ft)
    mat = [[rows[i][j] if rows[i][j] is not None else z for j in range(n)] for i in range(n)]
    return ParametricModule(DiffModule(Ft, SeriesMatrix(Ft, mat)))


def pm_diag(*entries):
    n = len(entries)
    return pm_from_rows([[entries[i] if i == j else None for j in range(n)] for i in range(n)])


def euler_family():
    return pm_from_rows([[mono(Ft.gen, -1), mono(-1, 0)], [None, None]])


# -- construction ------------------------------------------------------------


def test_family_needs_a_parameter_field():
    z = RamifiedSeries.zero(QQ)
    M = DiffModule(QQ, SeriesMatrix(QQ, [[z]]))
    with pytest.raises(UserInputError):
        ParametricModule(M)


def test_family_rejects_variable_collision():
    Fx = FunctionField(QQ, "x")
    M = DiffModule(Fx, SeriesMatrix(Fx, [[RamifiedSeries.zero(Fx)]]))
    with pytest.raises(UserInputError):
        ParametricModule(M)


def test_denominator_locus_collects_entry_poles():
    t = Ft.gen
    c1 = Ft.div(Ft.one, t)  # 1/t
    c2 = Ft.div(t, Ft.mul(Ft.sub(t, Ft.one), Ft.sub(t, Ft.one)))  # t/(t-1)^2
    pm = pm_diag(mono(c1, -1), mono(c2, 0))
    assert [f.to_str("t") for f in pm.locus_factors] == ["t - 1", "t"]
    assert pm.locus.to_str("t") == "t^2 - t"


def test_entries_without_poles_give_trivial_locus():
    pm = euler_family()
    assert pm.locus_factors == ()
    assert pm.locus.degree == 0


# -- specialization ----------------------------------------------------------


def test_specialize_euler_at_zero_is_the_regular_matrix():
    M0 = specialize(euler_family(), 0)
    assert M0.field == QQ
    assert M0.matrix.to_str_rows() == [["0", "-1"], ["0", "0"]]
    assert dict(newton_polygon(M0).slopes()) == {F(0): F(2)}


def test_specialize_euler_at_one_keeps_both_slopes():
    M1 = specialize(euler_family(), 1)
    assert dict(newton_polygon(M1).slopes()) == {F(0): F(1), F(1): F(1)}


def test_specialize_rank_one_twist():
    pm = pm_diag(mono(Ft.gen, -1))
    assert specialize(pm, 2).matrix.to_str_rows() == [["2*x^-1"]]


def test_specialize_raises_at_an_entry_pole():
    c = Ft.div(Ft.one, Ft.sub(Ft.gen, Ft.one))
    pm = pm_diag(mono(c, -1))
    with pytest.raises(PoleError):
        specialize(pm, 1)
    assert specialize(pm, 3).matrix.to_str_rows() == [["(1/2)*x^-1"]]


def test_specialize_at_an_algebraic_point():
    ext = ExtensionField(QQ, "r", (F(-2), F(0), F(1)))  # r^2 = 2
    pm = pm_diag(mono(Ft.gen, -1))
    M = specialize(pm, ext.gen, field=ext)
    assert M.field is ext
    assert M.matrix.entry(0, 0).coeffs == {F(-1): ext.gen}


# -- slope divisors ----------------------------------------------------------


def test_euler_slope_divisor():
    d = slope_divisor(euler_family(), 1)
    assert d.to_str("xi") == "xi - t"
    assert d.part_rank == 1
    assert d.poly.degree == 1


def test_constant_lead_divisor():
    pm = pm_diag(mono(1, -1))
    assert slope_divisor(pm, 1).to_str("xi") == "xi - 1"


def test_order_two_divisor_has_degree_two():
    d = slope_divisor(pm_diag(mono(Ft.gen, -2)), 2)
    assert d.to_str("xi") == "xi^2 - t"
    assert d.poly.degree == 2


def test_fractional_slope_divisor_expands_through_the_lattice():
    """Companion of theta_0 = t^2 x^-3: leads are +-t at slope 3/2, so the
    divisor is (xi^(3/2) - t)(xi^(3/2) + t) = xi^3 - t^2."""
    t2 = Ft.mul(Ft.gen, Ft.gen)
    z = RamifiedSeries.zero(Ft)
    one = RamifiedSeries.one(Ft)
    pm = ParametricModule(DiffModule(Ft, SeriesMatrix(Ft, [[z, mono(t2, -3)], [one, z]])))
    d = slope_divisor(pm, F(3, 2))
    assert d.to_str("xi") == "xi^3 - t^2"
    assert d.poly.degree == 3
    assert d.part_rank == 2


def test_divisor_of_a_mixed_family_lists_both_slopes():
    pm = pm_diag(mono(Ft.gen, -2), mono(3, -1))
    divs = slope_divisors(pm)
    assert [(d.sigma, d.to_str("xi")) for d in divs] == [
        (F(2), "xi^2 - t"),
        (F(1), "xi - 3"),
    ]


def test_divisor_requires_an_actual_slope():
    with pytest.raises(UserInputError):
        slope_divisor(euler_family(), 2)
    with pytest.raises(UserInputError):
        slope_divisor(euler_family(), 0)


def test_divisor_coefficients_stay_polynomial():
    for d in slope_divisors(euler_family()):
        for c in d.poly.coeffs:
            assert c.den == (F(1),)


def test_top_divisor_matches_normal_form_leading_factor():
    """At the top slope the divisor equals the nonzero factor of the
    characteristic polynomial of the normal form's leading matrix."""
    pm = euler_family()
    nf = normal_form(pm.module)
    chi = nf.leading_charpoly.monic()
    k = 0
    while Ft.is_zero(chi.coeffs[k]):
        k += 1
    nonzero_factor = Poly(Ft, chi.coeffs[k:])
    d = slope_divisor(pm, nf.rho)
    # slope 1: the xi-substitution is the identity on exponents
    assert d.poly.coeffs == nonzero_factor.coeffs


# -- turning points -----------------------------------------------------------


def test_euler_candidates_come_from_both_families():
    cand = stability_candidate_polynomial(euler_family())
    assert cand.to_str("t") == "t"


def test_check_point_euler():
    pm = euler_family()
    rep0 = check_point(pm, 0)
    assert rep0.verdict == "turning"
    assert dict(rep0.specialized_polygon.slopes()) == {F(0): F(2)}
    assert rep0.polygon.includes(rep0.specialized_polygon)
    assert rep0.end_polygon.includes(rep0.end_specialized_polygon)
    assert check_point(pm, 1).verdict == "stable"
    assert check_point(pm, F(-1, 2)).verdict == "stable"


def test_check_point_constant_family_is_stable_everywhere():
    pm = pm_diag(mono(1, -1))
    for p in (0, 1, -3, F(2, 5)):
        assert check_point(pm, p).verdict == "stable"


def test_euler_turning_locus():
    tl = turning_locus(euler_family())
    assert tl.poly.to_str("t") == "t"
    assert tl.classification == {"t": "turning"}
    assert tl.candidates.to_str("t") == "t"
    assert not tl.is_empty()


def test_rank_one_twist_turning_locus():
    tl = turning_locus(pm_diag(mono(Ft.gen, -1)))
    assert tl.poly.to_str("t") == "t"
    assert tl.classification == {"t": "turning"}


def test_constant_family_has_empty_locus():
    tl = turning_locus(pm_diag(mono(1, -1)))
    assert tl.is_empty()
    assert tl.classification == {}


def test_irrational_turning_values_are_checked_over_an_extension():
    """phi = (1+t^2)/x drops to a regular module at t = +-i."""
    phi = mono(1, -1) + mono(Ft.mul(Ft.gen, Ft.gen), -1)
    tl = turning_locus(pm_diag(phi))
    assert tl.poly.to_str("t") == "t^2 + 1"
    assert tl.classification == {"t^2 + 1": "turning"}


def test_candidate_on_the_entry_locus_stays_a_candidate():
    """phi = t/((t-1)x): t=1 is a pole of the entry, so the pointwise
    check cannot run there and the factor is not confirmed."""
    c = Ft.div(Ft.gen, Ft.sub(Ft.gen, Ft.one))
    tl = turning_locus(pm_diag(mono(c, -1)))
    assert tl.classification == {"t": "turning", "t - 1": "candidate"}
    assert tl.poly.to_str("t") == "t"
    assert tl.candidates.to_str("t") == "t^2 - t"


# -- descent ------------------------------------------------------------------


def test_euler_descent_is_obstructed_at_the_eigenvalue_merge():
    rep = check_semistable_descent(euler_family())
    assert not rep.descends
    assert rep.obstruction_order == F(0)
    assert rep.obstruction.to_str("t") == "t"
    assert rep.projectors is None


def test_separated_diagonal_family_descends():
    """diag(t/x, (1+t)/x): the leads differ by the unit 1 at every
    parameter value, so the residue split never divides by anything
    that vanishes."""
    lead2 = Ft.add(Ft.one, Ft.gen)
    pm = pm_diag(mono(Ft.gen, -1), mono(lead2, -1))
    rep = check_semistable_descent(pm)
    assert rep.descends
    assert rep.obstruction is None
    assert rep.e == 1
    assert len(rep.projectors) == 2


def test_descent_projectors_are_idempotent_and_complete():
    lead2 = Ft.add(Ft.one, Ft.gen)
    pm = pm_diag(mono(Ft.gen, -1), mono(lead2, -1))
    rep = check_semistable_descent(pm)
    p0, p1 = rep.projectors
    n = p0.nrows
    ident = SeriesMatrix.identity(Ft, n, p0.e)
    below = p0.min_prec()
    assert (p0 + p1).agrees_with(ident, below=below)
    assert (p0 * p0).agrees_with(p0, below=below)
    assert (p0 * p1).agrees_with(ident * mono(0, 0), below=below)


def test_rank_one_family_descends():
    rep = check_semistable_descent(pm_diag(mono(Ft.gen, -1)))
    assert rep.descends


def test_descent_through_a_repeated_eigenvalue_twist():
    """diag(t/x, t/x + 1) has a single residue cluster; after the twist
    the family is regular, so it descends."""
    pm = pm_diag(mono(Ft.gen, -1), mono(Ft.gen, -1) + mono(1, 0))
    assert check_semistable_descent(pm).descends


# -- stability under the parameter connection ---------------------------------


def euler_pair():
    t = Ft.gen
    z = RamifiedSeries.zero(Ft)
    G1 = SeriesMatrix(Ft, [[mono(t, -1), mono(-1, 0)], [z, z]])
    G2 = SeriesMatrix(Ft, [[mono(Ft.neg(t), -1), mono(1, 0)], [z, z]])
    return ParametricModule(DiffModule(Ft, G1)), G2


def test_euler_pair_is_integrable():
    pm, G2 = euler_pair()
    G1 = pm.module.matrix
    defect = (
        G2.theta()
        - G1.derive_coeffs("t", times_gen=True)
        + G1 * G2
        - G2 * G1
    )
    zero = SeriesMatrix.from_scalars(Ft, [[Ft.zero] * 2 for _ in range(2)])
    assert defect.agrees_with(zero)


def test_split_projector_commutes_with_the_parameter_connection():
    pm, G2 = euler_pair()
    defect = projector_parameter_defect(pm, G2)
    zero = SeriesMatrix.from_scalars(Ft, [[Ft.zero] * 2 for _ in range(2)], defect.e)
    assert defect.agrees_with(zero, below=F(8))


# -- random families -----------------------------------------------------------


def test_random_families_specialize_inside_the_generic_polygon():
    rng = random.Random(20260814)
    for _ in range(6):
        sample = random_family(rng, rng.choice([2, 2, 3]))
        np_gen = family_polygon(sample)
        for p in [Fraction(rng.randrange(-4, 5)) for _ in range(3)]:
            Mp = specialize(sample.pm, p)
            assert katz_rank(Mp) <= sample.rho
            assert np_gen.includes(newton_polygon(Mp))


def test_random_families_keep_newton_data_at_certified_stable_points():
    rng = random.Random(77511)
    for _ in range(4):
        sample = random_family(rng, 2)
        (p,) = stable_points(sample, rng, 1)
        Mp = specialize(sample.pm, p)
        assert newton_polygon(Mp) == family_polygon(sample)
        assert newton_polygon(end_module(Mp)) == family_end_polygon(sample)


def test_random_rank_three_family_end_polygon_at_a_stable_point():
    rng = random.Random(424242)
    sample = random_family(rng, 3)
    (p,) = stable_points(sample, rng, 1)
    Mp = specialize(sample.pm, p)
    assert newton_polygon(Mp) == family_polygon(sample)
    assert newton_polygon(end_module(Mp)) == family_end_polygon(sample)


def test_polygon_from_slopes_matches_computed_polygons():
    pm = euler_family()
    assert NewtonPolygon.from_slopes({F(0): 1, F(1): 1}, 2) == newton_polygon(pm.module)
    assert NewtonPolygon.from_slopes({F(0): 2, F(1): 2}, 4) == newton_polygon(
        end_module(pm.module)
    )
