import random
from fractions import Fraction

import pytest

from meroconn.diffmod import DiffModule, katz_rank, newton_polygon
from meroconn.errors import ExtensionRequiredError, MeroconnError
from meroconn.fields import QQ, FunctionField
from meroconn.series import RamifiedSeries, SeriesMatrix
from meroconn.turrittin import (
    ExponentialPart,
    cluster_residue,
    normal_form,
    shear,
    slope_decomposition,
    split_by_residue,
    turrittin_levelt,
)
import meroconn.linalg as LA
from meroconn.polynomials import Poly

F = Fraction
Ft = FunctionField(QQ, "t")


def S(field, coeffs, e=1, prec=None):
    out = {}
    for k, v in coeffs.items():
        out[F(k)] = field.from_int(v) if isinstance(v, int) else v
    return RamifiedSeries(field, out, e, prec)


def mono(field, c, exp, e=1):
    if isinstance(c, int):
        c = field.from_int(c)
    return RamifiedSeries.monomial(field, c, F(exp), e)


def euler_module():
    t = Ft.gen
    z = RamifiedSeries.zero(Ft)
    G = SeriesMatrix(Ft, [[mono(Ft, t, -1), mono(Ft, -1, 0)], [z, z]])
    return DiffModule(Ft, G)


def companion_module(theta_list, field=QQ):
    mu = len(theta_list)
    z = RamifiedSeries.zero(field)
    one = RamifiedSeries.one(field)
    rows = [[z] * mu for _ in range(mu)]
    for j in range(mu - 1):
        rows[j + 1][j] = one
    for i in range(mu):
        rows[i][mu - 1] = rows[i][mu - 1] + theta_list[i]
    return DiffModule(field, SeriesMatrix(field, rows))


def elementary(field, n, i, j, s):
    """I + s E_ij; its inverse swaps the sign of s."""
    rows = [
        [RamifiedSeries.one(field) if a == b else RamifiedSeries.zero(field) for b in range(n)]
        for a in range(n)
    ]
    rows[i][j] = rows[i][j] + s
    return SeriesMatrix(field, rows)


def exact_gauge(M, pairs):
    """Gauge by a product of elementary matrices, keeping entries exact."""
    n = M.rank
    P = SeriesMatrix.identity(M.field, n, M.e)
    Pinv = SeriesMatrix.identity(M.field, n, M.e)
    for i, j, s in pairs:
        P = P * elementary(M.field, n, i, j, s)
        Pinv = elementary(M.field, n, i, j, -s) * Pinv
    H = Pinv * (M.matrix * P + P.theta())
    return DiffModule(M.field, H)


# -- exponential parts -------------------------------------------------------------


def test_exponential_part_extracts_polar_terms():
    s = S(QQ, {-2: 1, 0: 3, 1: 5}, prec=None)
    phi = ExponentialPart.from_series(s)
    assert phi.series.coeffs == {F(-2): F(1)}
    assert phi.pole_order() == 2
    assert phi.leading() == (F(-2), F(1))


def test_exponential_part_rejects_nonnegative_exponents():
    with pytest.raises(MeroconnError):
        ExponentialPart(S(QQ, {0: 1}))


def test_exponential_part_from_truncated_series_is_exact():
    s = S(QQ, {-1: 2}, prec=F(5))
    phi = ExponentialPart.from_series(s)
    assert phi.series.prec is None
    assert phi.series.coeffs == {F(-1): F(2)}


# -- shearing ---------------------------------------------------------------------


def test_shear_euler_residue():
    M = euler_module()
    B, Q, op, e = shear(M)
    assert e == 1
    assert op.katz_rank() == F(1)
    t = Ft.gen
    B0 = B.constant_matrix()
    assert [[Ft.to_str(v) for v in row] for row in B0] == [["0", "0"], ["1", "t"]]
    chi = LA.charpoly(Ft, B0)
    # T^2 - t T, eigenvalues t and 0
    assert chi.coeffs == (Ft.zero, Ft.neg(t), Ft.one)


def test_shear_three_halves_needs_square_root_lattice():
    M = companion_module([mono(QQ, 1, -3), RamifiedSeries.zero(QQ)])
    B, Q, op, e = shear(M)
    assert e == 2
    assert op.katz_rank() == F(3, 2)
    B0 = B.constant_matrix()
    assert B0 == [[F(0), F(1)], [F(1), F(0)]]
    assert B.is_integral()


def test_cluster_policies():
    t = Ft.gen
    # chi = T (T - t): roots split, slope policy groups the same way
    chi = Poly(Ft, [Ft.zero, Ft.neg(t), Ft.one])
    roots = cluster_residue(Ft, chi, "roots")
    assert sorted(Ft.to_str(r) for r, _ in roots) == ["0", "t"]
    by_slope = cluster_residue(Ft, chi, "slope")
    assert len(by_slope) == 2
    assert by_slope[1][0] == Ft.zero
    # T^2 - t is irreducible: root clustering must ask for an extension
    chi2 = Poly(Ft, [Ft.neg(t), Ft.zero, Ft.one])
    with pytest.raises(ExtensionRequiredError):
        cluster_residue(Ft, chi2, "roots")
    coarse = cluster_residue(Ft, chi2 * chi, "coarse")
    assert len(coarse) == 3


# -- residue split ------------------------------------------------------------------


def test_split_matches_direct_conjugation():
    t = Ft.gen
    B = SeriesMatrix(
        Ft,
        [
            [S(Ft, {0: 1, 2: t}), S(Ft, {1: 1})],
            [S(Ft, {1: 1}), S(Ft, {})],
        ],
    )
    res = split_by_residue(B, F(1), F(12))
    P, H = res.transition, res.diag
    delta_P = P.theta().map_entries(lambda s: s.shift(F(1)))
    H2 = P.solve(B * P + delta_P, F(12))
    assert H.agrees_with(H2, below=F(10))
    z = RamifiedSeries.zero(Ft)
    for i in range(2):
        for j in range(2):
            if i != j:
                assert H.entry(i, j).agrees_with(z, below=F(10))
    assert res.ranks == [1, 1]


def test_split_needs_positive_scaling():
    B = SeriesMatrix.identity(QQ, 2)
    with pytest.raises(MeroconnError):
        split_by_residue(B, F(0), F(8))


# -- full decomposition ---------------------------------------------------------------


def test_euler_decomposition():
    M = euler_module()
    dec = turrittin_levelt(M)
    assert dec.e == 1
    assert dec.extensions == []
    assert sorted((p.phi.to_str(), p.rank) for p in dec.parts) == [
        ("0", 1),
        ("t*x^-1", 1),
    ]
    assert dec.slope_multiset() == {F(0): 1, F(1): 1}
    assert dec.reconstruction_ok(M)


def test_three_halves_decomposition():
    M = companion_module([mono(QQ, 1, -3), RamifiedSeries.zero(QQ)])
    dec = turrittin_levelt(M)
    assert dec.e == 2
    assert sorted(p.phi.to_str() for p in dec.parts) == ["-x^(-3/2)", "x^(-3/2)"]
    assert dec.slope_multiset() == {F(3, 2): 2}
    assert dec.reconstruction_ok(M)


def test_mixed_theta_expansion():
    """theta = (x^-3, x^-1): parts +-x^(-3/2) + x^-1/2 +- x^(-1/2)/8.

    The inner coefficients follow from balancing phi^2 = theta_0 + theta_1 phi
    + theta(phi) order by order: 2 c_1 = 1 at x^(-5/2) and c_1^2 + 2 c_2 sigma
    = c_1 at x^(-2) with sigma the leading sign.
    """
    M = companion_module([mono(QQ, 1, -3), mono(QQ, 1, -1)])
    dec = turrittin_levelt(M)
    got = sorted(p.phi.to_str() for p in dec.parts)
    assert got == [
        "-x^(-3/2) + (1/2)*x^-1 + (-1/8)*x^(-1/2)",
        "x^(-3/2) + (1/2)*x^-1 + (1/8)*x^(-1/2)",
    ]
    assert dec.reconstruction_ok(M)


def test_extension_chain_for_irrational_residue():
    # theta_0 = t x^-2 gives residue spectrum +-sqrt(t)
    t = Ft.gen
    M = companion_module([mono(Ft, t, -2), RamifiedSeries.zero(Ft)], field=Ft)
    dec = turrittin_levelt(M)
    assert len(dec.extensions) == 1
    name, minpoly = dec.extensions[0]
    assert name == "w"
    assert len(minpoly) == 3
    assert sorted(p.phi.to_str() for p in dec.parts) == ["-w*x^-1", "w*x^-1"]
    assert dec.reconstruction_ok(M)
    with pytest.raises(ExtensionRequiredError):
        turrittin_levelt(M, auto_extend=False)


def test_regular_module_single_part():
    M = companion_module([mono(QQ, 1, 0), S(QQ, {0: 1, 1: 2})])
    dec = turrittin_levelt(M)
    assert len(dec.parts) == 1
    assert dec.parts[0].phi.is_zero()
    assert dec.parts[0].rank == 2
    assert dec.reconstruction_ok(M)


def test_rank_one_polar_split():
    g = S(QQ, {-2: 1, 0: 1, 1: 4})
    M = DiffModule(QQ, SeriesMatrix(QQ, [[g]]))
    dec = turrittin_levelt(M)
    (part,) = dec.parts
    assert part.phi.series.coeffs == {F(-2): F(1)}
    assert part.regular.entry(0, 0).coeffs == {F(0): F(1), F(1): F(4)}
    assert dec.reconstruction_ok(M)


def test_twisted_pair_cancels_to_regular():
    # L_phi (+) L_{-phi} tensored back: direct sum with phi = 2 x^-2
    phi = mono(QQ, 2, -2)
    G = SeriesMatrix(QQ, [[phi, RamifiedSeries.zero(QQ)], [RamifiedSeries.zero(QQ), -phi]])
    M = DiffModule(QQ, G)
    dec = turrittin_levelt(M)
    assert sorted(p.phi.to_str() for p in dec.parts) == ["-2*x^-2", "2*x^-2"]
    twisted = M.twist(phi)
    dec2 = turrittin_levelt(twisted)
    assert sorted(p.phi.to_str() for p in dec2.parts) == ["-4*x^-2", "0"]


def test_decomposition_invariant_under_exact_gauge():
    M = euler_module()
    base = sorted((p.phi.to_str(), p.rank) for p in turrittin_levelt(M).parts)
    rng = random.Random(11)
    for _ in range(6):
        pairs = []
        for _ in range(rng.randint(1, 3)):
            i = rng.randrange(2)
            j = 1 - i
            s = S(Ft, {rng.randint(1, 2): rng.randint(-2, 2)})
            pairs.append((i, j, s))
        Mg = exact_gauge(M, pairs)
        dec = turrittin_levelt(Mg)
        assert sorted((p.phi.to_str(), p.rank) for p in dec.parts) == base
        assert dec.reconstruction_ok(Mg)


def test_reconstruction_precision_scales_with_request():
    M = companion_module([mono(QQ, 1, -3), mono(QQ, 1, -1)])
    dec = turrittin_levelt(M, wprec=F(30))
    prec = dec.guaranteed_prec()
    assert prec is not None and prec >= F(20)
    assert dec.reconstruction_ok(M)


def test_ramification_divides_rank_factorial():
    cases = [
        companion_module([mono(QQ, 1, -3), RamifiedSeries.zero(QQ)]),
        companion_module([mono(QQ, 1, -4), mono(QQ, 2, -2), RamifiedSeries.zero(QQ)]),
        euler_module(),
    ]
    import math

    for M in cases:
        dec = turrittin_levelt(M)
        assert math.factorial(M.rank) % dec.e == 0
        assert dec.total_rank == M.rank


# -- slope decomposition ---------------------------------------------------------------


def test_slope_decomposition_two_slopes():
    t = Ft.gen
    z = RamifiedSeries.zero(Ft)
    G = SeriesMatrix(Ft, [[mono(Ft, 1, -2), z], [z, mono(Ft, 3, -1)]])
    M = DiffModule(Ft, G)
    sd = slope_decomposition(M)
    assert [(p.slope, p.module.rank) for p in sd.parts] == [(F(2), 1), (F(1), 1)]
    for p in sd.parts:
        assert katz_rank(p.module) == p.slope
    assert sd.total_rank == 2


def test_slope_decomposition_agrees_with_polygon():
    cases = [
        euler_module(),
        companion_module([mono(QQ, 1, -3), RamifiedSeries.zero(QQ)]),
        companion_module([mono(QQ, 1, -2), mono(QQ, 1, -1)]),
    ]
    for M in cases:
        sd = slope_decomposition(M)
        assert sd.multiset() == {
            s: int(m) for s, m in newton_polygon(M).slopes().items()
        }


def test_slope_decomposition_stays_rational():
    # residue spectrum +-sqrt(t) but the slope split never leaves Q(t)
    t = Ft.gen
    M = companion_module([mono(Ft, t, -2), RamifiedSeries.zero(Ft)], field=Ft)
    sd = slope_decomposition(M)
    assert [(p.slope, p.module.rank) for p in sd.parts] == [(F(1), 2)]
    assert sd.parts[0].module.field == Ft


# -- normal form -----------------------------------------------------------------------


def test_normal_form_euler():
    M = euler_module()
    nf = normal_form(M)
    assert nf.rho == F(1)
    assert nf.e == 1
    assert nf.integral_matrix.is_integral()
    t = Ft.gen
    assert nf.leading_charpoly.coeffs == (Ft.zero, Ft.neg(t), Ft.one)


def test_normal_form_charpoly_gauge_invariant():
    M = euler_module()
    nf0 = normal_form(M)
    Mg = exact_gauge(M, [(0, 1, S(Ft, {1: 1}))])
    nf = normal_form(Mg)
    assert nf.leading_charpoly.coeffs == nf0.leading_charpoly.coeffs
    assert nf.integral_matrix.is_integral()


def test_normal_form_chases_rational_basis_zeros():
    """Gauges that plant det-J zeros at x = -1 and x = 1/2 get chased away."""
    z = RamifiedSeries.zero(QQ)
    G = SeriesMatrix(QQ, [[mono(QQ, 1, -1), mono(QQ, -1, 0)], [z, z]])
    M = DiffModule(QQ, G)
    nf0 = normal_form(M)
    assert nf0.leading_charpoly.coeffs == (F(0), F(-1), F(1))
    for pairs in ([(0, 1, S(QQ, {2: 1}))], [(1, 0, S(QQ, {1: 2}))]):
        Mg = exact_gauge(M, pairs)
        nf = normal_form(Mg)
        assert nf.leading_charpoly.coeffs == nf0.leading_charpoly.coeffs
        assert nf.integral_matrix.is_integral()


def test_normal_form_irrational_zero_requests_extension():
    M = euler_module()
    Mg = exact_gauge(M, [(1, 0, S(Ft, {1: 1}))])
    with pytest.raises(ExtensionRequiredError):
        normal_form(Mg)


def test_normal_form_regular_case():
    M = companion_module([mono(QQ, 1, 0), S(QQ, {0: 1})])
    nf = normal_form(M)
    assert nf.rho == F(0)
    assert nf.integral_matrix.is_integral()
    # companion residue [[0, 1], [1, 1]]
    assert nf.leading == [[F(0), F(1)], [F(1), F(1)]]


def test_normal_form_rejects_truncated_input():
    from meroconn.errors import PrecisionError

    g = S(QQ, {-1: 1}, prec=F(6))
    M = DiffModule(QQ, SeriesMatrix(QQ, [[g, RamifiedSeries.one(QQ)], [RamifiedSeries.zero(QQ), g]]))
    with pytest.raises(PrecisionError):
        normal_form(M)


def test_normal_form_nonzero_leading_eigenvalues_match_parts():
    M = companion_module([mono(QQ, 1, -3), mono(QQ, 1, -1)])
    nf = normal_form(M)
    assert nf.rho == F(3, 2)
    chi = nf.leading_charpoly
    # T^2 - 1: the +-1 eigenvalues are the deepest coefficients of the parts
    assert chi.coeffs == (F(-1), F(0), F(1))


# -- randomized corpus ------------------------------------------------------------------


def random_exact_module(rng, rank, field=QQ):
    rows = []
    for i in range(rank):
        row = []
        for j in range(rank):
            coeffs = {}
            for _ in range(rng.randint(0, 2)):
                exp = rng.randint(-2, 2)
                val = rng.randint(-3, 3)
                if val:
                    coeffs[F(exp)] = field.from_int(val)
            row.append(RamifiedSeries(field, coeffs))
        rows.append(row)
    return DiffModule(field, SeriesMatrix(field, rows))


def test_random_corpus_decomposition_contracts():
    """Rank, slope bookkeeping and reconstruction on seeded random inputs."""
    rng = random.Random(20240817)
    done = 0
    attempts = 0
    while done < 8 and attempts < 60:
        attempts += 1
        M = random_exact_module(rng, rng.choice([2, 2, 3]))
        try:
            dec = turrittin_levelt(M)
        except ExtensionRequiredError:
            continue
        assert dec.total_rank == M.rank
        assert dec.reconstruction_ok(M)
        np_slopes = {s: int(m) for s, m in newton_polygon(M).slopes().items()}
        assert dec.slope_multiset() == np_slopes
        done += 1
    assert done == 8
