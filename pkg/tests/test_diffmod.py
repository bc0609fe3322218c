from fractions import Fraction

import pytest

from meroconn.diffmod import (
    DiffModule,
    NewtonPolygon,
    cyclic_vector,
    diff_operator,
    direct_sum,
    dual,
    end_module,
    irregularity,
    katz_rank,
    newton_polygon,
    spectral_growth_check,
    tensor,
)
from meroconn.fields import QQ, FunctionField
from meroconn.series import RamifiedSeries, SeriesMatrix

F = Fraction
Ft = FunctionField(QQ, "t")


def S(field, coeffs, e=1):
    return RamifiedSeries(field, coeffs, e)


def mono(field, c, exp, e=1):
    return RamifiedSeries.monomial(field, c, F(exp), e)


def euler_module():
    """Rank 2 over Q(t): G = [[t/x, -1], [0, 0]]."""
    t = Ft.gen
    z = RamifiedSeries.zero(Ft)
    G = SeriesMatrix(
        Ft,
        [
            [mono(Ft, t, -1), mono(Ft, Ft.neg(Ft.one), 0)],
            [z, z],
        ],
    )
    return DiffModule(Ft, G)


def companion_module(theta_list, field=QQ):
    """Module with cyclic basis relation nabla^mu m = sum theta_j nabla^j m."""
    mu = len(theta_list)
    z = RamifiedSeries.zero(field)
    one = RamifiedSeries.one(field)
    # column j < mu-1 maps e_{j+1} to e_{j+2}; the last column carries the thetas
    rows = [[z] * mu for _ in range(mu)]
    for j in range(mu - 1):
        rows[j + 1][j] = one
    for i in range(mu):
        rows[i][mu - 1] = rows[i][mu - 1] + theta_list[i]
    return DiffModule(field, SeriesMatrix(field, rows))


def test_euler_cyclic_vector_is_e2():
    M = euler_module()
    m, W = cyclic_vector(M)
    assert m[0].is_exact_zero()
    assert m[1].coeffs == {F(0): Ft.one}
    d = W.det()
    assert d.coeffs == {F(0): Ft.one}


def test_euler_operator_and_polygon():
    M = euler_module()
    op, m, W = diff_operator(M)
    t = Ft.gen
    assert op.coeffs[0].agrees_with(RamifiedSeries.zero(Ft, prec=op.coeffs[0].prec))
    assert op.coeffs[1].coeffs == {F(-1): t}
    np = newton_polygon(M)
    assert np.vertices == ((F(0), F(-1)), (F(1), F(-1)), (F(2), F(0)))
    assert np.slopes() == {F(0): F(1), F(1): F(1)}
    assert np.irregularity == F(1)
    assert katz_rank(M) == F(1)


def test_three_halves_slope():
    M = companion_module([mono(QQ, F(1), -3), mono(QQ, F(1), -1)])
    op, _, _ = diff_operator(M)
    assert op.katz_rank() == F(3, 2)
    np = newton_polygon(M)
    assert np.vertices == ((F(0), F(-3)), (F(2), F(0)))
    assert np.slopes() == {F(3, 2): F(2)}
    assert np.irregularity == F(3)


def test_zero_connection_is_regular():
    z = RamifiedSeries.zero(QQ)
    M = DiffModule(QQ, SeriesMatrix(QQ, [[z, z], [z, z]]))
    m, W = cyclic_vector(M)
    # e_1 + x e_2 works once the constant candidates fail
    assert m[0].coeffs == {F(0): F(1)}
    assert m[1].coeffs == {F(1): F(1)}
    op, _, _ = diff_operator(M)
    assert op.coeffs[1].coeffs == {F(0): F(1)}
    np = newton_polygon(M)
    assert np.vertices == ((F(0), F(0)), (F(2), F(0)))
    assert np.slopes() == {F(0): F(2)}
    assert np.irregularity == F(0)
    assert katz_rank(M) == F(0)


def test_rank_one_twist_cancels():
    t = Ft.gen
    phi = mono(Ft, t, -1)
    L = DiffModule(Ft, SeriesMatrix(Ft, [[phi]]))
    T = L.twist(phi)
    assert T.matrix.entry(0, 0).is_exact_zero()


def test_tensor_of_opposite_exponentials():
    t = Ft.gen
    L1 = DiffModule(Ft, SeriesMatrix(Ft, [[mono(Ft, t, -1)]]))
    L2 = DiffModule(Ft, SeriesMatrix(Ft, [[mono(Ft, Ft.neg(t), -1)]]))
    T = tensor(L1, L2)
    assert T.rank == 1
    assert T.matrix.entry(0, 0).is_exact_zero()


def test_dual_negates_transpose():
    M = euler_module()
    D = dual(M)
    t = Ft.gen
    assert D.matrix.entry(0, 0).coeffs == {F(-1): Ft.neg(t)}
    assert D.matrix.entry(0, 1).is_exact_zero()
    assert D.matrix.entry(1, 0).coeffs == {F(0): Ft.one}


def test_end_module_slopes():
    M = euler_module()
    E = end_module(M)
    assert E.rank == 4
    np = newton_polygon(E)
    assert np.slopes() == {F(0): F(2), F(1): F(2)}
    assert np.irregularity == F(2)


def test_direct_sum_polygon_adds():
    A = companion_module([mono(QQ, F(1), -3), mono(QQ, F(1), -1)])
    z = RamifiedSeries.zero(QQ)
    B = DiffModule(QQ, SeriesMatrix(QQ, [[z]]))
    Msum = direct_sum(A, B)
    np = newton_polygon(Msum)
    assert np.irregularity == F(3)
    assert np.slopes() == {F(0): F(1), F(3, 2): F(2)}


def test_gauge_euler_normalizing_basis():
    # new basis f_0 = e_2, f_1 = -x e_1 turns G into x^{-1} [[0,0],[1,x+t]]
    M = euler_module()
    z = RamifiedSeries.zero(Ft)
    P = SeriesMatrix(
        Ft,
        [
            [z, mono(Ft, Ft.neg(Ft.one), 1)],
            [RamifiedSeries.one(Ft), z],
        ],
    )
    H = M.gauge(P, wprec=F(8))
    t = Ft.gen
    assert H.matrix.entry(0, 0).agrees_with(RamifiedSeries.zero(Ft, prec=F(5)))
    assert H.matrix.entry(0, 1).agrees_with(RamifiedSeries.zero(Ft, prec=F(5)))
    assert H.matrix.entry(1, 0).coeffs == {F(-1): Ft.one}
    expect = RamifiedSeries(Ft, {F(-1): t, F(0): Ft.one})
    assert H.matrix.entry(1, 1).agrees_with(expect)
    # reconstruction: G P + theta(P) = P H below working precision
    lhs = M.matrix * P + P.theta()
    rhs = P * H.matrix
    assert lhs.agrees_with(rhs, below=F(5))


def test_gauge_diagonal_exact():
    M = companion_module([mono(QQ, F(1), -3), mono(QQ, F(1), -1)])
    d = [
        RamifiedSeries.one(QQ, e=2),
        mono(QQ, F(1), F(3, 2), e=2),
    ]
    H = M.ramify(2).gauge_diagonal(d)
    # entry (0,1) picks up x^{3/2}, entry (1,0) loses it, diagonal gains 3/2
    assert H.matrix.entry(0, 1).coeffs == {F(-3, 2): F(1)}
    assert H.matrix.entry(1, 0).coeffs == {F(-3, 2): F(1)}
    assert H.matrix.entry(1, 1).coeffs == {F(-1): F(1), F(0): F(3, 2)}
    assert H.matrix.min_prec() is None


def test_spectral_growth_euler():
    M = euler_module()
    ok, rho, rows = spectral_growth_check(M, terms=5)
    assert ok
    assert rho == F(1)
    for n, v, bound in rows:
        assert v >= bound
    # the first matrix really has a pole of order one
    assert rows[0][1] == F(-1)


def test_spectral_growth_regular_stays_integral():
    z = RamifiedSeries.zero(QQ)
    one = RamifiedSeries.one(QQ)
    M = DiffModule(QQ, SeriesMatrix(QQ, [[z, one], [z, z]]))
    ok, rho, rows = spectral_growth_check(M, terms=4)
    assert ok
    assert rho == F(0)
    for _, v, bound in rows:
        assert bound == 0
        assert v is None or v >= 0


def test_spectral_growth_sigma_threshold():
    """The growth test separates the true slope from anything smaller."""
    for M in (euler_module(), companion_module([mono(QQ, F(1), -3), RamifiedSeries.zero(QQ)])):
        rho = katz_rank(M)
        assert rho > 0
        ok_at, _, _ = spectral_growth_check(M, sigma=rho)
        assert ok_at
        below = rho - F(1, M.rank)
        ok_below, _, _ = spectral_growth_check(M, sigma=below, terms=3 * M.rank + 4)
        assert not ok_below


def test_polygon_inclusion_and_integrality():
    big = NewtonPolygon([(0, -3), (2, 0)], 2)
    small = NewtonPolygon([(0, -1), (1, -1), (2, 0)], 2)
    assert big.includes(small)
    assert not small.includes(big)
    assert big.includes(big)
    assert big.is_integral()
    assert big.height(1) == F(-3, 2)
    assert big.max_slope() == F(3, 2)


def test_polygon_from_points_flat_pad():
    # a huge first-order coefficient forces one slope-zero solution
    np = NewtonPolygon.from_points([(0, -1), (1, -5)], 2)
    assert np.vertices == ((F(0), F(-5)), (F(1), F(-5)), (F(2), F(0)))
    assert np.slopes() == {F(0): F(1), F(5): F(1)}


def test_ramified_module_polygon():
    # sqrt(x) coefficient: slope 1/2 on the refined lattice
    M = DiffModule(QQ, SeriesMatrix(QQ, [[S(QQ, {F(-1, 2): F(1)}, e=2)]], e=2))
    np = newton_polygon(M)
    assert np.vertices == ((F(0), F(-1, 2)), (F(1), F(0)))
    assert np.slopes() == {F(1, 2): F(1)}
    assert np.irregularity == F(1, 2)
    assert not np.is_integral()


def test_unramified_polygon_has_integral_vertices():
    import random

    rng = random.Random(3)
    for _ in range(15):
        n = rng.randrange(1, 4)
        rows = []
        for i in range(n):
            row = []
            for j in range(n):
                coeffs = {}
                for _ in range(rng.randrange(0, 3)):
                    coeffs[F(rng.randrange(-3, 2))] = F(rng.randrange(-4, 5))
                row.append(S(QQ, coeffs))
            rows.append(row)
        M = DiffModule(QQ, SeriesMatrix(QQ, rows))
        try:
            np = newton_polygon(M)
        except Exception:
            continue
        assert np.is_integral()
        assert sum(np.slopes().values()) == n
