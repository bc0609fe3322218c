"""Formal classification of differential modules at an irregular point.

The pipeline: find a cyclic vector, shear the companion basis by powers of
xi = x^rho so the scaled connection xi.nabla becomes x-integral, split the
resulting matrix by generalized eigenspaces of its residue (a Hensel-type
lifting solved order by order through Sylvester equations), twist away
common exponential leading terms, and recurse.  The recursion terminates
along the lexicographic order on (rank, growth rank).

Every part of the output is a pair (exponential part phi, regular matrix R)
with phi a finite sum of monomials of negative exponent; phi labels the
rank-1 twist whose connection matrix is the scalar series phi itself.

A lighter driver produces the decomposition by slopes only; it clusters
residue eigenvalues into zero/nonzero and therefore never needs a field
extension.  The parametric normal form (integral leading matrix after an
explicit basis-denominator chase) lives here too.
"""

from __future__ import annotations

from fractions import Fraction
from math import factorial, lcm
from typing import NamedTuple

from . import _polyops as PO
from . import linalg as LA
from .diffmod import DiffModule, diff_operator
from .errors import (
    ExtensionRequiredError,
    InconsistentOperatorError,
    MeroconnError,
    PrecisionError,
    SingleClusterError,
)
from .factorization import irreducible_factors, roots_in_field
from .fields import ExtensionField
from .polynomials import Poly
from .series import RamifiedSeries, SeriesMatrix, pmin


class ExponentialPart:
    """Finite sum of monomials c * x^r with r < 0, on the 1/e lattice."""

    __slots__ = ("series",)

    def __init__(self, series: RamifiedSeries):
        if series.prec is not None:
            raise MeroconnError("exponential part must be exact")
        if any(exp >= 0 for exp in series.coeffs):
            raise MeroconnError("exponential part must have negative exponents only")
        self.series = series

    @classmethod
    def zero(cls, field, e=1):
        return cls(RamifiedSeries.zero(field, e))

    @classmethod
    def monomial(cls, field, coeff, exp, e=1):
        return cls(RamifiedSeries.monomial(field, coeff, Fraction(exp), e))

    @classmethod
    def from_series(cls, s: RamifiedSeries):
        """Polar part of s; requires the polar range to be fully visible."""
        if s.prec is not None and s.prec < 0:
            raise PrecisionError(
                "polar part not fully determined", available=s.prec
            )
        coeffs = {exp: c for exp, c in s.coeffs.items() if exp < 0}
        return cls(RamifiedSeries(s.field, coeffs, s.e))

    @property
    def field(self):
        return self.series.field

    @property
    def e(self):
        return self.series.e

    def is_zero(self) -> bool:
        return not self.series.coeffs

    def pole_order(self) -> Fraction:
        if not self.series.coeffs:
            return Fraction(0)
        return -min(self.series.coeffs)

    def leading(self):
        """(exponent, coefficient) at the deepest pole."""
        exp = min(self.series.coeffs)
        return exp, self.series.coeffs[exp]

    def as_series(self, e=None) -> RamifiedSeries:
        return self.series if e is None else self.series.with_e(e)

    def add(self, other: "ExponentialPart") -> "ExponentialPart":
        return ExponentialPart(self.series + other.series)

    def map_field(self, target) -> "ExponentialPart":
        return ExponentialPart(self.series.map_field(target))

    def with_e(self, e) -> "ExponentialPart":
        return ExponentialPart(self.series.with_e(e))

    def same_as(self, other: "ExponentialPart") -> bool:
        return self.series.agrees_with(other.series)

    def to_str(self, var="x"):
        return self.series.to_str(var) if self.series.coeffs else "0"

    def __repr__(self):
        return f"ExponentialPart({self.to_str()})"


class TLPart(NamedTuple):
    phi: ExponentialPart
    regular: SeriesMatrix
    rank: int


class TLDecomposition:
    def __init__(self, parts, e, field, gauge, extensions):
        self.parts = list(parts)
        self.e = e
        self.field = field
        self.gauge = gauge
        self.extensions = list(extensions)

    @property
    def total_rank(self):
        return sum(p.rank for p in self.parts)

    def block_sum(self) -> SeriesMatrix:
        """Direct sum of the matrices phi_j * I + R_j on the final lattice."""
        out = None
        for part in self.parts:
            R = part.regular.with_e(self.e)
            phi = part.phi.as_series(self.e)
            rows = []
            for i in range(part.rank):
                row = []
                for j in range(part.rank):
                    entry = R.entry(i, j)
                    if i == j:
                        entry = entry + phi
                    row.append(entry)
                rows.append(row)
            blk = SeriesMatrix(self.field, rows, self.e)
            out = blk if out is None else out.block_diag(blk)
        return out

    def reconstruction_ok(self, M: DiffModule, below=None) -> bool:
        """Does gauging the block sum back reproduce M (up to precision)?"""
        G = M.matrix.map_field(self.field).with_e(self.e)
        Q = self.gauge
        D = self.block_sum()
        lhs = G * Q + Q.theta()
        rhs = Q * D
        return lhs.agrees_with(rhs, below=below)

    def guaranteed_prec(self):
        p = self.gauge.min_prec()
        for part in self.parts:
            p = pmin(p, part.regular.min_prec())
        return p

    def slope_multiset(self):
        out = {}
        for part in self.parts:
            s = part.phi.pole_order()
            out[s] = out.get(s, 0) + part.rank
        return out

    def phi_multiset(self):
        return sorted((p.phi.to_str(), p.rank) for p in self.parts)

    def __repr__(self):
        inner = ", ".join(f"({p.phi.to_str()}, rank {p.rank})" for p in self.parts)
        return f"TLDecomposition[{inner}; e={self.e}]"


# -- shearing -------------------------------------------------------------------


def companion_matrix(field, op, e=1) -> SeriesMatrix:
    """theta-matrix in the cyclic basis m, nabla m, ..."""
    mu = op.mu
    z = RamifiedSeries.zero(field, e)
    rows = [[z] * mu for _ in range(mu)]
    one = RamifiedSeries.one(field, e)
    for j in range(mu - 1):
        rows[j + 1][j] = one
    for i in range(mu):
        rows[i][mu - 1] = rows[i][mu - 1] + op.coeffs[i].with_e(e)
    return SeriesMatrix(field, rows, e)


def sheared_delta_matrix(field, op, rho: Fraction, e: int) -> SeriesMatrix:
    """Matrix B of xi.nabla in the basis xi^j nabla^j m, xi = x^rho.

    B is x-integral: subdiagonal ones, diagonal j*rho*xi, and last column
    theta_i xi^(mu-i).  Its residue is not nilpotent when rho is the true
    growth rank.
    """
    mu = op.mu
    if (rho * e).denominator != 1:
        raise MeroconnError(f"x^{rho} is not on the 1/{e} lattice")
    z = RamifiedSeries.zero(field, e)
    rows = [[z] * mu for _ in range(mu)]
    one = RamifiedSeries.one(field, e)
    for j in range(mu - 1):
        rows[j + 1][j] = one
    for i in range(mu):
        shifted = op.coeffs[i].with_e(e).shift(rho * (mu - i))
        rows[i][mu - 1] = rows[i][mu - 1] + shifted
        if rho > 0 and i > 0:
            rows[i][i] = rows[i][i] + RamifiedSeries.monomial(
                field, field.from_fraction(i * rho), rho, e
            )
    B = SeriesMatrix(field, rows, e)
    if not B.is_integral():
        raise InconsistentOperatorError(
            "sheared matrix not integral; growth rank inconsistent with operator"
        )
    return B


def shear_gauge(field, W: SeriesMatrix, rho: Fraction, e: int) -> SeriesMatrix:
    """Basis matrix W . diag(1, xi, ..., xi^(mu-1))."""
    mu = W.nrows
    Wr = W.with_e(e)
    cols = []
    for j in range(mu):
        xi_j = RamifiedSeries.monomial(field, field.one, rho * j, e)
        cols.append([Wr.entry(i, j) * xi_j for i in range(mu)])
    return SeriesMatrix(field, [[cols[j][i] for j in range(mu)] for i in range(mu)], e)


def shear(M: DiffModule, rho=None, wprec=None, seed: int = 0):
    """Cyclic companion basis sheared by x^rho.

    Returns (B, Q, op, e) with B the x-integral matrix of x^rho . nabla,
    Q the accumulated basis matrix, op the cyclic operator, e the lattice
    after any ramification needed for x^rho.  rho defaults to the growth
    rank; rho = 0 returns the plain companion data.
    """
    if wprec is None:
        wprec = M.default_wprec()
    op, m, W = diff_operator(M, wprec, seed)
    if rho is None:
        rho = op.katz_rank()
    rho = Fraction(rho)
    e = lcm(M.e, rho.denominator) if rho > 0 else M.e
    if rho == 0:
        return companion_matrix(M.field, op, e), W.with_e(e), op, e
    B = sheared_delta_matrix(M.field, op, rho, e)
    Q = shear_gauge(M.field, W, rho, e)
    return B, Q, op, e


# -- residue clustering -----------------------------------------------------------


def cluster_residue(field, chi: Poly, policy: str = "roots"):
    """Split the residue characteristic polynomial into coprime cluster factors.

    Returns a list of (root_or_None, cluster_poly).  Raises SingleClusterError
    when no split is possible and ExtensionRequiredError (with the offending
    minimal polynomial) when a root outside the field is needed.
    """
    n = chi.degree
    if policy == "slope":
        k = 0
        coeffs = list(chi.coeffs)
        while k <= n and field.is_zero(coeffs[k]):
            k += 1
        zero_part = Poly(field, [field.zero] * k + [field.one]) if k else None
        nz = Poly(field, coeffs[k:])
        out = []
        if nz.degree >= 1:
            out.append((None, nz.monic()))
        if zero_part is not None:
            out.append((field.zero, zero_part))
        if len(out) < 2:
            raise SingleClusterError(
                "single cluster: residue spectrum does not separate by slope"
            )
        return out
    factors = irreducible_factors(chi)
    if policy == "coarse":
        if len(factors) < 2:
            raise SingleClusterError("single cluster: one irreducible factor")
        out = []
        for f, mult in factors:
            root = None
            if f.degree == 1:
                root = field.neg(f.coeffs[0])
            out.append((root, f**mult))
        return out
    if policy != "roots":
        raise MeroconnError(f"unknown cluster policy {policy!r}")
    for f, _ in factors:
        if f.degree > 1:
            raise ExtensionRequiredError(
                "residue eigenvalue needs a field extension",
                minpoly=f.monic().coeffs,
            )
    out = []
    for f, mult in factors:
        out.append((field.neg(f.coeffs[0]), f**mult))
    if len(out) < 2:
        raise SingleClusterError("single cluster: one eigenvalue")
    return out


class SplitResult(NamedTuple):
    transition: SeriesMatrix
    blocks: list
    diag: SeriesMatrix
    cluster_polys: list
    ranks: list


def _sylvester_inverse(field, Bi, Bj):
    ni, nj = len(Bi), len(Bj)
    size = ni * nj
    L = [[field.zero] * size for _ in range(size)]
    for a in range(ni):
        for b in range(nj):
            row = a * nj + b
            for c in range(ni):
                L[row][c * nj + b] = field.add(L[row][c * nj + b], Bi[a][c])
            for d in range(nj):
                L[row][a * nj + d] = field.sub(L[row][a * nj + d], Bj[d][b])
    return LA.inv(field, L)


def split_by_residue(
    B: SeriesMatrix,
    rho: Fraction,
    wprec,
    clusters=None,
    policy: str = "roots",
) -> SplitResult:
    """Block-diagonalize an integral matrix for the derivation x^rho (x d/dx).

    The residue's generalized eigenspaces (grouped by `clusters`, coprime
    factors of its characteristic polynomial) are lifted to a splitting of
    the full matrix by an order-by-order gauge P = C(I + O(x^{1/e})); each
    order solves one Sylvester equation per off-diagonal block.
    """
    F = B.field
    n = B.nrows
    e = B.e
    rho = Fraction(rho)
    if rho <= 0:
        raise MeroconnError("split needs a positive lattice scaling")
    if not B.is_integral():
        raise MeroconnError("split needs an x-integral matrix")
    B0 = B.constant_matrix()
    chi = LA.charpoly(F, B0)
    if clusters is None:
        clusters = cluster_residue(F, chi, policy)
    if len(clusters) < 2:
        raise SingleClusterError("single cluster: nothing to split")
    cluster_polys = [q for _, q in clusters]
    # projector per cluster: p = v*r mod chi where u*q + v*r = 1, r = chi/q
    cols = []
    ranks = []
    for q in cluster_polys:
        r = chi.monic().exact_div(q.monic())
        g_c, _, v_c = PO.xgcd(F, q.monic().coeffs, r.coeffs)
        if PO.deg(g_c) != 0:
            raise MeroconnError("cluster polynomials are not coprime")
        proj_poly = (Poly(F, v_c) * r).divmod(chi.monic())[1]
        Pc = LA.eval_poly(F, proj_poly, B0)
        idx = LA.independent_columns(F, Pc)
        if len(idx) != q.degree:
            raise MeroconnError("projector rank does not match cluster degree")
        ranks.append(q.degree)
        for c in idx:
            cols.append([Pc[r_][c] for r_ in range(n)])
    C = [[cols[j][i] for j in range(len(cols))] for i in range(n)]
    if len(cols) != n:
        raise MeroconnError("cluster ranks do not fill the space")
    Cinv = LA.inv(F, C)
    Cs = SeriesMatrix.from_scalars(F, C, e)
    Cinv_s = SeriesMatrix.from_scalars(F, Cinv, e)
    Bc = Cinv_s * B * Cs
    B0c = LA.mul(F, LA.mul(F, Cinv, B0), C)
    offsets = [0]
    for r_ in ranks:
        offsets.append(offsets[-1] + r_)
    blk = len(ranks)

    def block_of(Mat, i, j):
        return [
            row[offsets[j] : offsets[j + 1]]
            for row in Mat[offsets[i] : offsets[i + 1]]
        ]

    for i in range(blk):
        for j in range(blk):
            if i == j:
                continue
            for row in block_of(B0c, i, j):
                for val in row:
                    if not F.is_zero(val):
                        raise MeroconnError("residue conjugation failed to block")
    syl = {}
    for i in range(blk):
        for j in range(blk):
            if i != j:
                syl[(i, j)] = _sylvester_inverse(F, block_of(B0c, i, i), block_of(B0c, j, j))

    def blockdiag_part(Mat):
        out = [[F.zero] * n for _ in range(n)]
        for bi in range(blk):
            for r_ in range(offsets[bi], offsets[bi + 1]):
                for c_ in range(offsets[bi], offsets[bi + 1]):
                    out[r_][c_] = Mat[r_][c_]
        return out

    # order-by-order lifting on the coefficient matrices of Bc: cheap
    # convolutions instead of repeated full series products
    target = pmin(B.min_prec(), Fraction(wprec))
    bc = {}
    for i in range(n):
        for j in range(n):
            for exp, c in Bc.entry(i, j).coeffs.items():
                if exp >= target:
                    continue
                slot = bc.setdefault(exp, [[F.zero] * n for _ in range(n)])
                slot[i][j] = c
    p = {Fraction(0): LA.identity(F, n)}
    h = {Fraction(0): bc.get(Fraction(0), LA.zeros(F, n, n))}
    k = 1
    while Fraction(k, e) < target:
        s = Fraction(k, e)
        k += 1
        Rs = LA.zeros(F, n, n)
        for a, Ba in bc.items():
            Pb = p.get(s - a)
            if Pb is not None:
                Rs = LA.add(F, Rs, LA.mul(F, Ba, Pb))
        q = s - rho
        Pq = p.get(q)
        if Pq is not None and q != 0:
            Rs = LA.add(F, Rs, LA.scale(F, F.from_fraction(q), Pq))
        for a, Pa in p.items():
            Hb = h.get(s - a)
            if Hb is not None:
                Rs = LA.sub(F, Rs, LA.mul(F, Pa, Hb))
        if all(F.is_zero(v) for row in Rs for v in row):
            continue
        Hs = blockdiag_part(Rs)
        if any(not F.is_zero(v) for row in Hs for v in row):
            h[s] = Hs
        Ps = [[F.zero] * n for _ in range(n)]
        nonzero = False
        for bi in range(blk):
            for bj in range(blk):
                if bi == bj:
                    continue
                rhs = []
                skip = True
                for r_ in range(offsets[bi], offsets[bi + 1]):
                    for c_ in range(offsets[bj], offsets[bj + 1]):
                        val = Rs[r_][c_]
                        if not F.is_zero(val):
                            skip = False
                        rhs.append(F.neg(val))
                if skip:
                    continue
                sol = LA.mat_vec(F, syl[(bi, bj)], rhs)
                m_ = 0
                for r_ in range(offsets[bi], offsets[bi + 1]):
                    for c_ in range(offsets[bj], offsets[bj + 1]):
                        Ps[r_][c_] = sol[m_]
                        m_ += 1
                        nonzero = True
        if nonzero:
            p[s] = Ps

    def assemble(table):
        rows = []
        for i in range(n):
            row = []
            for j in range(n):
                coeffs = {}
                for exp, Mat in table.items():
                    if not F.is_zero(Mat[i][j]):
                        coeffs[exp] = Mat[i][j]
                row.append(RamifiedSeries(F, coeffs, e, target))
            rows.append(row)
        return SeriesMatrix(F, rows, e)

    H = assemble(h)
    P = assemble(p)
    blocks = []
    for bi in range(blk):
        rows = [
            [H.entry(i, j) for j in range(offsets[bi], offsets[bi + 1])]
            for i in range(offsets[bi], offsets[bi + 1])
        ]
        blocks.append(SeriesMatrix(F, rows, e))
    return SplitResult(Cs * P, blocks, H, cluster_polys, ranks)


# -- full decomposition ------------------------------------------------------------


def _fresh_extension_name(field):
    names = set(field.var_names())
    k = 0
    while True:
        cand = "w" if k == 0 else f"w{k}"
        if cand not in names:
            return cand
        k += 1


def _extend_field(field, minpoly_coeffs):
    name = _fresh_extension_name(field)
    return ExtensionField(field, name, tuple(minpoly_coeffs)), name


def _x_shift_matrix(Mx: SeriesMatrix, k: Fraction) -> SeriesMatrix:
    return Mx.map_entries(lambda s: s.shift(k))


def _tl_worker(M: DiffModule, wprec, auto_extend, seed, rho_bound=None):
    """Returns (parts, gauge, e, field, chain)."""
    F = M.field
    mu = M.rank
    if mu == 1:
        g = M.matrix.entry(0, 0)
        phi = ExponentialPart.from_series(g)
        R = SeriesMatrix(F, [[g - phi.as_series()]], M.e)
        return [TLPart(phi, R, 1)], SeriesMatrix.identity(F, 1, M.e), M.e, F, []
    op, m, W = diff_operator(M, wprec, seed)
    rho = op.katz_rank()
    if rho_bound is not None and rho >= rho_bound:
        raise InconsistentOperatorError("growth rank failed to drop after twist")
    if rho == 0:
        C = companion_matrix(F, op, M.e)
        return (
            [TLPart(ExponentialPart.zero(F, M.e), C, mu)],
            W,
            M.e,
            F,
            [],
        )
    e = lcm(M.e, rho.denominator)
    B = sheared_delta_matrix(F, op, rho, e)
    Q = shear_gauge(F, W, rho, e)
    chain = []
    while True:
        B0 = B.constant_matrix()
        chi = LA.charpoly(F, B0)
        if all(F.is_zero(c) for c in chi.coeffs[:-1]):
            raise SingleClusterError(
                "sheared residue nilpotent at positive growth rank"
            )
        try:
            try:
                clusters = cluster_residue(F, chi, "roots")
            except SingleClusterError:
                clusters = [cluster_single(F, chi)]
            break
        except ExtensionRequiredError as err:
            if not auto_extend:
                raise
            F2, name = _extend_field(F, err.minpoly)
            chain.append((name, err.minpoly))
            B = B.map_field(F2)
            Q = Q.map_field(F2)
            F = F2
    if len(clusters) == 1:
        root = clusters[0][0]
        if root is None:
            raise ExtensionRequiredError(
                "single eigenvalue lies outside the field",
                minpoly=clusters[0][1].coeffs,
            )
        lead = ExponentialPart.monomial(F, root, -rho, e)
        A = _x_shift_matrix(B, -rho)
        Mtw = DiffModule(F, A).twist(lead.as_series())
        parts, Qs, e2, F2, chain2 = _tl_worker(Mtw, wprec, auto_extend, seed, rho_bound=rho)
        lead2 = lead.map_field(F2).with_e(e2)
        parts = [TLPart(p.phi.add(lead2), p.regular, p.rank) for p in parts]
        gauge = Q.map_field(F2).with_e(e2) * Qs
        return parts, gauge, e2, F2, chain + chain2
    split = split_by_residue(B, rho, wprec, clusters=clusters)
    all_parts = []
    sub_gauges = []
    cur_field = F
    sub_chains = []
    for blkH in split.blocks:
        A = _x_shift_matrix(blkH, -rho)
        Msub = DiffModule(cur_field, A.map_field(cur_field) if cur_field != F else A)
        parts, Qs, e2, F2, chain2 = _tl_worker(Msub, wprec, auto_extend, seed)
        sub_gauges.append((Qs, e2))
        all_parts.append(parts)
        sub_chains.extend(chain2)
        cur_field = F2
    e_final = e
    for _, e2 in sub_gauges:
        e_final = lcm(e_final, e2)
    lifted_parts = []
    diag = None
    for parts, (Qs, _) in zip(all_parts, sub_gauges):
        Qs2 = Qs.map_field(cur_field).with_e(e_final)
        diag = Qs2 if diag is None else diag.block_diag(Qs2)
        for p in parts:
            lifted_parts.append(
                TLPart(
                    p.phi.map_field(cur_field).with_e(e_final),
                    p.regular.map_field(cur_field).with_e(e_final),
                    p.rank,
                )
            )
    gauge = (
        Q.map_field(cur_field).with_e(e_final)
        * split.transition.map_field(cur_field).with_e(e_final)
        * diag
    )
    return lifted_parts, gauge, e_final, cur_field, chain + sub_chains


def cluster_single(field, chi: Poly):
    """The one-cluster case: chi = (T - r)^mu with r in the field, or raise."""
    mu = chi.degree
    # r = -c_{mu-1}/mu (sum of roots over mu), for monic chi
    chi = chi.monic()
    r = field.neg(field.div(chi.coeffs[mu - 1], field.from_fraction(Fraction(mu))))
    shifted = chi.shift_var(r)
    for k in range(mu):
        if k < len(shifted.coeffs) and not field.is_zero(shifted.coeffs[k]):
            raise ExtensionRequiredError(
                "residue eigenvalues are irrational for this field",
                minpoly=chi.coeffs,
            )
    return (r, chi)


def turrittin_levelt(
    M: DiffModule, wprec=None, auto_extend: bool = True, seed: int = 0
) -> TLDecomposition:
    """Full decomposition into exponential twists of regular parts."""
    if wprec is None:
        wprec = M.default_wprec()
    parts, gauge, e, field, chain = _tl_worker(M, Fraction(wprec), auto_extend, seed)
    dec = TLDecomposition(parts, e, field, gauge, chain)
    if dec.total_rank != M.rank:
        raise MeroconnError("part ranks do not sum to the module rank")
    for i in range(len(parts)):
        for j in range(i + 1, len(parts)):
            if parts[i].phi.same_as(parts[j].phi):
                raise MeroconnError("exponential parts are not pairwise distinct")
    if factorial(M.rank) % e != 0:
        raise MeroconnError("ramification does not divide rank factorial")
    for part in parts:
        if not part.regular.is_integral():
            raise MeroconnError("regular part has a pole")
    return dec


# -- decomposition by slopes ---------------------------------------------------------


class SlopePart(NamedTuple):
    slope: Fraction
    module: DiffModule


class SlopeDecomposition(NamedTuple):
    parts: list

    def multiset(self):
        return {p.slope: p.module.rank for p in self.parts}

    @property
    def total_rank(self):
        return sum(p.module.rank for p in self.parts)


def slope_decomposition(M: DiffModule, wprec=None, seed: int = 0) -> SlopeDecomposition:
    """Split off pure-slope summands top-down; needs no field extension."""
    if wprec is None:
        wprec = M.default_wprec()
    parts = []
    work = M
    prev = None
    while True:
        op, _, _ = diff_operator(work, wprec, seed)
        rho = op.katz_rank()
        if prev is not None and rho >= prev:
            raise InconsistentOperatorError("slope did not decrease while splitting")
        prev = rho
        if rho == 0:
            parts.append(SlopePart(Fraction(0), work))
            break
        e = lcm(work.e, rho.denominator)
        B = sheared_delta_matrix(work.field, op, rho, e)
        B0 = B.constant_matrix()
        chi = LA.charpoly(work.field, B0)
        try:
            clusters = cluster_residue(work.field, chi, "slope")
        except SingleClusterError:
            if work.field.is_zero(chi.coeffs[0]):
                raise InconsistentOperatorError(
                    "sheared residue nilpotent at positive growth rank"
                )
            parts.append(SlopePart(rho, DiffModule(work.field, _x_shift_matrix(B, -rho))))
            break
        split = split_by_residue(B, rho, wprec, clusters=clusters)
        pure = DiffModule(work.field, _x_shift_matrix(split.blocks[0], -rho))
        parts.append(SlopePart(rho, pure))
        work = DiffModule(work.field, _x_shift_matrix(split.blocks[1], -rho))
    total = sum(p.module.rank for p in parts)
    if total != M.rank:
        raise MeroconnError("slope part ranks do not sum to the module rank")
    return SlopeDecomposition(parts)


# -- parametric normal form ------------------------------------------------------------


class NormalForm(NamedTuple):
    rho: Fraction
    e: int
    gauge: SeriesMatrix
    integral_matrix: SeriesMatrix
    leading: list
    leading_charpoly: Poly


def _series_as_poly(field, s: RamifiedSeries):
    """Exact Laurent series with v >= 0 as a polynomial in x^(1/e)."""
    if s.prec is not None:
        raise PrecisionError("need exact entries for the basis-denominator chase",
                             available=s.prec)
    deg = 0
    for exp in s.coeffs:
        n = exp * s.e
        if n.denominator != 1 or n < 0:
            raise MeroconnError("entry is not polynomial in the lattice variable")
        deg = max(deg, int(n))
    coeffs = [field.zero] * (deg + 1)
    for exp, c in s.coeffs.items():
        coeffs[int(exp * s.e)] = c
    return Poly(field, coeffs) if any(not field.is_zero(c) for c in coeffs) else Poly(field, [])


def _poly_to_series(field, p: Poly, e: int) -> RamifiedSeries:
    return RamifiedSeries(
        field,
        {Fraction(i, e): c for i, c in enumerate(p.coeffs)},
        e,
    )


def normal_form(M: DiffModule, wprec=None, seed: int = 0, auto_extend: bool = False):
    """Basis in which the connection matrix is x^{-rho} (integral matrix).

    The cyclic-plus-shear basis J does the job away from x = 0 but its
    determinant may vanish at finitely many nonzero points; those zeros are
    chased away by explicit elementary column operations (each divides one
    column by x - c after a kernel-vector column mix).  Needs exact input
    entries.  The nonzero eigenvalues of the leading matrix are the deepest
    exponential coefficients.
    """
    if wprec is None:
        wprec = M.default_wprec()
    op, m, W = diff_operator(M, wprec, seed)
    rho = op.katz_rank()
    F = M.field
    if rho == 0:
        C = companion_matrix(F, op, M.e)
        lead = C.constant_matrix()
        return NormalForm(rho, M.e, W, C, lead, LA.charpoly(F, lead))
    e = lcm(M.e, rho.denominator)
    J = shear_gauge(F, W, rho, e)
    mu = M.rank
    # scale columns to clear poles: J entries become polynomial in z = x^(1/e)
    vmin = J.val_lower_bound() or Fraction(0)
    if vmin < 0:
        shiftmono = RamifiedSeries.monomial(F, F.one, -vmin, e)
        J = J.map_entries(lambda s: s * shiftmono)
    Jp = [[_series_as_poly(F, J.entry(i, j)) for j in range(mu)] for i in range(mu)]
    while True:
        dj = _poly_det(F, Jp)
        if dj.is_zero():
            raise MeroconnError("degenerate basis in normal form")
        # strip the root at z = 0
        coeffs = list(dj.coeffs)
        while coeffs and F.is_zero(coeffs[0]):
            coeffs.pop(0)
        red = Poly(F, coeffs)
        if red.degree == 0:
            break
        roots, cofactor = roots_in_field(red)
        if not roots:
            if cofactor.degree >= 1 and not auto_extend:
                raise ExtensionRequiredError(
                    "basis determinant has roots outside the field",
                    minpoly=cofactor.coeffs,
                )
            if cofactor.degree >= 1:
                F = _extend_field(F, irreducible_factors(cofactor)[0][0].coeffs)[0]
                Jp = [[pp.map_field(F) for pp in row] for row in Jp]
                continue
            break
        c = roots[0][0]
        Jc = [[pp.evaluate(c) for pp in row] for row in Jp]
        lam = LA.kernel_vector(F, Jc)
        if lam is None:
            raise MeroconnError("determinant root without kernel vector")
        i0 = next(i for i, v in enumerate(lam) if not F.is_zero(v))
        # column i0 := J . lambda, then divide by (z - c)
        divisor = Poly(F, [F.neg(c), F.one])
        for r_ in range(mu):
            acc = Poly(F, [])
            for j in range(mu):
                acc = acc + Jp[r_][j] * Poly(F, [lam[j]])
            q, rem = acc.divmod(divisor)
            if not rem.is_zero():
                raise MeroconnError("inexact division in basis-denominator chase")
            Jp[r_][i0] = q
    Js = SeriesMatrix(F, [[_poly_to_series(F, pp, e) for pp in row] for row in Jp], e)
    G = M.matrix.map_field(F) if F != M.field else M.matrix
    A = Js.solve(G.with_e(e) * Js + Js.theta(), wprec)
    v = A.val_lower_bound()
    if v is not None and v < -rho:
        raise InconsistentOperatorError("normal form deeper than the growth rank")
    integral = _x_shift_matrix(A, rho).truncate(wprec + rho)
    if not integral.is_integral():
        raise InconsistentOperatorError("normal form matrix not integral after scaling")
    lead = integral.constant_matrix()
    return NormalForm(rho, e, Js, integral, lead, LA.charpoly(F, lead))


def _poly_det(F, Jp):
    n = len(Jp)
    if n == 1:
        return Jp[0][0]
    acc = Poly(F, [])
    for i in range(n):
        minor = [
            [Jp[r_][c_] for c_ in range(1, n)]
            for r_ in range(n)
            if r_ != i
        ]
        term = Jp[i][0] * _poly_det(F, minor)
        acc = acc + term if i % 2 == 0 else acc - term
    return acc
