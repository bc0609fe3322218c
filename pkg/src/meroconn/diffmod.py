"""Differential modules over scalar((x^(1/e))) for the derivation x d/dx.

A :class:`DiffModule` of rank mu is a free module with a chosen basis
(e_1, ..., e_mu) and a connection described by a matrix G whose column j
holds the coordinates of nabla(e_j).  Vectors are coordinate columns, so

    nabla(v) = theta(v) + G v,        theta = x d/dx entrywise.

Changing basis to f = e . P (columns of P are the new basis vectors)
replaces G by the gauge transform

    H = P^{-1} (G P + theta(P)),

equivalently G P + theta(P) = P H; reconstruction is G = (P H - theta(P)) P^{-1}.

The layer also provides cyclic vectors, the associated monic operator
relation nabla^mu m = sum_j theta_j nabla^j m, the formal slope (growth)
rank, Newton polygons, and the tensor calculus (dual, direct sum, tensor,
internal End).
"""

from __future__ import annotations

import random
from fractions import Fraction
from math import ceil, lcm

from .errors import (
    InconsistentOperatorError,
    MeroconnError,
    PrecisionError,
)
from .series import RamifiedSeries, SeriesMatrix, pmin


class DiffModule:
    """Connection matrix together with its scalar field and lattice."""

    __slots__ = ("field", "matrix", "e", "var")

    def __init__(self, field, matrix: SeriesMatrix, var: str = "x"):
        if matrix.nrows != matrix.ncols:
            raise MeroconnError("connection matrix must be square")
        self.field = field
        self.matrix = matrix
        self.e = matrix.e
        self.var = var

    @property
    def rank(self) -> int:
        return self.matrix.nrows

    def __repr__(self):
        return f"DiffModule(rank={self.rank}, e={self.e})"

    # -- basic calculus ------------------------------------------------------

    def nabla(self, vec):
        """Apply the connection to a coordinate vector of series."""
        G = self.matrix
        out = []
        for i in range(self.rank):
            acc = vec[i].apply_theta()
            for j in range(self.rank):
                acc = acc + G.entry(i, j) * vec[j]
            out.append(acc)
        return out

    def pole_order_bound(self) -> Fraction:
        """max(0, -v(G)); bounds the formal slopes from above."""
        v = self.matrix.val_lower_bound()
        if v is None:
            return Fraction(0)
        return max(Fraction(0), -v)

    def default_wprec(self) -> Fraction:
        """Working x-adic precision for this module's computations."""
        mu = self.rank
        q = ceil(self.pole_order_bound())
        return Fraction(mu * q + mu + 8)

    # -- structure -----------------------------------------------------------

    def truncate(self, prec):
        return DiffModule(self.field, self.matrix.truncate(prec), self.var)

    def ramify(self, m: int):
        """Refine the exponent lattice; the derivation x d/dx is unchanged."""
        return DiffModule(self.field, self.matrix.ramify(m), self.var)

    def map_field(self, target):
        return DiffModule(target, self.matrix.map_field(target), self.var)

    def gauge(self, P: SeriesMatrix, wprec=None):
        """Basis change by P (new basis = old . P)."""
        if wprec is None:
            wprec = self.default_wprec()
        rhs = self.matrix * P + P.theta()
        return DiffModule(self.field, P.solve(rhs, wprec), self.var)

    def gauge_diagonal(self, diag):
        """Exact gauge by diag(s_1, ..., s_mu) of monomial series."""
        n = self.rank
        for s in diag:
            if len(s.coeffs) != 1:
                raise MeroconnError("diagonal gauge entries must be monomials")
        inv = [s.invert() for s in diag]
        rows = []
        for i in range(n):
            row = []
            for j in range(n):
                entry = inv[i] * self.matrix.entry(i, j) * diag[j]
                if i == j:
                    entry = entry + inv[i] * diag[i].apply_theta()
                row.append(entry)
            rows.append(row)
        return DiffModule(self.field, SeriesMatrix(self.field, rows, self.matrix.e), self.var)

    def twist(self, phi: RamifiedSeries):
        """Remove the exponential part phi: G - phi * identity."""
        n = self.rank
        e = lcm(self.e, phi.e)
        rows = []
        for i in range(n):
            row = []
            for j in range(n):
                entry = self.matrix.entry(i, j)
                if i == j:
                    entry = entry - phi
                row.append(entry)
            rows.append(row)
        return DiffModule(self.field, SeriesMatrix(self.field, rows, e), self.var)


def module_from_scalar_rows(field, rows, e=1, var="x"):
    """Connection matrix with constant entries."""
    return DiffModule(field, SeriesMatrix.from_scalars(field, rows, e), var)


# -- tensor calculus ----------------------------------------------------------


def dual(M: DiffModule) -> DiffModule:
    G = M.matrix.transpose()
    return DiffModule(M.field, -G, M.var)


def direct_sum(M: DiffModule, N: DiffModule) -> DiffModule:
    if M.field != N.field:
        raise MeroconnError("modules over different scalar fields")
    return DiffModule(M.field, M.matrix.block_diag(N.matrix), M.var)


def tensor(M: DiffModule, N: DiffModule) -> DiffModule:
    if M.field != N.field:
        raise MeroconnError("modules over different scalar fields")
    e = lcm(M.e, N.e)
    In = SeriesMatrix.identity(M.field, M.rank, e)
    Im = SeriesMatrix.identity(M.field, N.rank, e)
    G = M.matrix.with_e(e).kron(Im) + In.kron(N.matrix.with_e(e))
    return DiffModule(M.field, G, M.var)


def end_module(M: DiffModule) -> DiffModule:
    """Internal Hom(M, M) = dual(M) tensor M."""
    return tensor(dual(M), M)


# -- cyclic vectors and operators ----------------------------------------------


def _candidate_vectors(M: DiffModule, seed: int, max_tries: int):
    n = M.rank
    F = M.field
    e = M.e

    def basis_vec(entries):
        return [
            RamifiedSeries(F, {Fraction(k): F.from_fraction(Fraction(c)) for k, c in ent.items()}, e)
            for ent in entries
        ]

    for i in range(n):
        yield basis_vec([{0: 1} if j == i else {} for j in range(n)])
    for k in range(2, n + 1):
        yield basis_vec([{0: 1} if j < k else {} for j in range(n)])
    yield basis_vec([{j: 1} for j in range(n)])
    rng = random.Random(seed)
    for _ in range(max_tries):
        yield basis_vec(
            [{0: rng.randrange(-3, 4), 1: rng.randrange(-2, 3)} for _ in range(n)]
        )


def cyclic_vector(M: DiffModule, wprec=None, seed: int = 0, max_tries: int = 40):
    """Find m with m, nabla m, ..., nabla^(mu-1) m a basis.

    Returns (m, W) where column k of W is nabla^k m.  Deterministic
    candidates are tried before seeded random ones, so reruns agree.
    """
    if wprec is None:
        wprec = M.default_wprec()
    n = M.rank
    for cand in _candidate_vectors(M, seed, max_tries):
        cols = [cand]
        for _ in range(n - 1):
            cols.append(M.nabla(cols[-1]))
        W = SeriesMatrix(M.field, [[cols[k][i] for k in range(n)] for i in range(n)], M.e)
        try:
            d = W.truncate(wprec).det(wprec)
        except PrecisionError:
            continue
        if d.coeffs:
            return cand, W
    raise PrecisionError(
        "no cyclic vector certified at working precision", available=wprec
    )


class DiffOperator:
    """Monic relation nabla^mu m = sum_{j<mu} theta_j nabla^j m."""

    __slots__ = ("field", "e", "mu", "coeffs")

    def __init__(self, field, coeffs, e=1):
        self.field = field
        self.coeffs = tuple(coeffs)
        self.mu = len(self.coeffs)
        self.e = e

    def __repr__(self):
        return f"DiffOperator(mu={self.mu})"

    def coeff_valuations(self):
        """[(j, v(theta_j))] for the coefficients with certified valuation.

        Exact zeros are dropped; an invisible coefficient (truncated away
        with nonnegative bound) cannot affect slopes and is dropped too.
        """
        pts = []
        for j, th in enumerate(self.coeffs):
            if th.coeffs:
                pts.append((j, min(th.coeffs)))
                continue
            if th.prec is None:
                continue
            if th.prec >= 0:
                continue
            raise PrecisionError(
                f"operator coefficient {j} not certified", available=th.prec
            )
        return pts

    def katz_rank(self) -> Fraction:
        rho = Fraction(0)
        for j, v in self.coeff_valuations():
            if v < 0:
                rho = max(rho, Fraction(-v, self.mu - j))
        return rho


def diff_operator(M: DiffModule, wprec=None, seed: int = 0):
    """Operator attached to a cyclic vector of M."""
    if wprec is None:
        wprec = M.default_wprec()
    m, W = cyclic_vector(M, wprec, seed)
    top = m
    for _ in range(M.rank):
        top = M.nabla(top)
    rhs = SeriesMatrix(M.field, [[top[i]] for i in range(M.rank)], M.e)
    theta = W.solve(rhs, wprec)
    return DiffOperator(M.field, [theta.entry(i, 0) for i in range(M.rank)], M.e), m, W


# -- Newton polygons --------------------------------------------------------------


class NewtonPolygon:
    """Boundary of the slope polygon: vertices left to right, slopes >= 0.

    The polygon is the convex region above the vertex chain and to the
    left of x1 = mu; the chain starts flat at height -irregularity and
    ends at (mu, 0).
    """

    __slots__ = ("vertices", "mu")

    def __init__(self, vertices, mu):
        self.vertices = tuple((Fraction(a), Fraction(b)) for a, b in vertices)
        self.mu = mu

    @classmethod
    def from_points(cls, points, mu: int):
        """Lower hull of {(j, v_j)} and (mu, 0), closed leftward by a flat edge."""
        best = {}
        for x, y in points:
            x = Fraction(x)
            y = Fraction(y)
            if x not in best or y < best[x]:
                best[x] = y
        best.setdefault(Fraction(mu), Fraction(0))
        if best[Fraction(mu)] > 0:
            best[Fraction(mu)] = Fraction(0)
        pts = sorted(best.items())
        hull = []
        for p in pts:
            while len(hull) >= 2:
                (x1, y1), (x2, y2) = hull[-2], hull[-1]
                if (x2 - x1) * (p[1] - y1) <= (p[0] - x1) * (y2 - y1):
                    hull.pop()
                else:
                    break
            hull.append(p)
        ymin = min(y for _, y in hull)
        i0 = max(i for i, (_, y) in enumerate(hull) if y == ymin)
        chain = hull[i0:]
        if chain[0][0] > 0:
            chain.insert(0, (Fraction(0), ymin))
        return cls(chain, mu)

    @classmethod
    def from_slopes(cls, slopes, mu: int):
        """Polygon with the given slope -> horizontal-multiplicity multiset."""
        items = sorted((Fraction(s), Fraction(m)) for s, m in slopes.items() if m)
        if sum(m for _, m in items) != mu:
            raise MeroconnError("slope multiplicities must sum to the rank")
        x = Fraction(0)
        y = -sum(s * m for s, m in items)
        verts = [(x, y)]
        for s, m in items:
            x, y = x + m, y + s * m
            verts.append((x, y))
        return cls(verts, mu)

    @property
    def irregularity(self) -> Fraction:
        return -self.vertices[0][1]

    def slopes(self):
        """Ordered dict slope -> horizontal multiplicity."""
        out = {}
        for (x1, y1), (x2, y2) in zip(self.vertices, self.vertices[1:]):
            s = Fraction(y2 - y1, x2 - x1)
            if s < 0:
                raise InconsistentOperatorError(
                    "negative slope in Newton polygon; operator data inconsistent"
                )
            out[s] = out.get(s, Fraction(0)) + (x2 - x1)
        if not out:
            out[Fraction(0)] = Fraction(0)
        return out

    def height(self, x):
        """Height of the boundary chain at abscissa x (chain endpoints clamp)."""
        x = Fraction(x)
        vs = self.vertices
        if x <= vs[0][0]:
            return vs[0][1]
        for (x1, y1), (x2, y2) in zip(vs, vs[1:]):
            if x1 <= x <= x2:
                return y1 + (y2 - y1) * (x - x1) / (x2 - x1)
        return vs[-1][1]

    def __eq__(self, other):
        return isinstance(other, NewtonPolygon) and self.vertices == other.vertices

    def __hash__(self):
        return hash(self.vertices)

    def includes(self, other: "NewtonPolygon") -> bool:
        """Region containment: self's region contains other's region."""
        xs = {x for x, _ in self.vertices} | {x for x, _ in other.vertices}
        return all(other.height(x) >= self.height(x) for x in xs)

    def is_integral(self) -> bool:
        return all(x.denominator == 1 and y.denominator == 1 for x, y in self.vertices)

    def max_slope(self) -> Fraction:
        return max(self.slopes())

    def __repr__(self):
        pts = ", ".join(f"({x},{y})" for x, y in self.vertices)
        return f"NewtonPolygon[{pts}]"


def newton_polygon_of_operator(op: DiffOperator) -> NewtonPolygon:
    return NewtonPolygon.from_points(op.coeff_valuations(), op.mu)


def newton_polygon(M: DiffModule, wprec=None, seed: int = 0) -> NewtonPolygon:
    op, _, _ = diff_operator(M, wprec, seed)
    return newton_polygon_of_operator(op)


def katz_rank(M: DiffModule, wprec=None, seed: int = 0) -> Fraction:
    op, _, _ = diff_operator(M, wprec, seed)
    return op.katz_rank()


def irregularity(M: DiffModule, wprec=None, seed: int = 0) -> Fraction:
    return newton_polygon(M, wprec, seed).irregularity


# -- growth of the iterated connection ---------------------------------------------


def spectral_growth_check(
    M: DiffModule, sigma=None, terms: int | None = None, wprec=None, seed: int = 0
):
    """Do the iterated-connection matrices grow no faster than slope sigma?

    G_1 = G and G_{n+1} = theta(G_n) + G G_n; slope sigma passes when every
    v(G_n) >= -sigma (n + mu - 1).  The formal slope is the least sigma that
    passes, so the check holds at sigma = katz_rank and fails just below it.
    sigma defaults to the computed katz rank.  Returns (ok, sigma, rows) with
    one row (n, v(G_n), bound) per checked n.
    """
    if wprec is None:
        wprec = M.default_wprec()
    if sigma is None:
        op, _, _ = diff_operator(M, wprec, seed)
        sigma = op.katz_rank()
    sigma = Fraction(sigma)
    mu = M.rank
    if terms is None:
        terms = 2 * mu + 3
    rows = []
    ok = True
    G = M.matrix.truncate(wprec)
    Gn = G
    for n in range(1, terms + 1):
        v = Gn.val_lower_bound()
        bound = -sigma * (n + mu - 1)
        if v is None:
            rows.append((n, None, bound))
        else:
            rows.append((n, v, bound))
            if v < bound:
                ok = False
        if n < terms:
            Gn = Gn.theta() + G * Gn
    return ok, sigma, rows
