"""Growth of derivation-saturated lattices, an independent slope oracle.

Starting from a lattice spanned by power-series columns, repeatedly
adjoining x^{m+1} d/dx of the generators grows the lattice; the eventual
growth rate per step recovers the weighted slope sum above m without
ever choosing a cyclic vector.  Legendre duality ties these rates to
the Newton polygon boundary, giving a two-sided cross-check.
"""

from fractions import Fraction
from math import ceil
from typing import NamedTuple, Optional

from .diffmod import DiffModule, NewtonPolygon, newton_polygon
from .errors import MeroconnError, PrecisionError, UserInputError
from .parametric import ParametricModule, generic_polygon, specialize
from .series import RamifiedSeries, SeriesMatrix


class Lattice:
    """Full submodule of Laurent-series space spanned by columns over K[[x]]."""

    def __init__(self, field, columns):
        if not columns:
            raise UserInputError("a lattice needs at least one generating column")
        self.field = field
        self.mu = len(columns[0])
        for col in columns:
            if len(col) != self.mu:
                raise UserInputError("lattice columns must share one length")
        self.columns = [list(col) for col in columns]
        for col in self.columns:
            for s in col:
                lb = s.val_lower_bound()
                if lb is not None and lb < 0:
                    raise UserInputError("lattice generators must not have poles")

    @classmethod
    def standard(cls, field, mu: int):
        one = RamifiedSeries.one(field)
        zero = RamifiedSeries.zero(field)
        return cls(field, [[one if i == j else zero for i in range(mu)] for j in range(mu)])

    @classmethod
    def from_matrix(cls, mat: SeriesMatrix):
        n = len(mat.rows)
        m = len(mat.rows[0]) if n else 0
        cols = [[mat.rows[i][j] for i in range(n)] for j in range(m)]
        return cls(mat.field, cols)

    def echelon(self):
        """Pivot basis and pivot valuations; their sum is the det valuation."""
        return _column_echelon(self.field, self.columns, self.mu)


def _content_cap(columns):
    exps = [e for col in columns for s in col for e in s.coeffs]
    if not exps:
        return Fraction(8)
    return max(exps) + (max(exps) - min(exps)) + 8


def _column_echelon(field, columns, mu, prec_cap=None):
    """x-adic column reduction to mu pivot columns.

    Picks the globally smallest visible valuation as the next pivot, so
    every other entry in the pivot row divides by it integrally; later
    columns are cleared at earlier pivot rows, which makes the pivot
    valuations sum to the det valuation exactly.
    """
    if prec_cap is None:
        prec_cap = _content_cap(columns)
    work = [list(col) for col in columns]
    basis = []
    vals = []
    free_rows = set(range(mu))
    while len(basis) < mu:
        best = None
        for ci, col in enumerate(work):
            for ri in free_rows:
                s = col[ri]
                if not s.coeffs:
                    continue
                v = min(s.coeffs)
                if best is None or v < best[0]:
                    best = (v, ci, ri)
        if best is None:
            for col in work:
                for ri in free_rows:
                    s = col[ri]
                    if not s.coeffs and s.prec is not None:
                        raise PrecisionError(
                            "lattice reduction cannot certify a pivot "
                            f"below O(x^{s.prec})",
                            available=s.prec,
                        )
            raise MeroconnError("lattice columns do not have full rank")
        v, ci, ri = best
        pivot = work.pop(ci)
        pp = pivot[ri]
        if pp.prec is None and len(pp.coeffs) == 1:
            pinv = pp.invert()
        else:
            pinv = pp.invert(prec_cap + 2 * max(Fraction(0), -v) + 2)
        survivors = []
        for col in work:
            if col[ri].coeffs:
                q = col[ri] * pinv
                col = [a - q * b for a, b in zip(col, pivot)]
            if any(s.coeffs for s in col):
                survivors.append(col)
            elif any(s.prec is not None for s in col):
                survivors.append(col)  # zero only up to precision; keep for later checks
        work = survivors
        basis.append(pivot)
        vals.append(v)
        free_rows.discard(ri)
    return basis, vals


def _require_plain_lattice_input(M: DiffModule):
    if M.e != 1:
        raise UserInputError("lattice iteration needs an unramified connection matrix")


def _dimension_iter(M: DiffModule, L: Optional[Lattice], m: int, cap):
    """Yields dim (L_n / L) for n = 0, 1, ..., L_{n+1} = L_n + x^{m+1} (d/dx) L_n.

    With theta = x d/dx as the stored derivation, x^{m+1} (d/dx) of a
    coordinate column is nabla(col) shifted by m.  Since every iterate
    contains the start lattice, truncating columns above x^cap never
    changes the lattice, only the stored tails.
    """
    _require_plain_lattice_input(M)
    if m < 0:
        raise UserInputError("the twist exponent m must not be negative")
    F = M.field
    if L is None:
        L = Lattice.standard(F, M.rank)
    if L.mu != M.rank:
        raise UserInputError("lattice and module ranks differ")
    basis, vals = L.echelon()
    base_val = sum(vals)
    cap = Fraction(cap)
    yield 0
    while True:
        new_cols = []
        for col in basis:
            img = [s.truncate(cap) for s in M.nabla(col)]
            new_cols.append([s.shift(m) for s in img])
        basis, vals = _column_echelon(F, basis + new_cols, M.rank, prec_cap=cap)
        basis = [[s.truncate(cap) for s in col] for col in basis]
        yield int(base_val - sum(vals))


def _dimension_sequence(M: DiffModule, L: Optional[Lattice], m: int, n: int, wprec):
    it = _dimension_iter(M, L, m, wprec)
    return [next(it) for _ in range(n + 1)]


def gl_iterate(M: DiffModule, L: Optional[Lattice], m: int, n: int, wprec=None) -> int:
    """Dimension of the n-th derivation-saturated lattice over the start."""
    if wprec is None:
        wprec = _default_iteration_prec(M, m)
    return _dimension_sequence(M, L, m, n, wprec)[n]


def _default_iteration_prec(M: DiffModule, m: int) -> Fraction:
    q = ceil(M.pole_order_bound())
    return Fraction(q + m + M.rank + 8)


def _stable_increment(dims):
    """Average increment of the stabilized tail, or None.

    The sequence is eventually quasi-arithmetic; a period p counts as
    stable when the last 2p+1 window repeats the same p-step difference.
    """
    N = len(dims) - 1
    for p in range(1, N // 3 + 1):
        c = dims[N] - dims[N - p]
        if all(
            N - p - k >= 0 and dims[N - k] - dims[N - p - k] == c for k in range(1, 2 * p + 1)
        ):
            return Fraction(c, p)
    return None


def lambda_estimate(M: DiffModule, m: int, n_max=None, wprec=None) -> Fraction:
    """Stabilized growth rate of the m-twisted lattice iteration.

    Equals the slope sum over sigma > m of (sigma - m) times the slope
    multiplicity, which the polygon pipeline computes independently.
    """
    q = ceil(M.pole_order_bound())
    if n_max is None:
        n_max = 2 * M.rank * (q + 1) + 10
    if wprec is None:
        wprec = _default_iteration_prec(M, m)
    it = _dimension_iter(M, None, m, wprec)
    dims = [next(it)]
    settle = M.rank + q + 2  # past the transient before trusting a pattern
    recent = []
    for n in range(1, n_max + 1):
        dims.append(next(it))
        lam = _stable_increment(dims)
        recent.append(lam)
        if n >= settle and lam is not None and recent[-3:] == [lam] * 3:
            return lam
    lam = _stable_increment(dims)
    if lam is None:
        raise PrecisionError(
            f"lattice growth did not stabilize within {n_max} steps",
            available=Fraction(n_max),
        )
    return lam


def polygon_lambda(np: NewtonPolygon, m) -> Fraction:
    """The same rate read off a Newton polygon: sum of (sigma-m) mu_sigma."""
    m = Fraction(m)
    return sum(((s - m) * mult for s, mult in np.slopes().items() if s > m), Fraction(0))


# -- piecewise-linear convex duality -------------------------------------------


class PLConvex(NamedTuple):
    """Convex piecewise-linear function: breakpoints, plus an optional ray.

    ``points`` covers a bounded interval starting at x = 0; with
    ``tail_slope`` set the function continues linearly to infinity.
    """

    points: tuple
    tail_slope: Optional[Fraction] = None

    @classmethod
    def build(cls, points, tail_slope=None):
        pts = [(Fraction(x), Fraction(y)) for x, y in points]
        pts.sort()
        if not pts or pts[0][0] != 0:
            raise UserInputError("breakpoints must start at x = 0")
        cleaned = [pts[0]]
        for x, y in pts[1:]:
            if x == cleaned[-1][0]:
                if y != cleaned[-1][1]:
                    raise UserInputError("conflicting values at one breakpoint")
                continue
            cleaned.append((x, y))
        # merge collinear interior points, enforce convexity
        out = []
        for pt in cleaned:
            while len(out) >= 2:
                (x1, y1), (x2, y2) = out[-2], out[-1]
                lhs = (y2 - y1) * (pt[0] - x2)
                rhs = (pt[1] - y2) * (x2 - x1)
                if lhs == rhs:
                    out.pop()
                    continue
                if lhs > rhs:
                    raise UserInputError("breakpoints are not convex")
                break
            out.append(pt)
        if tail_slope is not None:
            tail_slope = Fraction(tail_slope)
            if len(out) >= 2:
                (x1, y1), (x2, y2) = out[-2], out[-1]
                seg = Fraction(y2 - y1, x2 - x1)
                if tail_slope < seg:
                    raise UserInputError("ray slope breaks convexity")
                if tail_slope == seg:
                    out.pop()
        return cls(tuple(out), tail_slope)

    @property
    def domain_end(self):
        return None if self.tail_slope is not None else self.points[-1][0]

    def value(self, x) -> Fraction:
        x = Fraction(x)
        if x < 0:
            raise UserInputError("outside the domain")
        pts = self.points
        for (x1, y1), (x2, y2) in zip(pts, pts[1:]):
            if x1 <= x <= x2:
                return y1 + (y2 - y1) * (x - x1) / (x2 - x1)
        if self.tail_slope is not None and x >= pts[-1][0]:
            return pts[-1][1] + self.tail_slope * (x - pts[-1][0])
        if x == pts[-1][0]:
            return pts[-1][1]
        raise UserInputError("outside the domain")

    def breakpoint_xs(self):
        return [x for x, _ in self.points]


def _upper_envelope(lines):
    """Breakpoints of max over affine (slope, intercept) pieces on [0, inf)."""
    by_slope = {}
    for s, b in lines:
        if s not in by_slope or b > by_slope[s]:
            by_slope[s] = b
    items = sorted(by_slope.items())
    stack = []  # (slope, intercept, start_x)
    for s, b in items:
        while stack:
            s0, b0, x0 = stack[-1]
            cross = Fraction(b0 - b, s - s0)
            if cross <= x0:
                stack.pop()
                continue
            break
        start = Fraction(0)
        if stack:
            s0, b0, _ = stack[-1]
            start = Fraction(b0 - b, s - s0)
        stack.append((s, b, start))
    while len(stack) > 1 and stack[1][2] <= 0:
        stack.pop(0)
    return stack


def legendre(f: PLConvex) -> PLConvex:
    """sup over x of (x*xi - f(x)), exact on breakpoints."""
    if f.tail_slope is not None:
        raise UserInputError("the transform here needs a bounded domain")
    pieces = _upper_envelope([(x, -y) for x, y in f.points])
    pts = []
    for i, (s, b, start) in enumerate(pieces):
        x0 = max(Fraction(0), start)
        pts.append((x0, s * x0 + b))
    tail = pieces[-1][0]
    return PLConvex.build(pts, tail_slope=tail)


def legendre_reconstruct(fstar: PLConvex) -> PLConvex:
    """Inverse transform back onto [0, mu]; exact for convex inputs."""
    if fstar.tail_slope is None:
        raise UserInputError("reconstruction needs the ray slope (the rank)")
    end = fstar.tail_slope
    pieces = _upper_envelope([(x, -y) for x, y in fstar.points])
    pts = []
    for s, b, start in pieces:
        x0 = max(Fraction(0), start)
        if x0 > end:
            continue
        pts.append((x0, s * x0 + b))
    last = pieces[-1]
    for s, b, start in pieces:
        if start <= end:
            last = (s, b, start)
    pts.append((end, last[0] * end + last[1]))
    return PLConvex.build(pts)


def polygon_boundary(np: NewtonPolygon) -> PLConvex:
    """The polygon's boundary chain as a convex function on [0, mu]."""
    return PLConvex.build(np.vertices)


def young_inequality_holds(f: PLConvex, fstar: PLConvex, extra_xis=()) -> bool:
    """x*xi <= f(x) + f*(xi) at all breakpoint pairs (and any extra xi)."""
    xis = list(fstar.breakpoint_xs()) + [Fraction(x) for x in extra_xis]
    for x in f.breakpoint_xs():
        for xi in xis:
            if x * xi > f.value(x) + fstar.value(xi):
                return False
    return True


def np_inclusion_check(pm: ParametricModule, point, field=None, wprec=None, seed: int = 0) -> bool:
    """Specialized polygon sits inside the generic one (region inclusion).

    Also compares boundary heights at the integer abscissas, the
    slope-by-slope consequence of the inclusion.
    """
    np_gen = generic_polygon(pm, wprec, seed)
    np_sp = newton_polygon(specialize(pm, point, field), wprec, seed)
    if not np_gen.includes(np_sp):
        return False
    return all(np_sp.height(k) >= np_gen.height(k) for k in range(pm.rank + 1))
