"""Point blow-ups: parameter families, exceptional trees, intersection data.

Blowing up a point of the total space of a one-parameter family trades
the parameter for an arc direction: t = t0 + x*u turns a family over
the t-line into one over the u-line whose members live on the arcs of
contact order one through (0, t0).  Iterating steepens the contact and
drives any turning point to a stable one within a bounded number of
steps.  Blow-up sequences over a single base point are also tracked as
configurations of exceptional components, with exact chart maps, so the
inverse intersection matrix can be checked against honest intersection
multiplicities of pushed-down germs.
"""

from fractions import Fraction
from math import ceil
from typing import NamedTuple

from .bivariate import BiSeries, _ff_power
from .diffmod import DiffModule, irregularity
from .errors import MeroconnError, TheoremViolationError, UserInputError
from .fields import QQ, FunctionField
from .geometry import CurveGerm
from . import linalg as LA
from .parametric import ParametricModule, check_point, generic_polygon, specialize
from .polynomials import Poly
from .series import RamifiedSeries, SeriesMatrix


def _laurent_expansion(F, value, center, order):
    """Series of value(center + tau); exact when the shifted denominator is a monomial."""
    base = F.base
    shift = base.from_fraction(center)
    num = Poly(base, list(value.num)).shift_var(shift)
    den = Poly(base, list(value.den)).shift_var(shift)
    num_s = RamifiedSeries(base, {Fraction(i): c for i, c in enumerate(num.coeffs)})
    den_s = RamifiedSeries(base, {Fraction(i): c for i, c in enumerate(den.coeffs)})
    if len(den_s.coeffs) == 1:
        return num_s * den_s.invert()
    return num_s * den_s.invert(Fraction(order) + 2 * den_s.valuation() + 2)


def _fresh_name(taken, candidates):
    for name in candidates:
        if name not in taken:
            return name
    raise MeroconnError("no fresh variable name available")


class FamilyBlowup(NamedTuple):
    chart1: ParametricModule  # coordinates (x, u), t = center + x*u; E = {x = 0}
    chart2: ParametricModule  # coordinates (w, t), x = t*w;          E = {w = 0}
    center: Fraction


def family_blowup(pm: ParametricModule, center=0, expansion_prec=None) -> FamilyBlowup:
    """Blow up the point (x = 0, t = center) of the total space of a family.

    Chart 1 carries the new family: substituting t = center + x*u gives
    entries rational in u, the exceptional component is {x = 0}, and
    u = 0 marks the strict transform of the old fiber through the
    center.  Chart 2 substitutes x = t*w and keeps the old parameter.
    Coefficients hidden behind a truncation are assumed regular at the
    center, so precision bounds carry over unchanged.
    """
    center = Fraction(center)
    M = pm.module
    if M.e != 1:
        raise UserInputError("family blow-ups need unramified entries")
    if expansion_prec is None:
        q = max(0, -min(s.val_lower_bound() or 0 for row in M.matrix.rows for s in row))
        expansion_prec = 2 * (M.rank * (ceil(q) + 1) + 8)

    Ft = M.field
    Fu = FunctionField(QQ, _fresh_name({M.var}, ("u", "v", "u1")))

    def pull(series):
        out = RamifiedSeries.zero(Fu, 1, series.prec)
        for exp, c in series.coeffs.items():
            ex = _laurent_expansion(Ft, c, center, expansion_prec)
            coeffs = {}
            for i, a in ex.coeffs.items():
                coeffs[exp + i] = Fu.mul(Fu.from_fraction(a), _ff_power(Fu, Fu.gen, int(i)))
            prec = None if ex.prec is None else exp + ex.prec
            out = out + RamifiedSeries(Fu, coeffs, 1, prec)
        return out

    rows1 = [[pull(s) for s in row] for row in M.matrix.rows]
    chart1 = ParametricModule(DiffModule(Fu, SeriesMatrix(Fu, rows1, 1), M.var))

    def push(series):
        coeffs = {
            exp: Ft.mul(c, _ff_power(Ft, Ft.gen, int(exp)))
            for exp, c in series.coeffs.items()
        }
        return RamifiedSeries(Ft, coeffs, 1, series.prec)

    wvar = _fresh_name({pm.param, M.var}, ("w", "s", "w1"))
    rows2 = [[push(s) for s in row] for row in M.matrix.rows]
    chart2 = ParametricModule(DiffModule(Ft, SeriesMatrix(Ft, rows2, 1), wvar))
    return FamilyBlowup(chart1, chart2, center)


class StabilizationCertificate(NamedTuple):
    steps: int
    bound: int
    center: Fraction
    substitutions: tuple  # the arc family swept at each step
    reports: tuple  # point report for the input, then one per step
    family: ParametricModule  # chart-1 family at the last step

    @property
    def stable(self) -> bool:
        return self.reports[-1].verdict == "stable"

    def to_str(self) -> str:
        word = "stable" if self.stable else "unstable"
        return f"{word} after {self.steps} blow-ups (bound {self.bound})"


def stabilize_by_blowup(
    pm: ParametricModule, point, wprec=None, seed: int = 0, expansion_prec=None
) -> StabilizationCertificate:
    """Blow up a turning point until the tracked transversal point is stable.

    Tracks the strict transform of the fiber through the point: after k
    steps the family sweeps the arcs t = point + x^k * u and the tracked
    point is u = 0.  Stops at the first stable step.  The step count is
    certified against the bound rho + 1; exceeding it raises, since the
    bound is a theorem about this iteration, not a heuristic.
    """
    point = Fraction(point)
    first = check_point(pm, point, wprec=wprec, seed=seed)
    reports = [first]
    if first.verdict == "stable":
        return StabilizationCertificate(0, 0, point, (), tuple(reports), pm)

    rho = generic_polygon(pm, wprec, seed).max_slope()
    bound = int(rho + 1)  # steps are whole, so the floor carries the bound
    fam = pm
    center = point
    subs = []
    for k in range(1, bound + 1):
        fam = family_blowup(fam, center, expansion_prec).chart1
        center = Fraction(0)
        subs.append(f"{pm.param} = {point} + {pm.module.var}^{k}*{fam.param}")
        report = check_point(fam, 0, wprec=wprec, seed=seed)
        reports.append(report)
        if report.verdict == "stable":
            return StabilizationCertificate(
                k, bound, point, tuple(subs), tuple(reports), fam
            )
    raise TheoremViolationError(
        "turning point failed to stabilize within rho + 1 blow-ups",
        details={"point": str(point), "bound": bound},
    )


def stable_transversal_point(pm: ParametricModule, wprec=None, seed=0, bound=12):
    """A parameter value certified stable, found by sampling small integers."""
    for k in range(1, bound + 1):
        pt = Fraction(k)
        if QQ.is_zero(pm.locus.evaluate(QQ.from_fraction(pt))):
            continue
        if check_point(pm, pt, wprec=wprec, seed=seed).verdict == "stable":
            return pt
    raise MeroconnError("no certified stable transversal point within the sampling bound")


def component_irregularity(pm: ParametricModule, wprec=None, seed=0, bound=12):
    """Irregularity along the fibers of a family, read off at a certified stable point."""
    pt = stable_transversal_point(pm, wprec, seed, bound)
    return irregularity(specialize(pm, pt), wprec, seed)


# -- exceptional trees ---------------------------------------------------------


def _bi_subst(f: BiSeries, g1: BiSeries, g2: BiSeries) -> BiSeries:
    """f(g1, g2) for polynomial data."""
    if f.pole1 or f.pole2 or f.prec is not None:
        raise MeroconnError("chart maps must stay polynomial")
    F = f.field
    cache1 = {0: BiSeries.one(F)}
    cache2 = {0: BiSeries.one(F)}

    def power(g, k, cache):
        if k not in cache:
            cache[k] = power(g, k - 1, cache) * g
        return cache[k]

    out = BiSeries.zero(F)
    for (i, j), c in f.coeffs.items():
        out = out + (power(g1, i, cache1) * power(g2, j, cache2)).scale(c)
    return out


def _eval_second(f: BiSeries, u0: Fraction) -> RamifiedSeries:
    """Restrict a polynomial chart component to the line u = u0."""
    F = f.field
    coeffs = {}
    for (i, j), c in f.coeffs.items():
        val = F.mul(c, F.from_fraction(u0**j))
        cur = coeffs.get(Fraction(i))
        coeffs[Fraction(i)] = val if cur is None else F.add(cur, val)
    return RamifiedSeries(F, coeffs, 1)


def _implicit_polynomial(y1: RamifiedSeries, y2: RamifiedSeries) -> BiSeries:
    """Defining polynomial of the image of a polynomial arc, eliminating the parameter."""
    import sympy

    tau = sympy.Symbol("tau")
    w1, w2 = sympy.symbols("w1 w2")
    p1 = sum((sympy.Rational(c) * tau ** int(i) for i, c in y1.coeffs.items()), sympy.Integer(0))
    p2 = sum((sympy.Rational(c) * tau ** int(i) for i, c in y2.coeffs.items()), sympy.Integer(0))
    res = sympy.expand(sympy.resultant(w1 - p1, w2 - p2, tau))
    if res == 0:
        raise MeroconnError("arc does not define a curve")
    poly = sympy.Poly(res, w1, w2)
    coeffs = {}
    for (i, j), c in zip(poly.monoms(), poly.coeffs()):
        c = sympy.Rational(c)
        coeffs[(int(i), int(j))] = QQ.from_fraction(Fraction(int(c.p), int(c.q)))
    return BiSeries(QQ, coeffs)


class DualTree(NamedTuple):
    selfints: tuple  # E_v . E_v in creation order
    edges: tuple  # sorted vertex pairs
    matrix: tuple  # A rows; A_vv = -E_v^2, A_vw = -1 on edges
    inverse: tuple  # A^(-1) rows, exact

    @property
    def vertices(self) -> tuple:
        return tuple(range(len(self.selfints)))


class BlowupSurface:
    """A chain of point blow-ups over the origin, with exact chart maps.

    Components are numbered in creation order.  Each carries a chart
    (x, u) -> (y1, y2) in which it is {x = 0} and which covers all but
    one of its points; each surviving crossing carries a chart whose
    two axes are the crossing components.  Marked values of u (existing
    crossings, strict transforms of the axes) are never offered as
    fresh centers.
    """

    def __init__(self):
        x = BiSeries.term(QQ, QQ.one, 1, 0)
        xu = BiSeries.term(QQ, QQ.one, 1, 1)
        self.selfint = [-1]
        self.charts = [(x, xu)]
        # u = 0 on the first component carries the strict transform of {y2 = 0}
        self.used = [{Fraction(0)}]
        self.crossings = {}  # (v, w) -> chart pair with E_v = {c = 0}, E_w = {d = 0}

    @property
    def size(self) -> int:
        return len(self.selfint)

    def fresh_values(self, v: int, count: int) -> list:
        out, k = [], 1
        while len(out) < count:
            if Fraction(k) not in self.used[v]:
                out.append(Fraction(k))
            k += 1
        return out

    def blow_up_on(self, v: int, u0=None) -> int:
        """Blow up a fresh point u = u0 of E_v; returns the new component index."""
        if u0 is None:
            u0 = self.fresh_values(v, 1)[0]
        u0 = Fraction(u0)
        if u0 in self.used[v]:
            raise UserInputError("chosen center is already a marked point")
        f1, f2 = self.charts[v]
        x = BiSeries.term(QQ, QQ.one, 1, 0)
        arc = BiSeries(QQ, {(0, 0): QQ.from_fraction(u0), (1, 1): QQ.one})
        shifted = BiSeries(QQ, {(0, 0): QQ.from_fraction(u0), (0, 1): QQ.one})
        cd = BiSeries.term(QQ, QQ.one, 1, 1)
        n = self.size
        self.charts.append((_bi_subst(f1, x, arc), _bi_subst(f2, x, arc)))
        self.crossings[(v, n)] = (_bi_subst(f1, cd, shifted), _bi_subst(f2, cd, shifted))
        self.selfint[v] -= 1
        self.selfint.append(-1)
        self.used[v].add(u0)
        self.used.append(set())
        return n

    def blow_up_cross(self, v: int, w: int) -> int:
        """Blow up the crossing point of E_v and E_w; returns the new index."""
        if (v, w) in self.crossings:
            a, b = v, w
        elif (w, v) in self.crossings:
            a, b = w, v
        else:
            raise UserInputError("components do not cross")
        g1, g2 = self.crossings.pop((a, b))
        c = BiSeries.term(QQ, QQ.one, 1, 0)
        d = BiSeries.term(QQ, QQ.one, 0, 1)
        cd = BiSeries.term(QQ, QQ.one, 1, 1)
        n = self.size
        self.charts.append((_bi_subst(g1, c, cd), _bi_subst(g2, c, cd)))
        self.crossings[(n, b)] = (_bi_subst(g1, c, cd), _bi_subst(g2, c, cd))
        self.crossings[(a, n)] = (_bi_subst(g1, cd, d), _bi_subst(g2, cd, d))
        self.selfint[a] -= 1
        self.selfint[b] -= 1
        self.selfint.append(-1)
        # in the new chart, u = 0 is the crossing with the strict E_b
        self.used.append({Fraction(0)})
        return n

    def transversal_germ(self, v: int, u0=None) -> CurveGerm:
        """Push a germ transversal to E_v at u = u0 down to the base."""
        if u0 is None:
            u0 = self.fresh_values(v, 1)[0]
        u0 = Fraction(u0)
        if u0 in self.used[v]:
            raise UserInputError("transversal germs must avoid marked points")
        f1, f2 = self.charts[v]
        y1 = _eval_second(f1, u0)
        y2 = _eval_second(f2, u0)
        return CurveGerm(y1, y2, poly=_implicit_polynomial(y1, y2))

    def tree(self) -> DualTree:
        n = self.size
        A = [[QQ.zero for _ in range(n)] for _ in range(n)]
        for v, s in enumerate(self.selfint):
            A[v][v] = QQ.from_int(-s)
        edges = []
        for v, w in self.crossings:
            A[v][w] = A[w][v] = QQ.from_int(-1)
            edges.append((min(v, w), max(v, w)))
        inv = LA.inv(QQ, A)
        for k in range(1, n + 1):
            minor = LA.det(QQ, [row[:k] for row in A[:k]])
            if minor <= 0:
                raise TheoremViolationError(
                    "intersection matrix is not positive definite",
                    details={"order": k},
                )
        if any(entry <= 0 for row in inv for entry in row):
            raise TheoremViolationError(
                "inverse intersection matrix has a non-positive entry",
                details={},
            )
        return DualTree(
            tuple(self.selfint),
            tuple(sorted(edges)),
            tuple(tuple(row) for row in A),
            tuple(tuple(row) for row in inv),
        )


def surface_from_moves(moves) -> BlowupSurface:
    """Replay a move sequence; the first blow-up at the base point is implicit."""
    S = BlowupSurface()
    for move in moves:
        if move[0] == "on":
            S.blow_up_on(*move[1:])
        elif move[0] == "cross":
            S.blow_up_cross(*move[1:])
        else:
            raise UserInputError(f"unknown blow-up move {move[0]!r}")
    return S


def dual_tree_matrix(moves) -> DualTree:
    """Intersection data of the exceptional tree cut out by a move sequence.

    Moves are ("on", v) for a fresh point of component v, optionally
    ("on", v, u0) to pin the center, or ("cross", v, w) for the crossing
    point of two components.  Components are numbered in creation
    order, starting from the one over the base point.
    """
    return surface_from_moves(moves).tree()


def enumerate_blowup_sequences(max_blowups: int) -> list:
    """All move sequences reachable with at most the given number of blow-ups."""
    out = []

    def walk(prefix, ncomp, edges):
        out.append(tuple(prefix))
        if len(prefix) + 1 >= max_blowups:
            return
        for v in range(ncomp):
            walk(prefix + [("on", v)], ncomp + 1, edges | {(v, ncomp)})
        for a, b in sorted(edges):
            walk(
                prefix + [("cross", a, b)],
                ncomp + 1,
                (edges - {(a, b)}) | {(a, ncomp), (ncomp, b)},
            )

    walk([], 1, frozenset())
    return out
