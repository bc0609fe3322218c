"""Curve germs on the two-variable polar divisor and the comparison
inequalities between invariants along curves and along the axes.

A germ is given by a primitive parametrization; restricting a connection
to it produces an ordinary one-variable module whose rank and
irregularity are then bounded by axis data weighted with intersection
multiplicities.
"""

from fractions import Fraction
from math import gcd
from typing import NamedTuple, Optional

from .bivariate import BiConnection, BiSeries, axis_module
from .diffmod import DiffModule, irregularity, katz_rank, newton_polygon
from .errors import (
    CommonBranchError,
    MeroconnError,
    UndecidableHereError,
    UserInputError,
)
from .errors import PrecisionError
from .fields import QQ, FunctionField
from .series import RamifiedSeries, SeriesMatrix


class CurveGerm:
    """Parametrized arc s -> (y1(s), y2(s)) meeting the divisor y1 y2 = 0.

    The parametrization must be primitive (not a reparametrized power);
    an identically zero coordinate describes an axis branch and then a
    defining polynomial should come along for multiplicity work.
    """

    __slots__ = ("y1", "y2", "poly")

    def __init__(self, y1: RamifiedSeries, y2: RamifiedSeries, poly: Optional[BiSeries] = None):
        for y, name in ((y1, "y1"), (y2, "y2")):
            if y.e != 1:
                raise UserInputError(f"{name}(s) must use integer exponents")
            if y.coeffs and min(y.coeffs) < 0:
                raise UserInputError(f"{name}(s) must not have a pole at s = 0")
        if y1.is_exact_zero() and y2.is_exact_zero():
            raise UserInputError("the zero parametrization is not a curve")
        exps = [int(e) for y in (y1, y2) for e in y.coeffs if e]
        if exps:
            g = 0
            for e in exps:
                g = gcd(g, e)
            if g > 1:
                raise UserInputError(
                    f"parametrization is a reparametrized power (gcd {g}); divide the exponents"
                )
        v1 = None if y1.is_exact_zero() else y1.valuation()
        v2 = None if y2.is_exact_zero() else y2.valuation()
        if v1 == 0 and v2 == 0:
            raise UserInputError("the germ must meet the divisor y1 y2 = 0")
        if poly is not None:
            if poly.prec is not None or poly.pole1 or poly.pole2:
                raise UserInputError("a defining polynomial must be exact and pole-free")
            if poly.is_visibly_zero():
                raise UserInputError("the zero polynomial defines no curve")
            composed = poly.restrict(y1, y2)
            if composed.coeffs:
                raise UserInputError("the polynomial does not vanish on the parametrization")
        self.y1 = y1
        self.y2 = y2
        self.poly = poly

    def base_point(self):
        c1 = QQ.zero if self.y1.is_exact_zero() else self.y1.coeff(0)
        c2 = QQ.zero if self.y2.is_exact_zero() else self.y2.coeff(0)
        return (c1, c2)

    def through_origin(self) -> bool:
        F = self.y1.field
        c1, c2 = self.base_point()
        return F.is_zero(c1) and F.is_zero(c2)


def _s_mono(field, c, exp):
    return RamifiedSeries.monomial(field, c, Fraction(exp))


def axis_germ(axis: int, field=QQ) -> CurveGerm:
    """The branch y1 = 0 (axis 1) or y2 = 0 (axis 2), with its polynomial."""
    if axis not in (1, 2):
        raise UserInputError("axis must be 1 or 2")
    s = _s_mono(field, field.one, 1)
    z = RamifiedSeries.zero(field)
    poly = BiSeries.term(field, field.one, 1 if axis == 1 else 0, 0 if axis == 1 else 1)
    return CurveGerm(z, s, poly) if axis == 1 else CurveGerm(s, z, poly)


def smooth_graph(h: RamifiedSeries) -> CurveGerm:
    """The germ y2 = h(y1), parametrized by y1 = s."""
    field = h.field
    s = _s_mono(field, field.one, 1)
    poly = None
    if h.prec is None and h.coeffs and all(e == int(e) and e >= 0 for e in h.coeffs):
        terms = {(0, 1): field.one}
        for e, c in h.coeffs.items():
            key = (int(e), 0)
            cur = terms.get(key)
            neg = field.neg(c)
            terms[key] = neg if cur is None else field.add(cur, neg)
        poly = BiSeries(field, terms)
    return CurveGerm(s, h, poly)


def restrict_to_curve(N: BiConnection, C: CurveGerm, wprec=None) -> DiffModule:
    """Pull the connection back along the arc, for the derivation s d/ds.

    Chain rule: s d/ds picks up alpha_i = s y_i'(s) / y_i(s) times the
    matrix of y_i d/dy_i, composed with the parametrization.
    """
    if C.y1.is_exact_zero() or C.y2.is_exact_zero():
        raise UserInputError("the arc lies inside the polar divisor; restriction is singular")
    field = N.field
    v1 = C.y1.valuation()
    v2 = C.y2.valuation()
    if wprec is None:
        pole = max(
            (v1 * s.pole1 + v2 * s.pole2 for M in (N.psi1, N.psi2) for row in M.rows for s in row),
            default=0,
        )
        wprec = N.rank * max(pole, 1) + N.rank + 8
    wprec = Fraction(wprec)
    alpha1 = _log_derivative(C.y1, wprec)
    alpha2 = _log_derivative(C.y2, wprec)
    rows = []
    for i in range(N.rank):
        row = []
        for j in range(N.rank):
            a = N.psi1.entry(i, j).restrict(C.y1, C.y2, out_prec=wprec)
            b = N.psi2.entry(i, j).restrict(C.y1, C.y2, out_prec=wprec)
            row.append(alpha1 * a + alpha2 * b)
        rows.append(row)
    return DiffModule(field, SeriesMatrix(field, rows), var="s")


def _log_derivative(y: RamifiedSeries, wprec):
    """s y'(s) / y(s); valuation zero, constant term ord_s(y)."""
    th = y.apply_theta()
    if y.prec is None and len(y.coeffs) > 1:
        inv = y.invert(wprec + 2 * y.valuation() + 2)
    else:
        inv = y.invert()
    return (th * inv).truncate(wprec)


def intersection_multiplicity(C: CurveGerm, Z: CurveGerm) -> int:
    """ord_s of Z's polynomial along C's parametrization."""
    if Z.poly is None:
        raise UserInputError("the second germ needs a defining polynomial")
    if not C.through_origin():
        raise UserInputError("intersection numbers are taken at the origin")
    g0 = Z.poly.constant_term()
    if not Z.poly.field.is_zero(g0):
        raise UserInputError("the defining polynomial does not pass through the origin")
    composed = Z.poly.restrict(C.y1, C.y2)
    if composed.is_exact_zero():
        raise CommonBranchError("the germs share a branch; the multiplicity is infinite")
    v = composed.valuation()
    return int(v)


_SEPARATION_BOUND = 512


def _germ_ratfunc(F, y: RamifiedSeries):
    """Polynomial parametrization coordinate as an exact rational function."""
    if y.prec is not None:
        raise PrecisionError(
            "branch intersection needs exact parametrizations", available=y.prec
        )
    top = 0 if not y.coeffs else int(max(y.coeffs))
    num = [QQ.zero] * (top + 1)
    for e, c in y.coeffs.items():
        num[int(e)] = c
    return F.from_poly(num)


def _rf_order_lead(rf):
    """(order at s = 0, leading coefficient), or (None, None) for zero."""
    if not rf.num:
        return None, None
    i = next(k for k, c in enumerate(rf.num) if not QQ.is_zero(c))
    j = next(k for k, c in enumerate(rf.den) if not QQ.is_zero(c))
    return i - j, rf.num[i] / rf.den[j]


def _branch_data(coords):
    """Multiplicity and normalized tangent direction of a parametrized branch."""
    o1, l1 = _rf_order_lead(coords[0])
    o2, l2 = _rf_order_lead(coords[1])
    orders = [o for o in (o1, o2) if o is not None]
    m = min(orders)
    a = l1 if o1 == m else Fraction(0)
    b = l2 if o2 == m else Fraction(0)
    if a:
        return m, (Fraction(1), b / a)
    return m, (Fraction(0), Fraction(1))


def branch_intersection(C: CurveGerm, Z: CurveGerm) -> int:
    """Intersection number of two branch germs, from parametrizations alone.

    Accumulates the product of multiplicities, blowing up as long as the
    tangent directions agree; the strict transforms are tracked with
    exact rational-function coordinates, so no defining polynomial is
    involved.  This counts only the two given branches, whereas
    intersection_multiplicity counts every branch of the second curve
    through the origin.
    """
    for germ in (C, Z):
        if not germ.through_origin():
            raise UserInputError("intersection numbers are taken at the origin")
    F = FunctionField(QQ, "s")
    c = [_germ_ratfunc(F, C.y1), _germ_ratfunc(F, C.y2)]
    z = [_germ_ratfunc(F, Z.y1), _germ_ratfunc(F, Z.y2)]
    total = 0
    for _ in range(_SEPARATION_BOUND):
        mc, tc = _branch_data(c)
        mz, tz = _branch_data(z)
        total += mc * mz
        if tc != tz:
            return total
        if tc[0] == 0:
            c.reverse()
            z.reverse()
            _, tc = _branch_data(c)
        lam = F.from_fraction(tc[1])
        c[1] = F.sub(F.div(c[1], c[0]), lam)
        z[1] = F.sub(F.div(z[1], z[0]), lam)
    raise CommonBranchError("the germs did not separate; they share a branch")


class SemicontinuityReport(NamedTuple):
    """Both sides of a curve-versus-axes comparison inequality."""

    quantity: str
    left: Fraction
    right: Fraction
    terms: tuple
    holds: bool

    def to_str(self) -> str:
        parts = " + ".join(f"{m}*{v}" for m, v in self.terms) or "0"
        rel = "<=" if self.holds else ">"
        return f"{self.quantity}: {self.left} {rel} {parts} = {self.right}"


def _axis_of(Z: CurveGerm) -> int:
    if Z.poly is not None and Z.poly.prec is None:
        support = sorted(Z.poly.coeffs)
        if support == [(1, 0)]:
            return 1
        if support == [(0, 1)]:
            return 2
    raise UserInputError(
        "rank and irregularity along a branch are only computed for the axes y1 = 0, y2 = 0"
    )


def _semicontinuity(N: BiConnection, C: CurveGerm, zs, quantity: str, measure) -> SemicontinuityReport:
    left = measure(restrict_to_curve(N, C))
    terms = []
    total = Fraction(0)
    for Z in zs:
        axis = _axis_of(Z)
        mult = intersection_multiplicity(C, Z)
        value = measure(axis_module(N, axis))
        terms.append((mult, value))
        total += mult * value
    return SemicontinuityReport(quantity, left, total, tuple(terms), left <= total)


def check_rank_semicontinuity(N: BiConnection, C: CurveGerm, zs) -> SemicontinuityReport:
    """Katz rank along the curve against multiplicity-weighted axis ranks."""
    return _semicontinuity(N, C, zs, "rank", katz_rank)


def check_irregularity_semicontinuity(N: BiConnection, C: CurveGerm, zs) -> SemicontinuityReport:
    """Irregularity along the curve against multiplicity-weighted axis values."""
    return _semicontinuity(N, C, zs, "irregularity", irregularity)


# -- crossing-point projections -------------------------------------------------


class CrossingPart(NamedTuple):
    """One declared summand: a rank-1 exponent pair twisting a regular part."""

    phi1: BiSeries
    phi2: BiSeries
    rank: int


class CrossingReport(NamedTuple):
    parts: tuple
    distinct: bool
    refines_axis1: bool
    refines_axis2: bool

    @property
    def semi_stable(self) -> bool:
        return self.distinct and self.refines_axis1 and self.refines_axis2


def _polar_part(s: BiSeries) -> BiSeries:
    keep = {k: c for k, c in s.coeffs.items() if k[0] < 0 or k[1] < 0}
    return BiSeries(s.field, keep, s.prec, s.pole1, s.pole2)


def _axis_slope(phi: BiSeries, axis: int) -> Fraction:
    """Pole order of the exponent along one axis, at the other's generic point."""
    exps = [i if axis == 1 else j for (i, j) in phi.coeffs]
    return Fraction(max(0, -min(exps))) if exps else Fraction(0)


def crossing_projections(N: BiConnection, parts=None) -> CrossingReport:
    """Check a declared decomposition at a crossing of the two axes.

    The projections onto each axis must separate the summands (distinct
    exponents modulo logarithmic and regular forms) and reproduce the
    slope data of the one-variable modules computed independently.  For
    rank one the declaration is read off the matrices; anything larger
    must arrive decomposed.
    """
    if parts is None:
        if N.rank == 1:
            parts = [CrossingPart(N.psi1.entry(0, 0), N.psi2.entry(0, 0), 1)]
        else:
            raise UndecidableHereError(
                "deciding semi-stability of an undecomposed crossing needs the "
                "constructive decomposition, which is out of scope here"
            )
    parts = tuple(parts)
    if sum(p.rank for p in parts) != N.rank:
        raise UserInputError("declared ranks do not sum to the rank of the system")
    for p in parts:
        if p.rank < 1:
            raise UserInputError("each summand needs positive rank")
        if p.phi1.prec is not None or p.phi2.prec is not None:
            raise UserInputError("declared exponents must be exact")
    distinct = True
    for a in range(len(parts)):
        for b in range(a + 1, len(parts)):
            d1 = _polar_part(parts[a].phi1 - parts[b].phi1)
            d2 = _polar_part(parts[a].phi2 - parts[b].phi2)
            if d1.is_visibly_zero() and d2.is_visibly_zero():
                distinct = False
    refines = []
    for axis in (1, 2):
        declared = {}
        for p in parts:
            slope = _axis_slope(p.phi1 if axis == 1 else p.phi2, axis)
            declared[slope] = declared.get(slope, Fraction(0)) + p.rank
        computed = newton_polygon(axis_module(N, axis)).slopes()
        refines.append(declared == dict(computed))
    return CrossingReport(parts, distinct, refines[0], refines[1])


class StrictTransform(NamedTuple):
    chart: int
    germ: CurveGerm
    meets_e_at: object


def germ_strict_transform(C: CurveGerm, wprec=None) -> StrictTransform:
    """Lift the arc through one point blow-up into the chart it lands in.

    In chart 1 the new coordinates are (x, u) = (y1, y2/y1); the germ
    meets the exceptional line x = 0 at u(0).
    """
    if C.y1.is_exact_zero() or C.y2.is_exact_zero():
        raise UserInputError("axis branches lift to the chart axes; nothing to compute")
    if not C.through_origin():
        raise UserInputError("only germs through the blown-up point transform")
    v1 = C.y1.valuation()
    v2 = C.y2.valuation()
    if wprec is None:
        wprec = max(e for y in (C.y1, C.y2) for e in y.coeffs) + max(v1, v2) + 6
    if v1 <= v2:
        ratio = (C.y2 * _safe_invert(C.y1, wprec)).truncate(wprec)
        germ = CurveGerm(C.y1, ratio)
        return StrictTransform(1, germ, ratio.coeff(0))
    ratio = (C.y1 * _safe_invert(C.y2, wprec)).truncate(wprec)
    germ = CurveGerm(ratio, C.y2)
    return StrictTransform(2, germ, ratio.coeff(0))


def _safe_invert(y: RamifiedSeries, wprec):
    if y.prec is None and len(y.coeffs) > 1:
        return y.invert(Fraction(wprec) + 2 * y.valuation() + 2)
    return y.invert()
