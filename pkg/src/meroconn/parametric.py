"""Families of connections varying with one parameter.

The coefficient ring of a family is polynomials in the parameter t;
arithmetic happens generically over its fraction field.  Global
conclusions (slope divisors, turning points, descent of the formal
decomposition) are read off characteristic-polynomial data over Q(t)
and confirmed by pointwise specialization; extensions of Q[t] are never
constructed as rings, only as algebraic points where a check needs one.
"""

from fractions import Fraction
from math import lcm
from typing import NamedTuple, Optional

from . import linalg as LA
from .diffmod import (
    DiffModule,
    NewtonPolygon,
    diff_operator,
    end_module,
    newton_polygon,
)
from .errors import (
    ExtensionRequiredError,
    InconsistentOperatorError,
    MeroconnError,
    PoleError,
    PrecisionError,
    SingleClusterError,
    TheoremViolationError,
    UserInputError,
)
from .factorization import irreducible_factors
from .fields import QQ, ExtensionField, FunctionField, evaluate_ratfunc
from .polynomials import Poly
from .series import RamifiedSeries, SeriesMatrix
from .turrittin import (
    _x_shift_matrix,
    cluster_residue,
    cluster_single,
    shear,
    slope_decomposition,
    split_by_residue,
)


def _parameter_factors(coeffs) -> list:
    """Monic irreducible factors (degree >= 1) of a coefficient tuple over Q."""
    p = Poly(QQ, list(coeffs))
    if p.is_zero() or p.degree < 1:
        return []
    return [f.monic() for f, _ in irreducible_factors(p) if f.degree >= 1]


def _poly_product(factors) -> Poly:
    out = Poly(QQ, (Fraction(1),))
    for f in factors:
        out = out * f
    return out


class ParametricModule:
    """A connection whose matrix entries are rational in one parameter.

    ``locus`` is the monic squarefree polynomial in the parameter whose
    roots carry all poles of the entries; the family specializes at
    every other value.
    """

    __slots__ = ("module", "param", "locus", "locus_factors", "_np", "_end_np", "_divisors")

    def __init__(self, module: DiffModule):
        F = module.field
        if not isinstance(F, FunctionField) or F.base != QQ:
            raise UserInputError(
                "a parametric module needs entries rational in a single parameter"
            )
        if F.var == module.var:
            raise UserInputError("parameter and series variable share a name")
        self.module = module
        self.param = F.var
        seen = {}
        for row in module.matrix.rows:
            for s in row:
                for c in s.coeffs.values():
                    for f in _parameter_factors(c.den):
                        seen[f.coeffs] = f
        self.locus_factors = tuple(seen[k] for k in sorted(seen))
        self.locus = _poly_product(self.locus_factors)
        self._np = None
        self._end_np = None
        self._divisors = None

    @property
    def rank(self) -> int:
        return self.module.rank

    @property
    def field(self):
        return self.module.field

    def end_family(self) -> "ParametricModule":
        return ParametricModule(end_module(self.module))

    def __repr__(self):
        return (
            f"ParametricModule(rank={self.rank}, param={self.param!r}, "
            f"locus={self.locus.to_str(self.param)})"
        )


def specialize(pm: ParametricModule, point, field=None) -> DiffModule:
    """Evaluate the family at one parameter value.

    ``point`` is a rational number by default; to specialize at an
    algebraic value pass ``field`` (an extension of the rationals)
    together with one of its elements.  Raises PoleError when any
    entry coefficient has a pole there.
    """
    if field is None:
        field = QQ
        point = QQ.from_fraction(Fraction(point))
    ff = pm.module.field

    def ev(series):
        coeffs = {}
        for exp, c in series.coeffs.items():
            v = evaluate_ratfunc(ff, c, field, point)
            if not field.is_zero(v):
                coeffs[exp] = v
        return RamifiedSeries(field, coeffs, series.e, series.prec)

    rows = [[ev(s) for s in row] for row in pm.module.matrix.rows]
    return DiffModule(field, SeriesMatrix(field, rows, pm.module.e), pm.module.var)


def generic_polygon(pm: ParametricModule, wprec=None, seed: int = 0) -> NewtonPolygon:
    if pm._np is None:
        pm._np = newton_polygon(pm.module, wprec, seed)
    return pm._np


def generic_end_polygon(pm: ParametricModule, wprec=None, seed: int = 0) -> NewtonPolygon:
    if pm._end_np is None:
        pm._end_np = newton_polygon(end_module(pm.module), wprec, seed)
    return pm._end_np


# -- slope divisors -----------------------------------------------------------


class SlopeDivisor(NamedTuple):
    sigma: Fraction
    poly: Poly  # in a dummy variable xi, coefficients rational in the parameter
    part_rank: int  # horizontal multiplicity of the slope

    def to_str(self, var: str = "xi") -> str:
        return self.poly.to_str(var)


def _divisor_from_part(pm: ParametricModule, part, wprec, seed) -> SlopeDivisor:
    """prod (xi^sigma - lead_j)^{mu_j} for one pure-slope summand.

    The sheared residue of the summand has the leading coefficients as
    eigenvalues, so its characteristic polynomial is the product over j
    of (T - lead_j)^{mu_j}; substituting T -> xi^sigma expands the
    divisor.  Every surviving exponent is integral because the spectrum
    is stable under the ramification roots of unity.
    """
    F = pm.field
    sigma = part.slope
    B, _, _, _ = shear(part.module, rho=sigma, wprec=wprec, seed=seed)
    chi = LA.charpoly(F, B.constant_matrix())
    if F.is_zero(chi.coeffs[0]):
        raise InconsistentOperatorError(
            "pure-slope summand has a vanishing leading coefficient"
        )
    degree = sigma * chi.degree
    if degree.denominator != 1:
        raise InconsistentOperatorError("slope times multiplicity is not integral")
    out = [F.zero] * (int(degree) + 1)
    for k, c in enumerate(chi.coeffs):
        if F.is_zero(c):
            continue
        exp = sigma * k
        if exp.denominator != 1:
            raise InconsistentOperatorError(
                "residue spectrum is not stable under the ramification group"
            )
        out[int(exp)] = c
    div = SlopeDivisor(sigma, Poly(F, out), chi.degree)
    _require_integral_coefficients(pm, div)
    return div


def _require_integral_coefficients(pm: ParametricModule, div: SlopeDivisor):
    """Divisor coefficients may only have parameter poles on the entry locus."""
    keys = {f.coeffs for f in pm.locus_factors}
    for c in div.poly.coeffs:
        bad = [f for f in _parameter_factors(c.den) if f.coeffs not in keys]
        if bad:
            raise TheoremViolationError(
                "slope-divisor coefficients must stay polynomial away from "
                "the entry poles",
                details={
                    "sigma": str(div.sigma),
                    "factors": [f.to_str(pm.param) for f in bad],
                },
            )


def slope_divisors(pm: ParametricModule, wprec=None, seed: int = 0) -> list:
    """All positive-slope divisors of the family, steepest first."""
    if pm._divisors is None:
        M = pm.module
        w = M.default_wprec() if wprec is None else Fraction(wprec)
        dec = slope_decomposition(M, w, seed)
        pm._divisors = [
            _divisor_from_part(pm, part, w, seed) for part in dec.parts if part.slope > 0
        ]
    return pm._divisors


def slope_divisor(pm: ParametricModule, sigma, wprec=None, seed: int = 0) -> SlopeDivisor:
    """The divisor attached to one positive slope of the generic module."""
    sigma = Fraction(sigma)
    if sigma <= 0:
        raise UserInputError("slope divisors are attached to positive slopes")
    for div in slope_divisors(pm, wprec, seed):
        if div.sigma == sigma:
            return div
    have = ", ".join(str(d.sigma) for d in slope_divisors(pm, wprec, seed)) or "none"
    raise UserInputError(f"{sigma} is not a positive slope (slopes: {have})")


# -- turning points -----------------------------------------------------------


class PointReport(NamedTuple):
    verdict: str  # "stable" | "turning"
    polygon: NewtonPolygon
    specialized_polygon: NewtonPolygon
    end_polygon: NewtonPolygon
    end_specialized_polygon: NewtonPolygon


def check_point(pm: ParametricModule, point, field=None, wprec=None, seed: int = 0):
    """Compare the Newton data at one parameter value with the generic data.

    Stability needs polygon equality both for the module and for its
    endomorphisms; any strict drop classifies the point as turning.
    A specialized polygon escaping the generic one is impossible and is
    reported as a theorem violation.
    """
    Msp = specialize(pm, point, field)
    np_gen = generic_polygon(pm, wprec, seed)
    np_sp = newton_polygon(Msp, wprec, seed)
    end_gen = generic_end_polygon(pm, wprec, seed)
    end_sp = newton_polygon(end_module(Msp), wprec, seed)
    for gen, sp, what in ((np_gen, np_sp, "module"), (end_gen, end_sp, "endomorphisms")):
        if not gen.includes(sp):
            raise TheoremViolationError(
                "specialized Newton polygon escapes the generic one",
                details={"which": what, "generic": repr(gen), "specialized": repr(sp)},
            )
    verdict = "stable" if np_sp == np_gen and end_sp == end_gen else "turning"
    return PointReport(verdict, np_gen, np_sp, end_gen, end_sp)


def stability_candidate_polynomial(pm: ParametricModule, wprec=None, seed: int = 0) -> Poly:
    """Squarefree polynomial covering every parameter value that can turn.

    Collects, over the positive slopes of the family and of its
    endomorphism family, the numerator of each divisor's constant term
    (leading coefficients merging into zero) and the denominators of all
    its coefficients (leading coefficients blowing up).  Off its roots
    the Newton polygons cannot move.
    """
    seen = {}
    for fam in (pm, pm.end_family()):
        for div in slope_divisors(fam, wprec, seed):
            F = fam.field
            for k, c in enumerate(div.poly.coeffs):
                if F.is_zero(c):
                    continue
                for f in _parameter_factors(c.den):
                    seen[f.coeffs] = f
                if k == 0:
                    for f in _parameter_factors(c.num):
                        seen[f.coeffs] = f
    return _poly_product(seen[k] for k in sorted(seen))


class TurningLocus(NamedTuple):
    poly: Poly  # monic squarefree over Q in the parameter: confirmed turning values
    classification: dict  # factor string -> "turning" | "stable" | "candidate"
    candidates: Poly  # divisor-derived candidate polynomial before pointwise checks

    def is_empty(self) -> bool:
        return self.poly.degree < 1


def _fresh_point_name(pm: ParametricModule) -> str:
    names = set(pm.field.var_names())
    k = 0
    while True:
        cand = "a" if k == 0 else f"a{k}"
        if cand not in names:
            return cand
        k += 1


def turning_locus(pm: ParametricModule, wprec=None, seed: int = 0) -> TurningLocus:
    """Confirmed turning values of the parameter, with per-factor verdicts.

    Candidate factors come from the slope-divisor data; each is then
    confirmed or refuted by a pointwise Newton comparison (at one root,
    over an extension when the root is irrational).  A factor whose
    check cannot be run stays classified "candidate" and is kept out of
    the confirmed locus.
    """
    cand = stability_candidate_polynomial(pm, wprec, seed)
    classification = {}
    turning = []
    for f in _parameter_factors(cand.coeffs):
        label = f.to_str(pm.param)
        try:
            if f.degree == 1:
                report = check_point(pm, -f.coeffs[0], wprec=wprec, seed=seed)
            else:
                ext = ExtensionField(QQ, _fresh_point_name(pm), tuple(f.coeffs))
                report = check_point(pm, ext.gen, field=ext, wprec=wprec, seed=seed)
        except (PoleError, ExtensionRequiredError, PrecisionError):
            classification[label] = "candidate"
            continue
        classification[label] = report.verdict
        if report.verdict == "turning":
            turning.append(f)
    return TurningLocus(_poly_product(turning), classification, cand)


# -- descent of the formal decomposition --------------------------------------


class DescentReport(NamedTuple):
    descends: bool
    obstruction_order: Optional[Fraction]  # x-order of the first offending term
    obstruction: Optional[Poly]  # product of the offending parameter factors
    projectors: Optional[tuple]  # splitting projectors in the sheared basis
    e: int
    detail: str


def _first_new_pole(mat: SeriesMatrix, locus_keys):
    """Lowest x-order whose coefficients have parameter poles off the locus."""
    found = {}
    for row in mat.rows:
        for s in row:
            for exp, c in s.coeffs.items():
                for f in _parameter_factors(c.den):
                    if f.coeffs not in locus_keys:
                        found.setdefault(exp, {})[f.coeffs] = f
    if not found:
        return None
    order = min(found)
    return order, [found[order][k] for k in sorted(found[order])]


def _descent_worker(M: DiffModule, locus_keys, wprec, seed, rho_bound=None):
    """(obstruction | None, projectors, e); obstruction = (order, factors, note)."""
    F = M.field
    if M.rank == 1:
        return None, (SeriesMatrix.identity(F, 1, M.e),), M.e
    op, _, _ = diff_operator(M, wprec, seed)
    rho = op.katz_rank()
    if rho_bound is not None and rho >= rho_bound:
        raise InconsistentOperatorError("growth rank failed to drop after twist")
    if rho == 0:
        return None, (SeriesMatrix.identity(F, M.rank, M.e),), M.e
    B, _, _, e = shear(M, rho=rho, wprec=wprec, seed=seed)
    chi = LA.charpoly(F, B.constant_matrix())
    if all(F.is_zero(c) for c in chi.coeffs[:-1]):
        raise InconsistentOperatorError("sheared residue nilpotent at positive growth rank")
    try:
        clusters = cluster_residue(F, chi, "roots")
    except SingleClusterError:
        root, _ = cluster_single(F, chi)
        bad = [f for f in _parameter_factors(root.den) if f.coeffs not in locus_keys]
        if bad:
            return (-rho, bad, "exponential coefficient has a parameter pole"), None, e
        lead = RamifiedSeries.monomial(F, root, -rho, e)
        twisted = DiffModule(F, _x_shift_matrix(B, -rho)).twist(lead)
        return _descent_worker(twisted, locus_keys, wprec, seed, rho_bound=rho)
    split = split_by_residue(B, rho, wprec, clusters=clusters)
    T = split.transition
    Tinv = T.inverse(wprec)
    offsets = [0]
    for r in split.ranks:
        offsets.append(offsets[-1] + r)
    projectors = []
    worst = None
    for b, rk in enumerate(split.ranks):
        pattern = [
            [F.one if i == j and offsets[b] <= i < offsets[b + 1] else F.zero for j in range(B.nrows)]
            for i in range(B.nrows)
        ]
        pi = T * SeriesMatrix.from_scalars(F, pattern, T.e) * Tinv
        projectors.append(pi)
        hit = _first_new_pole(pi, locus_keys)
        if hit is not None and (worst is None or hit[0] < worst[0]):
            worst = hit
    if worst is not None:
        return (worst[0], worst[1], "splitting projector has a parameter pole"), None, e
    for blk in split.blocks:
        sub = DiffModule(F, _x_shift_matrix(blk, -rho))
        obs, _, e_sub = _descent_worker(sub, locus_keys, wprec, seed)
        e = lcm(e, e_sub)
        if obs is not None:
            return obs, None, e
    return None, tuple(projectors), e


def check_semistable_descent(pm: ParametricModule, wprec=None, seed: int = 0) -> DescentReport:
    """Does the formal decomposition hold together over the whole t-line?

    Runs the residue splitting generically and inspects the canonical
    projectors: the family descends when no coefficient acquires a
    parameter denominator beyond the entry poles, and is obstructed at
    the first x-order where one does (the parameter values where
    leading eigenvalues merge).  Checked through the working precision.
    """
    M = pm.module
    w = M.default_wprec() if wprec is None else Fraction(wprec)
    locus_keys = {f.coeffs for f in pm.locus_factors}
    obs, projectors, e = _descent_worker(M, locus_keys, w, seed)
    if obs is None:
        return DescentReport(True, None, None, projectors, e, "decomposition descends")
    order, factors, note = obs
    where = ", ".join(f.to_str(pm.param) for f in factors)
    return DescentReport(
        False,
        order,
        _poly_product(factors),
        None,
        e,
        f"obstructed at x-order {order}: {note} at zeros of {where}",
    )


# -- stability under the parameter connection ---------------------------------


def projector_parameter_defect(
    pm: ParametricModule, t_matrix: SeriesMatrix, wprec=None, seed: int = 0
) -> SeriesMatrix:
    """Commutator defect of the first splitting projector with a t-connection.

    ``t_matrix`` is the matrix of the logarithmic parameter derivation
    t d/dt of an integrable pair.  The canonical projectors of the
    residue split are stable under the second connection, so the
    returned matrix vanishes up to the working precision exactly when
    the computed one is.  Needs a positive generic slope and at least
    two residue clusters.
    """
    M = pm.module
    w = M.default_wprec() if wprec is None else Fraction(wprec)
    B, Q, op, e = shear(M, wprec=w, seed=seed)
    rho = op.katz_rank()
    split = split_by_residue(B, rho, w)
    F = M.field
    QT = Q * split.transition
    pattern = [
        [F.one if i == j and i < split.ranks[0] else F.zero for j in range(B.nrows)]
        for i in range(B.nrows)
    ]
    pi = QT * SeriesMatrix.from_scalars(F, pattern, QT.e) * QT.inverse(w)
    Gt = t_matrix.with_e(pi.e)
    return pi.derive_coeffs(pm.param, times_gen=True) + Gt * pi - pi * Gt
