"""Irreducible factorization and root finding over the scalar tower.

Strategy: polynomials over QQ or a chain of rational-function fields are
cleared of denominators and handed to sympy's multivariate factorizer; over
an algebraic extension we descend by the classical norm trick (shift by a
multiple of the generator until the norm, a resultant against the minimal
polynomial, is squarefree, factor the norm one level down, and pull factors
back with gcds).  Everything returns monic factors over the original field.

Root finding is factorization followed by reading off the linear factors;
the nonlinear cofactor is reported so callers can raise
``ExtensionRequiredError`` with a concrete minimal polynomial.
"""

from __future__ import annotations

from fractions import Fraction

import sympy

from . import _polyops as P
from .errors import MeroconnError
from .fields import QQ, ExtensionField, FunctionField, RatFunc
from .polynomials import Poly, squarefree_factor

_MAIN = sympy.Symbol("_Z")


def _function_chain(field):
    """[(field, var)] for a QQ-rooted chain of FunctionFields, or None."""
    chain = []
    f = field
    while isinstance(f, FunctionField):
        chain.append((f, f.var))
        f = f.base
    if f == QQ:
        chain.reverse()
        return chain
    return None


def _elem_to_sympy(field, value, symbols):
    if field == QQ:
        return sympy.Rational(value.numerator, value.denominator)
    if isinstance(field, FunctionField):
        sym = symbols[field.var]
        num = sympy.Integer(0)
        for i, c in enumerate(value.num):
            num += _elem_to_sympy(field.base, c, symbols) * sym**i
        den = sympy.Integer(0)
        for i, c in enumerate(value.den):
            den += _elem_to_sympy(field.base, c, symbols) * sym**i
        return num / den
    raise MeroconnError(f"no sympy bridge for field {field!r}")


def _poly_from_multivar(field, spoly_dict, var_order):
    """Rebuild a field element from a multivariate-over-QQ coefficient dict."""
    if not var_order:
        total = Fraction(0)
        for exps, c in spoly_dict.items():
            total += Fraction(c.p, c.q)
        return total
    *rest, _last = var_order
    ff = field
    by_deg: dict[int, dict] = {}
    for exps, c in spoly_dict.items():
        d = exps[-1]
        by_deg.setdefault(d, {})[exps[:-1]] = c
    max_d = max(by_deg) if by_deg else 0
    coeffs = []
    for d in range(max_d + 1):
        sub = by_deg.get(d)
        if sub is None:
            coeffs.append(ff.base.zero)
        else:
            coeffs.append(_poly_from_multivar_base(ff.base, sub, rest))
    return ff.from_poly(coeffs)


def _poly_from_multivar_base(field, spoly_dict, var_order):
    if field == QQ:
        total = Fraction(0)
        for exps, c in spoly_dict.items():
            total += Fraction(c.p, c.q)
        return total
    return _poly_from_multivar(field, spoly_dict, var_order)


def _factor_over_chain(p: Poly):
    field = p.field
    chain = _function_chain(field) or []
    var_order = [v for _, v in chain]
    symbols = {v: sympy.Symbol(v) for v in var_order}
    expr = sympy.Integer(0)
    for i, c in enumerate(p.coeffs):
        expr += _elem_to_sympy(field, c, symbols) * _MAIN**i
    expr = sympy.together(expr)
    num, _den = sympy.fraction(expr)
    gens = [_MAIN] + [symbols[v] for v in var_order]
    _, factors = sympy.factor_list(sympy.Poly(sympy.expand(num), *gens))
    out = []
    for fac, mult in factors:
        sp = sympy.Poly(fac, *gens)
        if sp.degree(_MAIN) <= 0:
            continue  # content in the coefficient variables: a unit of the field
        by_deg: dict[int, dict] = {}
        for exps, c in sp.as_dict().items():
            zdeg, rest = exps[0], exps[1:]
            by_deg.setdefault(zdeg, {})[rest] = sympy.Rational(c)
        coeffs = []
        for d in range(max(by_deg) + 1):
            sub = by_deg.get(d)
            if sub is None:
                coeffs.append(field.zero)
            elif field == QQ:
                coeffs.append(_poly_from_multivar_base(QQ, sub, []))
            else:
                coeffs.append(_rebuild_chain_elem(field, sub, var_order))
        out.append((Poly(field, coeffs).monic(), mult))
    return out


def _rebuild_chain_elem(field, spoly_dict, var_order):
    """Multivariate QQ-poly dict (in chain vars) -> element of the FF chain."""
    if not var_order:
        return _poly_from_multivar_base(QQ, spoly_dict, [])
    return _poly_from_multivar(field, spoly_dict, var_order)


def _factor_squarefree_over_extension(p: Poly):
    """Trager norm descent for a monic squarefree p over an ExtensionField."""
    K = p.field
    assert isinstance(K, ExtensionField)
    B = K.base
    if p.degree == 1:
        return [p.monic()]
    for s in range(0, 8):
        shift = K.mul(K.from_int(-s), K.gen)
        ps = p.shift_var(shift)  # p(y + (-s)*w) has the same factor shape
        norm = _norm_poly(K, ps)
        if P.squarefree_part(B, norm.coeffs) == P.monic(B, norm.coeffs):
            break
    else:
        raise MeroconnError("norm descent failed to reach a squarefree norm")
    out = []
    for fac, _m in irreducible_factors(norm):
        fk = fac.map_field(K)
        g = ps.gcd(fk)
        if g.degree > 0:
            unshift = K.mul(K.from_int(s), K.gen)
            out.append(g.shift_var(unshift).monic())
    if sum(f.degree for f in out) != p.degree:
        raise MeroconnError("norm descent lost factors")
    return out


def _norm_poly(K: ExtensionField, p: Poly) -> Poly:
    """Res_w(minpoly(w), p(y)) as a polynomial in y over the base of K."""
    B = K.base
    L = FunctionField(B, "_normvar")
    # view p as a polynomial in w with coefficients in B[y] subset L
    deg_w = K.degree - 1
    coeffs_w = []
    for j in range(deg_w + 1):
        cs = []
        for c in p.coeffs:  # c is AlgElem over B
            cs.append(c.vec[j] if j < len(c.vec) else B.zero)
        coeffs_w.append(L.from_poly(cs))
    pw = Poly(L, coeffs_w)
    mw = Poly(L, [L._lift(c) for c in K.minpoly])
    res = P.resultant(L, mw.coeffs, pw.coeffs)
    if not isinstance(res, RatFunc):
        raise MeroconnError("unexpected resultant value in norm descent")
    if res.den != (B.one,):
        raise MeroconnError("norm resultant should be polynomial")
    return Poly(B, res.num).monic()


def irreducible_factors(p: Poly):
    """Monic irreducible factors with multiplicities (unit dropped).

    Irreducibility is genuine over QQ and rational-function chains (sympy);
    over an extension tower it holds whenever the tower's minimal polynomials
    are irreducible, which is how this package constructs them.
    """
    if p.degree < 1:
        return []
    field = p.field
    out = []
    for q, mult in squarefree_factor(p):
        if _function_chain(field) is not None or field == QQ:
            for fac, m2 in _factor_over_chain(q):
                out.append((fac, mult * m2))
        elif isinstance(field, ExtensionField):
            for fac in _factor_squarefree_over_extension(q.monic()):
                out.append((fac, mult))
        else:
            raise MeroconnError(f"factorization unsupported over {field!r}")
    return out


def roots_in_field(p: Poly):
    """All roots of p in its own field: ([(root, multiplicity)], cofactor).

    The cofactor is the monic product of the nonlinear irreducible factors;
    it is 1 exactly when p splits over the field.
    """
    F = p.field
    roots = []
    cofactor = Poly(F, (F.one,))
    for fac, mult in irreducible_factors(p):
        if fac.degree == 1:
            roots.append((F.neg(fac.coeffs[0]), mult))
        else:
            cofactor = cofactor * fac**mult
    return roots, cofactor


rational_roots = roots_in_field
