"""Exact scalar arithmetic: rationals, rational functions, algebraic extensions.

Scalars are plain values (``fractions.Fraction``, :class:`RatFunc`,
:class:`AlgElem`) managed by an explicit field object; containers store the
field once and route every coefficient operation through it.  Fields form a
tower: ``QQ``, ``FunctionField(QQ, "t")``, and simple algebraic extensions on
top given by a squarefree minimal polynomial.  There is no automatic closure;
operations that need a missing root raise
:class:`~meroconn.errors.ExtensionRequiredError` upstream so callers can
extend the tower and retry.

All values are immutable; all operations are pure.
"""

from __future__ import annotations

from fractions import Fraction

from . import _polyops as P
from .errors import MeroconnError


class RatFunc:
    """A reduced rational function: num/den as coefficient tuples over the base."""

    __slots__ = ("num", "den")

    def __init__(self, num, den):
        self.num = num
        self.den = den

    def __eq__(self, other):
        return (
            isinstance(other, RatFunc) and self.num == other.num and self.den == other.den
        )

    def __hash__(self):
        return hash((RatFunc, self.num, self.den))

    def __repr__(self):
        return f"RatFunc({self.num!r}, {self.den!r})"


class AlgElem:
    """An element of a simple extension: coordinate vector in the power basis."""

    __slots__ = ("vec",)

    def __init__(self, vec):
        self.vec = vec

    def __eq__(self, other):
        return isinstance(other, AlgElem) and self.vec == other.vec

    def __hash__(self):
        return hash((AlgElem, self.vec))

    def __repr__(self):
        return f"AlgElem({self.vec!r})"


class _FieldBase:
    def sub(self, a, b):
        return self.add(a, self.neg(b))

    def div(self, a, b):
        return self.mul(a, self.inv(b))

    def pow(self, a, n: int):
        if n < 0:
            return self.pow(self.inv(a), -n)
        out = self.one
        base = a
        while n:
            if n & 1:
                out = self.mul(out, base)
            base = self.mul(base, base)
            n >>= 1
        return out

    def eq(self, a, b):
        return self.is_zero(self.sub(a, b))

    def ancestors(self):
        """The tower below this field, outermost last (includes self)."""
        out = []
        f = self
        while f is not None:
            out.append(f)
            f = getattr(f, "base", None)
        out.reverse()
        return out

    def coerce(self, value, source=None):
        """Embed ``value`` (from ``source`` or a plain int/Fraction) into self."""
        if isinstance(value, int):
            return self.from_int(value)
        if isinstance(value, Fraction) and source is None:
            return self.from_fraction(value)
        if source == self:
            return value
        base = getattr(self, "base", None)
        if base is None:
            raise MeroconnError(f"cannot coerce from {source} into {self}")
        return self._lift(base.coerce(value, source))

    def var_names(self):
        out = []
        for f in self.ancestors():
            v = getattr(f, "var", None) or getattr(f, "gen_name", None)
            if v:
                out.append(v)
        return out


class RationalField(_FieldBase):
    """The rationals; elements are ``fractions.Fraction``."""

    zero = Fraction(0)
    one = Fraction(1)

    def from_int(self, n):
        return Fraction(n)

    def from_fraction(self, q):
        return Fraction(q)

    def add(self, a, b):
        return a + b

    def neg(self, a):
        return -a

    def mul(self, a, b):
        return a * b

    def inv(self, a):
        if a == 0:
            raise ZeroDivisionError("division by zero in QQ")
        return 1 / a

    def is_zero(self, a):
        return a == 0

    def eq(self, a, b):
        return a == b

    def derive(self, a, var):
        return Fraction(0)

    def to_str(self, a):
        return str(a)

    def random_element(self, rng, size=6):
        num = rng.randint(-size, size)
        den = rng.randint(1, size)
        return Fraction(num, den)

    def __repr__(self):
        return "QQ"

    def __eq__(self, other):
        return isinstance(other, RationalField)

    def __hash__(self):
        return hash(RationalField)


QQ = RationalField()


class FunctionField(_FieldBase):
    """Rational functions in one variable over a base field.

    Elements are :class:`RatFunc` values kept reduced (coprime, monic
    denominator).  Towers such as QQ(y1)(y2) are supported by nesting.
    """

    def __init__(self, base, var: str):
        self.base = base
        self.var = var
        self.zero = RatFunc((), (base.one,))
        self.one = RatFunc((base.one,), (base.one,))
        self.gen = RatFunc((base.zero, base.one), (base.one,))

    def __repr__(self):
        return f"{self.base!r}({self.var})"

    def __eq__(self, other):
        return (
            isinstance(other, FunctionField)
            and self.var == other.var
            and self.base == other.base
        )

    def __hash__(self):
        return hash((FunctionField, self.var, hash(self.base)))

    def _make(self, num, den):
        B = self.base
        if not num:
            return RatFunc((), (B.one,))
        g = P.gcd(B, num, den)
        if P.deg(g) > 0:
            num = P.divmod_(B, num, g)[0]
            den = P.divmod_(B, den, g)[0]
        lead = den[-1]
        if not B.eq(lead, B.one):
            inv = B.inv(lead)
            num = P.scale(B, num, inv)
            den = P.scale(B, den, inv)
        return RatFunc(num, den)

    def from_poly(self, coeffs):
        return self._make(P.trim(self.base, coeffs), (self.base.one,))

    def _lift(self, a):
        return RatFunc(P.const(self.base, a), (self.base.one,))

    def from_int(self, n):
        return self._lift(self.base.from_int(n))

    def from_fraction(self, q):
        return self._lift(self.base.coerce(q))

    def add(self, a, b):
        B = self.base
        num = P.add(B, P.mul(B, a.num, b.den), P.mul(B, b.num, a.den))
        return self._make(num, P.mul(B, a.den, b.den))

    def neg(self, a):
        return RatFunc(P.neg(self.base, a.num), a.den)

    def mul(self, a, b):
        B = self.base
        return self._make(P.mul(B, a.num, b.num), P.mul(B, a.den, b.den))

    def inv(self, a):
        if not a.num:
            raise ZeroDivisionError(f"division by zero in {self}")
        return self._make(a.den, a.num)

    def is_zero(self, a):
        return not a.num

    def eq(self, a, b):
        return a.num == b.num and a.den == b.den

    def derive(self, a, var):
        B = self.base
        if var == self.var:
            dnum, dden = P.deriv(B, a.num), P.deriv(B, a.den)
        else:
            dnum = P.trim(B, [B.derive(c, var) for c in a.num])
            dden = P.trim(B, [B.derive(c, var) for c in a.den])
        num = P.sub(B, P.mul(B, dnum, a.den), P.mul(B, a.num, dden))
        return self._make(num, P.mul(B, a.den, a.den))

    def evaluate(self, a, point):
        """Evaluate at ``point`` (a base-field element); raises PoleError at poles."""
        from .errors import PoleError

        B = self.base
        den = P.evaluate(B, a.den, point)
        if B.is_zero(den):
            raise PoleError(f"pole at {self.var} = {B.to_str(point)}")
        return B.div(P.evaluate(B, a.num, point), den)

    def numerator(self, a):
        return a.num

    def denominator(self, a):
        return a.den

    def to_str(self, a):
        if not a.num:
            return "0"
        num = format_poly(self.base, a.num, self.var)
        if a.den == (self.base.one,):
            return num
        den = format_poly(self.base, a.den, self.var)
        return f"({num})/({den})"

    def random_element(self, rng, size=4):
        B = self.base
        num = P.trim(B, [B.random_element(rng, size) for _ in range(rng.randint(1, 3))])
        if rng.random() < 0.5:
            den = (B.one,)
        else:
            den = P.trim(B, [B.random_element(rng, size) for _ in range(2)])
            if not den:
                den = (B.one,)
        if not num:
            num = (B.one,)
        return self._make(num, den)


class ExtensionField(_FieldBase):
    """Simple algebraic extension of the base by a named root.

    ``minpoly`` is a monic coefficient tuple over the base, squarefree, of
    degree >= 1.  Elements are :class:`AlgElem` coordinate vectors of length
    ``degree`` in the power basis of the generator.
    """

    def __init__(self, base, gen_name: str, minpoly):
        minpoly = P.monic(base, P.trim(base, minpoly))
        if P.deg(minpoly) < 1:
            raise MeroconnError("extension needs a minimal polynomial of degree >= 1")
        sqf = P.squarefree_part(base, minpoly)
        if sqf != minpoly:
            raise MeroconnError(
                f"minimal polynomial for {gen_name} is not squarefree over {base!r}"
            )
        self.base = base
        self.gen_name = gen_name
        self.minpoly = minpoly
        self.degree = P.deg(minpoly)
        self.zero = AlgElem((base.zero,) * self.degree)
        one = [base.zero] * self.degree
        one[0] = base.one
        self.one = AlgElem(tuple(one))
        if self.degree == 1:
            self.gen = AlgElem((base.neg(minpoly[0]),))
        else:
            gen = [base.zero] * self.degree
            gen[1] = base.one
            self.gen = AlgElem(tuple(gen))

    def __repr__(self):
        return f"{self.base!r}[{self.gen_name}]"

    def __eq__(self, other):
        return (
            isinstance(other, ExtensionField)
            and self.gen_name == other.gen_name
            and self.minpoly == other.minpoly
            and self.base == other.base
        )

    def __hash__(self):
        return hash((ExtensionField, self.gen_name, self.minpoly, hash(self.base)))

    def _from_vec(self, vec):
        vec = list(vec)[: self.degree]
        while len(vec) < self.degree:
            vec.append(self.base.zero)
        return AlgElem(tuple(vec))

    def _reduce(self, coeffs):
        return self._from_vec(P.pmod(self.base, P.trim(self.base, coeffs), self.minpoly))

    def _lift(self, a):
        vec = [self.base.zero] * self.degree
        vec[0] = a
        return AlgElem(tuple(vec))

    def from_int(self, n):
        return self._lift(self.base.from_int(n))

    def from_fraction(self, q):
        return self._lift(self.base.coerce(q))

    def add(self, a, b):
        B = self.base
        return AlgElem(tuple(B.add(x, y) for x, y in zip(a.vec, b.vec)))

    def neg(self, a):
        return AlgElem(tuple(self.base.neg(x) for x in a.vec))

    def mul(self, a, b):
        B = self.base
        prod = P.mul(B, P.trim(B, a.vec), P.trim(B, b.vec))
        return self._reduce(prod)

    def inv(self, a):
        B = self.base
        pa = P.trim(B, a.vec)
        if not pa:
            raise ZeroDivisionError(f"division by zero in {self}")
        g, s, _ = P.xgcd(B, pa, self.minpoly)
        if P.deg(g) != 0:
            raise MeroconnError(
                f"zero divisor in {self!r}: modulus is reducible along this element"
            )
        s = P.scale(B, s, B.inv(g[0]))
        return self._from_vec(s)

    def is_zero(self, a):
        return all(self.base.is_zero(x) for x in a.vec)

    def eq(self, a, b):
        return a.vec == b.vec

    def derive(self, a, var):
        B = self.base
        # d/dvar of sum c_i w^i: derived coefficients plus (dw/dvar)*p'(w),
        # with dw/dvar = -m^[coeffs derived](w) / m'(w) implicit from the modulus.
        dcoeffs = self._from_vec(tuple(B.derive(c, var) for c in a.vec))
        m_var = P.trim(B, [B.derive(c, var) for c in self.minpoly])
        if m_var:
            mprime_w = self._reduce(P.deriv(B, self.minpoly))
            dw = self.neg(self.mul(self._reduce(m_var), self.inv(mprime_w)))
            pprime = P.deriv(B, P.trim(B, a.vec))
            dcoeffs = self.add(dcoeffs, self.mul(self._reduce(pprime), dw))
        return dcoeffs

    def evaluate_base(self, a):
        """If the element lies in the base, return it there; else None."""
        if all(self.base.is_zero(c) for c in a.vec[1:]):
            return a.vec[0]
        return None

    def to_str(self, a):
        return format_poly(self.base, P.trim(self.base, a.vec), self.gen_name)

    def random_element(self, rng, size=4):
        B = self.base
        return self._from_vec(tuple(B.random_element(rng, size) for _ in range(self.degree)))


FieldExtension = ExtensionField


def format_poly(F, coeffs, var: str) -> str:
    """Human-readable polynomial string, highest degree first."""
    if not coeffs:
        return "0"
    parts = []
    for i in range(len(coeffs) - 1, -1, -1):
        c = coeffs[i]
        if F.is_zero(c):
            continue
        cs = F.to_str(c)
        if i == 0:
            term = cs
        else:
            v = var if i == 1 else f"{var}^{i}"
            if cs == "1":
                term = v
            elif cs == "-1":
                term = f"-{v}"
            elif any(op in cs[1:] for op in "+-") or "/" in cs:
                term = f"({cs})*{v}"
            else:
                term = f"{cs}*{v}"
        parts.append(term)
    out = parts[0]
    for term in parts[1:]:
        out += " - " + term[1:] if term.startswith("-") else " + " + term
    return out


def common_field(f1, f2):
    """The taller of two fields if one contains the other, else error."""
    a1, a2 = f1.ancestors(), f2.ancestors()
    if len(a1) >= len(a2):
        tall, short = f1, f2
    else:
        tall, short = f2, f1
    if short in tall.ancestors():
        return tall
    raise MeroconnError(f"incompatible scalar fields {f1!r} and {f2!r}")


def evaluate_ratfunc(ff: FunctionField, a: RatFunc, target, point):
    """Evaluate a rational function at a point living in ``target``.

    ``target`` must contain the base of ``ff`` (e.g. an extension of it);
    raises PoleError when the denominator vanishes at the point.
    """
    from .errors import PoleError

    B = ff.base
    num = P.trim(target, [target.coerce(c, B) for c in a.num])
    den = P.trim(target, [target.coerce(c, B) for c in a.den])
    dval = P.evaluate(target, den, point)
    if target.is_zero(dval):
        raise PoleError(f"pole at {ff.var} = {target.to_str(point)}")
    return target.div(P.evaluate(target, num, point), dval)
