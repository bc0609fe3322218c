"""Polynomials over a scalar field, with squarefree factorization and resultants.

A :class:`Poly` is an immutable dense coefficient tuple plus the field it
lives over.  The heavy lifting sits in :mod:`meroconn._polyops`; this module
adds the object API the rest of the package uses, plus a Sylvester-matrix
determinant kept around as an independent cross-check of the remainder
sequence resultant.
"""

from __future__ import annotations

from . import _polyops as P
from .errors import MeroconnError


class Poly:
    """Univariate polynomial over an explicit field, low-degree-first."""

    __slots__ = ("field", "coeffs")

    def __init__(self, field, coeffs):
        self.field = field
        self.coeffs = P.trim(field, coeffs)

    @classmethod
    def from_ints(cls, field, ints):
        return cls(field, [field.from_int(n) for n in ints])

    @classmethod
    def gen(cls, field):
        return cls(field, (field.zero, field.one))

    @property
    def degree(self) -> int:
        return P.deg(self.coeffs)

    def is_zero(self) -> bool:
        return not self.coeffs

    def leading(self):
        if not self.coeffs:
            return self.field.zero
        return self.coeffs[-1]

    def constant(self):
        return self.coeffs[0] if self.coeffs else self.field.zero

    def __eq__(self, other):
        return (
            isinstance(other, Poly)
            and self.field == other.field
            and self.coeffs == other.coeffs
        )

    def __hash__(self):
        return hash((self.field, self.coeffs))

    def __add__(self, other):
        return Poly(self.field, P.add(self.field, self.coeffs, other.coeffs))

    def __sub__(self, other):
        return Poly(self.field, P.sub(self.field, self.coeffs, other.coeffs))

    def __neg__(self):
        return Poly(self.field, P.neg(self.field, self.coeffs))

    def __mul__(self, other):
        if isinstance(other, Poly):
            return Poly(self.field, P.mul(self.field, self.coeffs, other.coeffs))
        return Poly(self.field, P.scale(self.field, self.coeffs, other))

    def __pow__(self, n: int):
        return Poly(self.field, P.pow_(self.field, self.coeffs, n))

    def divmod(self, other):
        q, r = P.divmod_(self.field, self.coeffs, other.coeffs)
        return Poly(self.field, q), Poly(self.field, r)

    def exact_div(self, other):
        q, r = self.divmod(other)
        if not r.is_zero():
            raise MeroconnError("polynomial division is not exact")
        return q

    def monic(self):
        return Poly(self.field, P.monic(self.field, self.coeffs))

    def derivative(self):
        return Poly(self.field, P.deriv(self.field, self.coeffs))

    def gcd(self, other):
        return Poly(self.field, P.gcd(self.field, self.coeffs, other.coeffs))

    def evaluate(self, x):
        return P.evaluate(self.field, self.coeffs, x)

    def compose(self, other):
        return Poly(self.field, P.compose(self.field, self.coeffs, other.coeffs))

    def shift_var(self, c):
        """p(x + c)."""
        F = self.field
        return self.compose(Poly(F, (c, F.one)))

    def map_field(self, target):
        src = self.field
        return Poly(target, [target.coerce(c, src) for c in self.coeffs])

    def to_str(self, var: str = "X") -> str:
        from .fields import format_poly

        return format_poly(self.field, self.coeffs, var)

    def __repr__(self):
        return f"Poly<{self.to_str()}>"


def squarefree_factor(p: Poly):
    """Squarefree decomposition [(q_i, m_i)] with q_i monic pairwise coprime.

    The product of the q_i**m_i recovers p up to its leading coefficient.
    """
    return [(Poly(p.field, q), m) for q, m in P.yun_squarefree(p.field, p.coeffs)]


def squarefree_part(p: Poly) -> Poly:
    return Poly(p.field, P.squarefree_part(p.field, p.coeffs))


def resultant(p: Poly, q: Poly):
    """Resultant of two polynomials over their common field."""
    if p.field != q.field:
        raise MeroconnError("resultant needs both polynomials over one field")
    return P.resultant(p.field, p.coeffs, q.coeffs)


def discriminant(p: Poly):
    return P.discriminant(p.field, p.coeffs)


def sylvester_matrix(p: Poly, q: Poly):
    """The (m+n) x (m+n) Sylvester matrix as nested lists of field elements."""
    F = p.field
    m, n = p.degree, q.degree
    if m < 0 or n < 0:
        raise MeroconnError("Sylvester matrix needs nonzero polynomials")
    size = m + n
    rows = []
    a = list(reversed(p.coeffs))
    b = list(reversed(q.coeffs))
    for i in range(n):
        rows.append([F.zero] * i + a + [F.zero] * (size - i - len(a)))
    for i in range(m):
        rows.append([F.zero] * i + b + [F.zero] * (size - i - len(b)))
    return rows


def sylvester_resultant(p: Poly, q: Poly):
    """Determinant of the Sylvester matrix by exact Gaussian elimination.

    Slower than :func:`resultant`; used as an independent oracle in tests.
    """
    F = p.field
    rows = [list(r) for r in sylvester_matrix(p, q)]
    size = len(rows)
    det = F.one
    for col in range(size):
        pivot = None
        for r in range(col, size):
            if not F.is_zero(rows[r][col]):
                pivot = r
                break
        if pivot is None:
            return F.zero
        if pivot != col:
            rows[col], rows[pivot] = rows[pivot], rows[col]
            det = F.neg(det)
        pv = rows[col][col]
        det = F.mul(det, pv)
        inv = F.inv(pv)
        for r in range(col + 1, size):
            factor = F.mul(rows[r][col], inv)
            if F.is_zero(factor):
                continue
            for c in range(col, size):
                rows[r][c] = F.sub(rows[r][c], F.mul(factor, rows[col][c]))
    return det
