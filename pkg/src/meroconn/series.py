"""Truncated Laurent series in x**(1/e) and matrices of them.

A :class:`RamifiedSeries` stores only its nonzero coefficients, keyed by
rational exponents whose denominators divide the ramification index ``e``,
together with a precision bound: coefficients at exponents >= ``prec`` are
unknown.  ``prec is None`` means the series is exact (all unstored
coefficients are genuinely zero), which is how finite expressions like
``t/x`` stay lossless under differentiation and multiplication.  Precision
only becomes finite through inversion or explicit truncation, and every
operation reports the precision actually guaranteed by its inputs:

* sums keep the minimum of the input precisions;
* products of a (prec Na, valuation va) and b (prec Nb, valuation vb) are
  known below min(Na + vb, Nb + va);
* the inverse of a series of valuation v known to N is known to N - 2v.

The derivation ``theta = x d/dx`` acts exactly: it multiplies the
coefficient at exponent r by r.  Ramification refines the exponent lattice
(e -> e*m) and changes no values; the normalized (integer) valuation is
``e * valuation``.

Everything is immutable and pure.
"""

from __future__ import annotations

from fractions import Fraction
from math import lcm

from .errors import MeroconnError, PrecisionError


def pmin(a, b):
    """Minimum of two precisions where None means +infinity."""
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


def padd(p, v):
    """Precision shifted by a finite amount (None stays None)."""
    if p is None:
        return None
    return p + v


class RamifiedSeries:
    __slots__ = ("field", "e", "coeffs", "prec")

    def __init__(self, field, coeffs, e: int = 1, prec=None):
        self.field = field
        self.e = int(e)
        clean = {}
        for exp, c in coeffs.items():
            exp = Fraction(exp)
            if prec is not None and exp >= prec:
                continue
            if field.is_zero(c):
                continue
            if (exp * self.e).denominator != 1:
                raise MeroconnError(
                    f"exponent {exp} is not on the 1/{self.e} lattice"
                )
            clean[exp] = c
        self.coeffs = clean
        self.prec = None if prec is None else Fraction(prec)

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, field, e=1, prec=None):
        return cls(field, {}, e, prec)

    @classmethod
    def one(cls, field, e=1, prec=None):
        return cls(field, {Fraction(0): field.one}, e, prec)

    @classmethod
    def monomial(cls, field, coeff, exp, e=1, prec=None):
        return cls(field, {Fraction(exp): coeff}, e, prec)

    @classmethod
    def from_scalar(cls, field, c, e=1, prec=None):
        return cls(field, {Fraction(0): c}, e, prec)

    # -- basic queries -----------------------------------------------------

    def is_exact(self) -> bool:
        return self.prec is None

    def is_exact_zero(self) -> bool:
        return self.prec is None and not self.coeffs

    def val_lower_bound(self):
        """A certified lower bound for the valuation (None = +infinity)."""
        if self.coeffs:
            return min(self.coeffs)
        return self.prec  # exact zero -> None, i.e. +infinity

    def valuation(self):
        """The true valuation; PrecisionError if it is not visible."""
        if self.coeffs:
            return min(self.coeffs)
        if self.prec is None:
            return None  # exact zero: valuation +infinity
        raise PrecisionError(
            f"valuation not visible below O(x^{self.prec})", available=self.prec
        )

    def leading(self):
        v = self.valuation()
        if v is None:
            raise MeroconnError("the zero series has no leading coefficient")
        return v, self.coeffs[v]

    def coeff(self, exp):
        exp = Fraction(exp)
        if self.prec is not None and exp >= self.prec:
            raise PrecisionError(
                f"coefficient at x^{exp} unknown below O(x^{self.prec})",
                available=self.prec,
            )
        return self.coeffs.get(exp, self.field.zero)

    def support(self):
        return sorted(self.coeffs)

    # -- structure ---------------------------------------------------------

    def with_e(self, e: int):
        if e % self.e:
            raise MeroconnError(f"cannot coarsen lattice 1/{self.e} to 1/{e}")
        return RamifiedSeries(self.field, self.coeffs, e, self.prec)

    def ramify(self, m: int):
        """Refine the exponent lattice to x**(1/(e*m)); values unchanged."""
        if m < 1:
            raise MeroconnError("ramification index must be >= 1")
        return self.with_e(self.e * m)

    def map_field(self, target):
        src = self.field
        return RamifiedSeries(
            target,
            {exp: target.coerce(c, src) for exp, c in self.coeffs.items()},
            self.e,
            self.prec,
        )

    def map_coeffs(self, fn):
        return RamifiedSeries(
            self.field, {exp: fn(c) for exp, c in self.coeffs.items()}, self.e, self.prec
        )

    def truncate(self, prec):
        return RamifiedSeries(self.field, self.coeffs, self.e, pmin(self.prec, Fraction(prec)))

    # -- arithmetic ---------------------------------------------------------

    def _join(self, other):
        if self.field != other.field:
            raise MeroconnError("series over different scalar fields")
        return lcm(self.e, other.e)

    def __add__(self, other):
        e = self._join(other)
        F = self.field
        prec = pmin(self.prec, other.prec)
        out = dict(self.coeffs)
        for exp, c in other.coeffs.items():
            cur = out.get(exp)
            out[exp] = c if cur is None else F.add(cur, c)
        return RamifiedSeries(F, out, e, prec)

    def __neg__(self):
        return RamifiedSeries(
            self.field,
            {exp: self.field.neg(c) for exp, c in self.coeffs.items()},
            self.e,
            self.prec,
        )

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        e = self._join(other)
        F = self.field
        if self.is_exact_zero() or other.is_exact_zero():
            return RamifiedSeries.zero(F, e)
        # Neither operand is the exact zero, so both valuation bounds are finite.
        va = self.val_lower_bound()
        vb = other.val_lower_bound()
        prec = pmin(padd(self.prec, vb), padd(other.prec, va))
        out = {}
        for e1, c1 in self.coeffs.items():
            for e2, c2 in other.coeffs.items():
                exp = e1 + e2
                if prec is not None and exp >= prec:
                    continue
                prod = F.mul(c1, c2)
                cur = out.get(exp)
                out[exp] = prod if cur is None else F.add(cur, prod)
        return RamifiedSeries(F, out, e, prec)

    def scale(self, c):
        F = self.field
        return RamifiedSeries(
            F, {exp: F.mul(c, v) for exp, v in self.coeffs.items()}, self.e, self.prec
        )

    def shift(self, k):
        """Multiply by x**k."""
        k = Fraction(k)
        return RamifiedSeries(
            self.field,
            {exp + k: c for exp, c in self.coeffs.items()},
            self.e,
            padd(self.prec, k),
        )

    def invert(self, prec=None):
        """Multiplicative inverse, exact for monomials.

        A non-monomial exact series has an infinite inverse, so a target
        precision must come either from the series itself or the argument.
        """
        F = self.field
        if not self.coeffs:
            if self.prec is None:
                raise ZeroDivisionError("inverse of the zero series")
            raise PrecisionError(
                f"cannot invert: no leading term below O(x^{self.prec})",
                available=self.prec,
            )
        v = min(self.coeffs)
        lead = self.coeffs[v]
        if len(self.coeffs) == 1:
            out_prec = None if self.prec is None else self.prec - 2 * v
            out_prec = pmin(out_prec, None if prec is None else Fraction(prec))
            return RamifiedSeries(F, {-v: F.inv(lead)}, self.e, out_prec)
        if self.prec is None and prec is None:
            raise MeroconnError(
                "inverse of a non-monomial exact series needs a target precision"
            )
        own = None if self.prec is None else self.prec - 2 * v
        out_prec = pmin(own, None if prec is None else Fraction(prec))
        # u = self / (lead * x^v) - 1 has positive valuation; invert 1 + u.
        inv_lead = F.inv(lead)
        u = {}
        for exp, c in self.coeffs.items():
            if exp == v:
                continue
            u[exp - v] = F.mul(c, inv_lead)
        rel_prec = out_prec + v  # precision needed for (1+u)^{-1}
        acc = {Fraction(0): F.one}
        term = {Fraction(0): F.one}
        min_step = min(u) if u else None
        order = Fraction(0)
        while min_step is not None and order + min_step < rel_prec:
            new_term = {}
            for e1, c1 in term.items():
                for e2, c2 in u.items():
                    exp = e1 + e2
                    if exp >= rel_prec:
                        continue
                    prod = F.mul(c1, c2)
                    prod = F.neg(prod)
                    cur = new_term.get(exp)
                    new_term[exp] = prod if cur is None else F.add(cur, prod)
            term = new_term
            if not term:
                break
            for exp, c in term.items():
                cur = acc.get(exp)
                acc[exp] = c if cur is None else F.add(cur, c)
            order += min_step
        out = {}
        for exp, c in acc.items():
            c2 = F.mul(c, inv_lead)
            if not F.is_zero(c2):
                out[exp - v] = c2
        return RamifiedSeries(F, out, self.e, out_prec)

    def apply_theta(self):
        """x d/dx: multiplies the coefficient at exponent r by r."""
        F = self.field
        out = {}
        for exp, c in self.coeffs.items():
            if exp == 0:
                continue
            out[exp] = F.mul(c, F.from_fraction(exp))
        return RamifiedSeries(F, out, self.e, self.prec)

    def derive_coeffs(self, var, times_gen=True):
        """Coefficientwise derivation, e.g. t*d/dt when times_gen is set."""
        F = self.field
        out = {}
        for exp, c in self.coeffs.items():
            d = F.derive(c, var)
            if times_gen:
                d = F.mul(d, F.gen)
            out[exp] = d
        return RamifiedSeries(F, out, self.e, self.prec)

    # -- comparisons & output ------------------------------------------------

    def guaranteed_prec(self):
        return self.prec

    def agrees_with(self, other, below=None):
        """Equality of all coefficients below the joint guaranteed precision."""
        prec = pmin(pmin(self.prec, other.prec), below)
        F = self.field
        exps = set(self.coeffs) | set(other.coeffs)
        for exp in exps:
            if prec is not None and exp >= prec:
                continue
            a = self.coeffs.get(exp, F.zero)
            b = other.coeffs.get(exp, F.zero)
            if not F.eq(a, b):
                return False
        return True

    def eq_exact(self, other):
        return (
            self.prec is None
            and other.prec is None
            and self.agrees_with(other)
        )

    def to_str(self, var: str = "x") -> str:
        F = self.field
        if not self.coeffs:
            return "0" if self.prec is None else f"O({var}^{self.prec})"
        parts = []
        for exp in sorted(self.coeffs):
            c = F.to_str(self.coeffs[exp])
            if exp == 0:
                term = c if not _needs_parens(c) else f"({c})"
            else:
                xs = var if exp == 1 else (
                    f"{var}^{exp}" if exp.denominator == 1 else f"{var}^({exp})"
                )
                if c == "1":
                    term = xs
                elif c == "-1":
                    term = f"-{xs}"
                else:
                    term = f"({c})*{xs}" if _needs_parens(c) else f"{c}*{xs}"
            parts.append(term)
        out = parts[0]
        for term in parts[1:]:
            out += " - " + term[1:] if term.startswith("-") else " + " + term
        if self.prec is not None:
            p = self.prec if self.prec.denominator == 1 else f"({self.prec})"
            out += f" + O({var}^{p})"
        return out

    def __repr__(self):
        return f"Series<{self.to_str()}>"


def _needs_parens(s: str) -> bool:
    return any(op in s[1:] for op in "+-") or "/" in s or "*" in s


class SeriesMatrix:
    """Immutable matrix of ramified series over one field and lattice."""

    __slots__ = ("field", "e", "rows")

    def __init__(self, field, rows, e: int = 1):
        self.field = field
        self.e = e
        norm = []
        width = None
        for row in rows:
            r = []
            for s in row:
                if not isinstance(s, RamifiedSeries):
                    raise MeroconnError("SeriesMatrix entries must be RamifiedSeries")
                r.append(s.with_e(e) if s.e != e else s)
            if width is None:
                width = len(r)
            elif width != len(r):
                raise MeroconnError("ragged matrix")
            norm.append(tuple(r))
        self.rows = tuple(norm)

    # -- constructors --------------------------------------------------------

    @classmethod
    def identity(cls, field, n, e=1, prec=None):
        one = RamifiedSeries.one(field, e, prec)
        zero = RamifiedSeries.zero(field, e, prec)
        return cls(field, [[one if i == j else zero for j in range(n)] for i in range(n)], e)

    @classmethod
    def zeros(cls, field, n, m=None, e=1, prec=None):
        m = n if m is None else m
        zero = RamifiedSeries.zero(field, e, prec)
        return cls(field, [[zero for _ in range(m)] for _ in range(n)], e)

    @classmethod
    def from_scalars(cls, field, scalar_rows, e=1, prec=None):
        return cls(
            field,
            [
                [RamifiedSeries.from_scalar(field, c, e, prec) for c in row]
                for row in scalar_rows
            ],
            e,
        )

    # -- queries --------------------------------------------------------------

    @property
    def nrows(self):
        return len(self.rows)

    @property
    def ncols(self):
        return len(self.rows[0]) if self.rows else 0

    def entry(self, i, j):
        return self.rows[i][j]

    def min_prec(self):
        p = None
        for row in self.rows:
            for s in row:
                p = pmin(p, s.prec)
        return p

    def val_lower_bound(self):
        v = None
        for row in self.rows:
            for s in row:
                lv = s.val_lower_bound()
                if lv is not None:
                    v = lv if v is None else min(v, lv)
        return v

    def is_integral(self):
        """All entries have valuation >= 0 (certified)."""
        for row in self.rows:
            for s in row:
                lv = s.val_lower_bound()
                if lv is not None and lv < 0:
                    return False
        return True

    def constant_matrix(self):
        """Coefficients at x^0 as raw field elements (entries must be integral)."""
        F = self.field
        out = []
        for row in self.rows:
            r = []
            for s in row:
                lv = s.val_lower_bound()
                if lv is not None and lv < 0:
                    raise MeroconnError("matrix has a pole; no constant reduction")
                r.append(s.coeffs.get(Fraction(0), F.zero))
            out.append(r)
        return out

    # -- structure -------------------------------------------------------------

    def with_e(self, e):
        return SeriesMatrix(self.field, self.rows, e)

    def ramify(self, m):
        return SeriesMatrix(self.field, self.rows, self.e * m)

    def map_field(self, target):
        return SeriesMatrix(
            target, [[s.map_field(target) for s in row] for row in self.rows], self.e
        )

    def map_entries(self, fn):
        return SeriesMatrix(self.field, [[fn(s) for s in row] for row in self.rows], self.e)

    def truncate(self, prec):
        return self.map_entries(lambda s: s.truncate(prec))

    def transpose(self):
        return SeriesMatrix(
            self.field,
            [[self.rows[i][j] for i in range(self.nrows)] for j in range(self.ncols)],
            self.e,
        )

    def submatrix(self, row_idx, col_idx):
        return SeriesMatrix(
            self.field, [[self.rows[i][j] for j in col_idx] for i in row_idx], self.e
        )

    # -- arithmetic --------------------------------------------------------------

    def __add__(self, other):
        e = lcm(self.e, other.e)
        return SeriesMatrix(
            self.field,
            [
                [a + b for a, b in zip(r1, r2)]
                for r1, r2 in zip(self.rows, other.rows)
            ],
            e,
        )

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return self.map_entries(lambda s: -s)

    def __mul__(self, other):
        if isinstance(other, RamifiedSeries):
            return self.map_entries(lambda s: s * other)
        e = lcm(self.e, other.e)
        if self.ncols != other.nrows:
            raise MeroconnError("matrix shapes do not match")
        out = []
        for i in range(self.nrows):
            row = []
            for j in range(other.ncols):
                acc = RamifiedSeries.zero(self.field, e)
                for k in range(self.ncols):
                    acc = acc + self.rows[i][k] * other.rows[k][j]
                row.append(acc)
            out.append(row)
        return SeriesMatrix(self.field, out, e)

    def scale_series(self, s: RamifiedSeries):
        return self.map_entries(lambda a: a * s)

    def theta(self):
        return self.map_entries(lambda s: s.apply_theta())

    def derive_coeffs(self, var, times_gen=True):
        return self.map_entries(lambda s: s.derive_coeffs(var, times_gen))

    def kron(self, other):
        """Kronecker product."""
        e = lcm(self.e, other.e)
        out = []
        for i in range(self.nrows):
            for k in range(other.nrows):
                row = []
                for j in range(self.ncols):
                    for l in range(other.ncols):
                        row.append(self.rows[i][j] * other.rows[k][l])
                out.append(row)
        return SeriesMatrix(self.field, out, e)

    def block_diag(self, other):
        e = lcm(self.e, other.e)
        n1, n2 = self.nrows, other.nrows
        zero = RamifiedSeries.zero(self.field, e)
        out = []
        for i in range(n1):
            out.append(list(self.rows[i]) + [zero] * n2)
        for i in range(n2):
            out.append([zero] * n1 + list(other.rows[i]))
        return SeriesMatrix(self.field, out, e)

    # -- linear algebra -------------------------------------------------------

    def _pivot(self, rows, col, start, wprec):
        best = None
        best_val = None
        for r in range(start, len(rows)):
            s = rows[r][col]
            if s.coeffs:
                v = min(s.coeffs)
                if best_val is None or v < best_val:
                    best, best_val = r, v
        if best is None:
            for r in range(start, len(rows)):
                if rows[r][col].prec is not None:
                    raise PrecisionError(
                        "pivot not visible at working precision", available=wprec
                    )
        return best

    def solve(self, rhs: "SeriesMatrix", wprec):
        """Solve self * X = rhs by valuation-pivoted elimination at wprec."""
        if self.nrows != self.ncols:
            raise MeroconnError("solve needs a square matrix")
        n = self.nrows
        e = lcm(self.e, rhs.e)
        A = [[self.rows[i][j].truncate(wprec).with_e(e) for j in range(n)] for i in range(n)]
        B = [
            [rhs.rows[i][j].truncate(wprec).with_e(e) for j in range(rhs.ncols)]
            for i in range(n)
        ]
        perm = list(range(n))
        for col in range(n):
            piv = self._pivot(A, col, col, wprec)
            if piv is None:
                raise MeroconnError("singular matrix in series solve")
            if piv != col:
                A[col], A[piv] = A[piv], A[col]
                B[col], B[piv] = B[piv], B[col]
                perm[col], perm[piv] = perm[piv], perm[col]
            inv = A[col][col].invert(wprec)
            for r in range(col + 1, n):
                f = A[r][col] * inv
                if f.is_exact_zero():
                    continue
                for c in range(col, n):
                    A[r][c] = A[r][c] - f * A[col][c]
                for c in range(len(B[0])):
                    B[r][c] = B[r][c] - f * B[col][c]
        for col in range(n - 1, -1, -1):
            inv = A[col][col].invert(wprec)
            for c in range(len(B[0])):
                acc = B[col][c]
                for k in range(col + 1, n):
                    acc = acc - A[col][k] * B[k][c]
                B[col][c] = acc * inv
        return SeriesMatrix(self.field, B, e)

    def inverse(self, wprec):
        return self.solve(SeriesMatrix.identity(self.field, self.nrows, self.e), wprec)

    def det(self, wprec=None):
        """Determinant; exact when entries are exact and no pivoting divides."""
        n = self.nrows
        if n != self.ncols:
            raise MeroconnError("determinant needs a square matrix")
        if n == 1:
            return self.rows[0][0]
        if n == 2:
            return self.rows[0][0] * self.rows[1][1] - self.rows[0][1] * self.rows[1][0]
        if n == 3 or (self.min_prec() is None and n <= 5):
            return self._det_laplace()
        if wprec is None:
            wprec = self.min_prec()
            if wprec is None:
                return self._det_laplace()
        return self._det_gauss(wprec)

    def _det_laplace(self):
        n = self.nrows
        if n == 1:
            return self.rows[0][0]
        acc = RamifiedSeries.zero(self.field, self.e)
        cols = list(range(1, n))
        for i in range(n):
            minor = self.submatrix([r for r in range(n) if r != i], cols)
            term = self.rows[i][0] * minor._det_laplace()
            acc = acc + term if i % 2 == 0 else acc - term
        return acc

    def _det_gauss(self, wprec):
        n = self.nrows
        A = [[self.rows[i][j].truncate(wprec) for j in range(n)] for i in range(n)]
        det = RamifiedSeries.one(self.field, self.e)
        sign = 1
        for col in range(n):
            piv = self._pivot(A, col, col, wprec)
            if piv is None:
                return RamifiedSeries.zero(self.field, self.e, wprec)
            if piv != col:
                A[col], A[piv] = A[piv], A[col]
                sign = -sign
            det = det * A[col][col]
            inv = A[col][col].invert(wprec)
            for r in range(col + 1, n):
                f = A[r][col] * inv
                if f.is_exact_zero():
                    continue
                for c in range(col, n):
                    A[r][c] = A[r][c] - f * A[col][c]
        return det if sign == 1 else -det

    def agrees_with(self, other, below=None):
        for r1, r2 in zip(self.rows, other.rows):
            for a, b in zip(r1, r2):
                if not a.agrees_with(b, below):
                    return False
        return True

    def to_str_rows(self, var="x"):
        return [[s.to_str(var) for s in row] for row in self.rows]

    def __repr__(self):
        return f"SeriesMatrix({self.nrows}x{self.ncols}, e={self.e})"
