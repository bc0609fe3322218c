"""Two-variable series and integrable systems with poles on the axes.

Series live in K[[y1, y2]][1/(y1 y2)] with a total-degree precision: a
term y1^i y2^j is stored when i + j is below the cutoff and the pole
depths bound i and j from below.  Connections carry one matrix for each
logarithmic direction y_i d/dy_i, tied together by the curvature
identity.
"""

from fractions import Fraction
from typing import NamedTuple, Optional

from .errors import MeroconnError, NotIntegrableError, PrecisionError, UserInputError
from .fields import QQ, FunctionField
from .series import RamifiedSeries


def _pmin(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


class BiSeries:
    """Finite Laurent data in (y1, y2), truncated by total degree.

    All terms, stored or unknown, satisfy i >= -pole1 and j >= -pole2;
    unknown terms additionally have i + j >= prec (prec None = exact).
    """

    __slots__ = ("field", "coeffs", "prec", "pole1", "pole2")

    def __init__(self, field, coeffs, prec=None, pole1=0, pole2=0):
        self.field = field
        self.prec = None if prec is None else int(prec)
        clean = {}
        for (i, j), c in coeffs.items():
            i, j = int(i), int(j)
            if self.prec is not None and i + j >= self.prec:
                continue
            if field.is_zero(c):
                continue
            clean[(i, j)] = c
        self.coeffs = clean
        p1 = max((0, *(-i for i, _ in clean)))
        p2 = max((0, *(-j for _, j in clean)))
        self.pole1 = max(int(pole1), p1)
        self.pole2 = max(int(pole2), p2)

    @classmethod
    def zero(cls, field=QQ, prec=None):
        return cls(field, {}, prec)

    @classmethod
    def one(cls, field=QQ, prec=None):
        return cls(field, {(0, 0): field.one}, prec)

    @classmethod
    def term(cls, field, c, i, j, prec=None):
        return cls(field, {(int(i), int(j)): c}, prec)

    def is_visibly_zero(self) -> bool:
        return not self.coeffs

    def is_exact(self) -> bool:
        return self.prec is None

    def val_total(self):
        """Smallest total degree that can carry a nonzero term (None = +inf)."""
        if self.coeffs:
            return min(i + j for i, j in self.coeffs)
        return self.prec

    def constant_term(self):
        return self.coeffs.get((0, 0), self.field.zero)

    def _meta(self, other):
        if self.field != other.field:
            raise MeroconnError("series over different scalar fields")
        return max(self.pole1, other.pole1), max(self.pole2, other.pole2)

    def __add__(self, other):
        p1, p2 = self._meta(other)
        F = self.field
        out = dict(self.coeffs)
        for key, c in other.coeffs.items():
            cur = out.get(key)
            out[key] = c if cur is None else F.add(cur, c)
        return BiSeries(F, out, _pmin(self.prec, other.prec), p1, p2)

    def __neg__(self):
        F = self.field
        return BiSeries(
            F, {k: F.neg(c) for k, c in self.coeffs.items()}, self.prec, self.pole1, self.pole2
        )

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        p1, p2 = self._meta(other)
        F = self.field
        if self.prec is None and not self.coeffs:
            return BiSeries.zero(F)
        if other.prec is None and not other.coeffs:
            return BiSeries.zero(F)
        va, vb = self.val_total(), other.val_total()
        prec = _pmin(
            None if self.prec is None or vb is None else self.prec + vb,
            None if other.prec is None or va is None else other.prec + va,
        )
        out = {}
        for (i1, j1), c1 in self.coeffs.items():
            for (i2, j2), c2 in other.coeffs.items():
                key = (i1 + i2, j1 + j2)
                if prec is not None and key[0] + key[1] >= prec:
                    continue
                prod = F.mul(c1, c2)
                cur = out.get(key)
                out[key] = prod if cur is None else F.add(cur, prod)
        return BiSeries(F, out, prec, self.pole1 + other.pole1, self.pole2 + other.pole2)

    def scale(self, c):
        F = self.field
        return BiSeries(
            F, {k: F.mul(c, v) for k, v in self.coeffs.items()}, self.prec, self.pole1, self.pole2
        )

    def deriv1(self):
        """y1 d/dy1, term-by-term multiplication by i."""
        F = self.field
        out = {
            (i, j): F.mul(F.from_int(i), c) for (i, j), c in self.coeffs.items() if i
        }
        return BiSeries(F, out, self.prec, self.pole1, self.pole2)

    def deriv2(self):
        F = self.field
        out = {
            (i, j): F.mul(F.from_int(j), c) for (i, j), c in self.coeffs.items() if j
        }
        return BiSeries(F, out, self.prec, self.pole1, self.pole2)

    def truncate(self, prec):
        return BiSeries(
            self.field, self.coeffs, _pmin(self.prec, int(prec)), self.pole1, self.pole2
        )

    def substitute(self, chart: "BlowupChart"):
        """Monomial substitution y1 = u^a v^b, y2 = u^c v^d."""
        a, b, c, d = chart
        out = {(a * i + c * j, b * i + d * j): co for (i, j), co in self.coeffs.items()}
        p1 = a * self.pole1 + c * self.pole2
        p2 = b * self.pole1 + d * self.pole2
        prec = None
        if self.prec is not None:
            k, l, p = self.pole1, self.pole2, self.prec
            # the unknown region's corners (p+l, -l) and (-k, p+k) bound the
            # image total degree from below
            prec = min(
                (a + b) * (p + l) - (c + d) * l,
                -(a + b) * k + (c + d) * (p + k),
            )
        return BiSeries(self.field, out, prec, p1, p2)

    def restrict(self, y1: RamifiedSeries, y2: RamifiedSeries, out_prec=None) -> RamifiedSeries:
        """Compose with a parametrized arc s -> (y1(s), y2(s)).

        A coordinate may be the zero series only when this series has no
        pole along the matching axis.
        """
        F = self.field
        v1 = _arc_valuation(y1, self.pole1, "y1")
        v2 = _arc_valuation(y2, self.pole2, "y2")
        prec = None if out_prec is None else Fraction(out_prec)
        if self.prec is not None:
            k, l, p = self.pole1, self.pole2, self.prec
            if v1 is not None and v2 is not None:
                own = min(v1 * (p + l) - v2 * l, -v1 * k + v2 * (p + k))
            elif v1 is None and v2 is not None:
                own = v2 * p  # only i = 0 unknown terms survive y1 = 0
            elif v2 is None and v1 is not None:
                own = v1 * p
            elif p <= 0:
                raise PrecisionError(
                    "no constant term is known at this precision", available=Fraction(p)
                )
            else:
                own = None
            if own is not None:
                prec = own if prec is None else min(prec, own)
        if self.coeffs:
            lo1 = min(i for i, _ in self.coeffs)
            hi1 = max(i for i, _ in self.coeffs)
            lo2 = min(j for _, j in self.coeffs)
            hi2 = max(j for _, j in self.coeffs)
        else:
            lo1 = hi1 = lo2 = hi2 = 0
        pow1 = _power_table(y1, (lo1, hi1), prec)
        pow2 = _power_table(y2, (lo2, hi2), prec)
        acc = RamifiedSeries.zero(F, prec=prec)
        for (i, j), c in self.coeffs.items():
            acc = acc + (pow1[i] * pow2[j]).scale(c)
        if prec is not None:
            acc = acc.truncate(prec)
        return acc

    def __eq__(self, other):
        return (
            isinstance(other, BiSeries)
            and self.field == other.field
            and self.coeffs == other.coeffs
            and self.prec == other.prec
        )

    def __hash__(self):
        return hash((tuple(sorted(self.coeffs)), self.prec))

    def to_str(self, var1="y1", var2="y2") -> str:
        if not self.coeffs:
            return "0" if self.prec is None else f"O({self.prec})"
        bits = []
        for (i, j) in sorted(self.coeffs, key=lambda k: (k[0] + k[1], k)):
            c = self.coeffs[(i, j)]
            factors = []
            cs = self.field.to_str(c)
            if i:
                factors.append(f"{var1}^{i}" if i != 1 else var1)
            if j:
                factors.append(f"{var2}^{j}" if j != 1 else var2)
            if not factors or cs not in ("1", "-1"):
                factors.insert(0, f"({cs})" if any(op in cs for op in "+-/ ") and factors else cs)
            elif cs == "-1":
                factors[0] = "-" + factors[0]
            bits.append("*".join(factors))
        s = " + ".join(bits).replace("+ -", "- ")
        if self.prec is not None:
            s += f" + O({self.prec})"
        return s


def _arc_valuation(y: RamifiedSeries, pole: int, name: str):
    if y.is_exact_zero():
        if pole:
            raise UserInputError(f"the arc lies inside {name} = 0, a polar axis")
        return None
    return y.valuation()


def _power_table(y: RamifiedSeries, lo_hi, out_prec=None):
    lo, hi = lo_hi
    one = RamifiedSeries.one(y.field)
    if y.is_exact_zero():
        zero = RamifiedSeries.zero(y.field)
        return {k: (one if k == 0 else zero) for k in range(min(lo, 0), hi + 1)}
    table = {0: one}
    cur = one
    for k in range(1, max(hi, 0) + 1):
        cur = cur * y
        table[k] = cur
    if lo < 0:
        v, _ = y.leading()
        inv_prec = None
        if y.prec is None and len(y.coeffs) > 1:
            if out_prec is None:
                spread = max(y.coeffs) - v
                inv_prec = -v + (-lo) * (spread + 2) + 4
            else:
                inv_prec = out_prec + (-lo) * max(-v, v) + 4
        yin = y.invert(inv_prec if y.prec is None else None)
        cur = one
        for k in range(1, -lo + 1):
            cur = cur * yin
            table[-k] = cur
    return table


class BlowupChart(NamedTuple):
    """Monomial chart y1 = u^a v^b, y2 = u^c v^d with ad - bc = 1."""

    a: int
    b: int
    c: int
    d: int

    @classmethod
    def make(cls, a, b, c, d):
        a, b, c, d = int(a), int(b), int(c), int(d)
        if min(a, b, c, d) < 0:
            raise UserInputError("chart exponents must not be negative")
        if a * d - b * c != 1:
            raise UserInputError("chart is not unimodular")
        return cls(a, b, c, d)

    def compose(self, inner: "BlowupChart") -> "BlowupChart":
        """Chart of substituting ``inner`` after ``self``."""
        a, b, c, d = self
        e, f, g, h = inner
        return BlowupChart.make(a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h)


IDENTITY_CHART = BlowupChart(1, 0, 0, 1)
BLOWUP_CHART_1 = BlowupChart(1, 0, 1, 1)  # y1 = u, y2 = uv: E = {u = 0}
BLOWUP_CHART_2 = BlowupChart(1, 1, 0, 1)  # y1 = uv, y2 = v: E = {v = 0}


class BiMatrix:
    """Square matrix of bivariate series over one scalar field."""

    __slots__ = ("field", "rows")

    def __init__(self, field, rows):
        self.field = field
        norm = []
        for row in rows:
            r = []
            for s in row:
                if not isinstance(s, BiSeries):
                    raise MeroconnError("BiMatrix entries must be BiSeries")
                r.append(s)
            norm.append(tuple(r))
        self.rows = tuple(norm)
        n = len(self.rows)
        if any(len(r) != n for r in self.rows):
            raise UserInputError("connection matrices must be square")

    @classmethod
    def zeros(cls, field, n):
        z = BiSeries.zero(field)
        return cls(field, [[z] * n for _ in range(n)])

    @property
    def n(self):
        return len(self.rows)

    def entry(self, i, j) -> BiSeries:
        return self.rows[i][j]

    def map_entries(self, fn):
        return BiMatrix(self.field, [[fn(s) for s in row] for row in self.rows])

    def __add__(self, other):
        return BiMatrix(
            self.field,
            [[a + b for a, b in zip(r1, r2)] for r1, r2 in zip(self.rows, other.rows)],
        )

    def __sub__(self, other):
        return BiMatrix(
            self.field,
            [[a - b for a, b in zip(r1, r2)] for r1, r2 in zip(self.rows, other.rows)],
        )

    def __mul__(self, other):
        n = self.n
        out = []
        for i in range(n):
            row = []
            for j in range(n):
                acc = BiSeries.zero(self.field)
                for k in range(n):
                    acc = acc + self.rows[i][k] * other.rows[k][j]
                row.append(acc)
            out.append(row)
        return BiMatrix(self.field, out)

    def scale_int(self, k: int):
        if k == 0:
            return BiMatrix.zeros(self.field, self.n)
        c = self.field.from_int(k)
        return self.map_entries(lambda s: s.scale(c))

    def deriv1(self):
        return self.map_entries(lambda s: s.deriv1())

    def deriv2(self):
        return self.map_entries(lambda s: s.deriv2())

    def substitute(self, chart: BlowupChart):
        return self.map_entries(lambda s: s.substitute(chart))

    def is_visibly_zero(self) -> bool:
        return all(s.is_visibly_zero() for row in self.rows for s in row)


class BiConnection:
    """Integrable system: matrices for y1 d/dy1 and y2 d/dy2."""

    __slots__ = ("field", "psi1", "psi2")

    def __init__(self, field, psi1: BiMatrix, psi2: BiMatrix, require_integrable=False):
        if psi1.n != psi2.n:
            raise UserInputError("the two matrices must have equal size")
        self.field = field
        self.psi1 = psi1
        self.psi2 = psi2
        if require_integrable and not check_integrability(self):
            raise NotIntegrableError("curvature does not vanish up to precision")

    @property
    def rank(self) -> int:
        return self.psi1.n


def curvature(N: BiConnection) -> BiMatrix:
    """d1(Psi2) - d2(Psi1) + [Psi1, Psi2]; zero exactly when integrable."""
    return (
        N.psi2.deriv1()
        - N.psi1.deriv2()
        + N.psi1 * N.psi2
        - N.psi2 * N.psi1
    )


def check_integrability(N: BiConnection) -> bool:
    return curvature(N).is_visibly_zero()


def toric_pullback(N: BiConnection, chart: BlowupChart) -> BiConnection:
    """Pull back along y1 = u^a v^b, y2 = u^c v^d.

    The logarithmic fields transform contragradiently: the new first
    matrix is a*Psi1 + c*Psi2 after the substitution, the second is
    b*Psi1 + d*Psi2.
    """
    chart = BlowupChart.make(*chart)
    a, b, c, d = chart
    new1 = (N.psi1.scale_int(a) + N.psi2.scale_int(c)).substitute(chart)
    new2 = (N.psi1.scale_int(b) + N.psi2.scale_int(d)).substitute(chart)
    return BiConnection(N.field, new1, new2)


class PointBlowup(NamedTuple):
    """The two standard charts of blowing up the origin, with pullbacks."""

    chart1: BlowupChart
    chart2: BlowupChart
    pullback1: BiConnection
    pullback2: BiConnection


def blowup_point(N: BiConnection) -> PointBlowup:
    return PointBlowup(
        BLOWUP_CHART_1,
        BLOWUP_CHART_2,
        toric_pullback(N, BLOWUP_CHART_1),
        toric_pullback(N, BLOWUP_CHART_2),
    )


def axis_module(N: BiConnection, axis: int):
    """The one-variable module at the generic point of an axis.

    For axis 1 this is the y1-connection with coefficients rational in
    y2 (and symmetrically).  Needs exact entries: a truncated bivariate
    series leaves every coefficient uncertain.
    """
    from .diffmod import DiffModule
    from .series import SeriesMatrix

    if axis not in (1, 2):
        raise UserInputError("axis must be 1 or 2")
    mat = N.psi1 if axis == 1 else N.psi2
    other = "y2" if axis == 1 else "y1"
    var = "y1" if axis == 1 else "y2"
    Fo = FunctionField(QQ, other)
    gen = Fo.gen
    rows = []
    for row in mat.rows:
        r = []
        for s in row:
            if s.prec is not None:
                raise PrecisionError(
                    "the generic-point module along an axis needs exact entries",
                    available=Fraction(s.prec),
                )
            coeffs = {}
            for (i, j), c in s.coeffs.items():
                main = i if axis == 1 else j
                side = j if axis == 1 else i
                term = Fo.mul(Fo.coerce(c, N.field), _ff_power(Fo, gen, side))
                cur = coeffs.get(Fraction(main))
                coeffs[Fraction(main)] = term if cur is None else Fo.add(cur, term)
            r.append(RamifiedSeries(Fo, coeffs))
        rows.append(r)
    return DiffModule(Fo, SeriesMatrix(Fo, rows), var=var)


def _ff_power(F, gen, k: int):
    out = F.one
    base = gen if k >= 0 else F.inv(gen)
    for _ in range(abs(k)):
        out = F.mul(out, base)
    return out


def rank_along_axis(N: BiConnection, axis: int) -> Fraction:
    from .diffmod import katz_rank

    return katz_rank(axis_module(N, axis))


def irregularity_along_axis(N: BiConnection, axis: int) -> Fraction:
    from .diffmod import irregularity

    return irregularity(axis_module(N, axis))


def default_biprec(rank: int, rho1, rho2) -> int:
    """Default total-degree cutoff for bivariate inputs."""
    bump = -(-Fraction(rho1 + rho2) // 1)
    return int(2 * (rank * bump + 8))
