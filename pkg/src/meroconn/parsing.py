"""Text format for connection inputs, and its serializer.

A document is line oriented and UTF-8; ``#`` starts a comment.  Header
directives come first:

    rank = 2
    var = x                  series variable (default x)
    param = t                family parameter (default t)
    precision = exact | N    default working precision for analyses
    extension r: r^2 - 2     named algebraic point, usable where a
                             parameter value is expected

followed by one payload: a one-variable family

    matrix = [["t*x^-1", "-1"], ["0", "0"]]

or a two-variable system in the fixed variables y1, y2

    matrix1 = [["y2*y1^-1"]]
    matrix2 = [["-y2*y1^-1"]]

plus, for two-variable documents or on their own, curve germs in the
fixed arc parameter s:

    curve diag: (s, s)

Entries are arithmetic over integer literals and the declared names
with ``+ - * / ^`` and parentheses.  Exponents are integer literals or
parenthesized rationals (``x^-1``, ``x^(3/2)``); a term ``O(x^8)``
(``O(8)`` in two variables, bounding total degree) truncates the
precision of its sum.  Division is by single terms only; everything
stays exact.
"""

import hashlib
import json
import re
from fractions import Fraction
from math import lcm
from typing import NamedTuple, Optional

from .bivariate import BiConnection, BiMatrix, BiSeries
from .diffmod import DiffModule
from .errors import UserInputError
from .factorization import irreducible_factors
from .fields import QQ, ExtensionField, FunctionField, format_poly
from .geometry import CurveGerm
from .parametric import ParametricModule
from .polynomials import Poly
from .series import RamifiedSeries, SeriesMatrix


def input_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# -- expression parsing ----------------------------------------------------------


class _Token(NamedTuple):
    kind: str  # "num" | "name" | "op" | "end"
    text: str
    col: int


_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")
_NUM_RE = re.compile(r"[0-9]+")


def _tokenize(s: str, line) -> list:
    toks = []
    i = 0
    while i < len(s):
        ch = s[i]
        if ch in " \t":
            i += 1
            continue
        if ch.isdigit():
            m = _NUM_RE.match(s, i)
            toks.append(_Token("num", m.group(), i))
            i = m.end()
            continue
        m = _NAME_RE.match(s, i)
        if m:
            toks.append(_Token("name", m.group(), i))
            i = m.end()
            continue
        if ch in "+-*/^(),":
            toks.append(_Token("op", ch, i))
            i += 1
            continue
        raise UserInputError(f"unexpected character {ch!r}", line=line, col=i + 1)
    toks.append(_Token("end", "", len(s)))
    return toks


class _ExprParser:
    """Recursive descent over one entry, evaluating into ``domain`` values."""

    def __init__(self, text: str, domain, line=None):
        self.text = text
        self.dom = domain
        self.line = line
        self.toks = _tokenize(text, line)
        self.i = 0

    def fail(self, msg, tok=None):
        tok = tok if tok is not None else self.peek()
        raise UserInputError(
            f"{msg} in {self.text!r}", line=self.line, col=tok.col + 1
        )

    def peek(self) -> _Token:
        return self.toks[self.i]

    def take(self) -> _Token:
        tok = self.toks[self.i]
        if tok.kind != "end":
            self.i += 1
        return tok

    def accept(self, text: str) -> bool:
        tok = self.peek()
        if tok.kind == "op" and tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str):
        if not self.accept(text):
            self.fail(f"expected {text!r}")

    def parse(self):
        value = self.sum_()
        if self.peek().kind != "end":
            self.fail("unexpected trailing input")
        return value

    def sum_(self):
        value = self.product()
        while True:
            if self.accept("+"):
                value = self.dom.add(value, self.product())
            elif self.accept("-"):
                value = self.dom.sub(value, self.product())
            else:
                return value

    def product(self):
        value = self.unary()
        while True:
            if self.accept("*"):
                value = self.dom.mul(value, self.unary())
            elif self.accept("/"):
                tok = self.peek()
                value = self.dom.div(value, self.unary(), self, tok)
            else:
                return value

    def unary(self):
        if self.accept("-"):
            return self.dom.neg(self.unary())
        if self.accept("+"):
            return self.unary()
        return self.power()

    def power(self):
        tok = self.peek()
        value = self.atom()
        if self.accept("^"):
            exp = self.literal_exponent()
            value = self.dom.pow(value, exp, self, tok)
        return value

    def literal_exponent(self) -> Fraction:
        neg = self.accept("-")
        tok = self.peek()
        if tok.kind == "num":
            self.take()
            value = Fraction(int(tok.text))
        elif not neg and tok.kind == "op" and tok.text == "(":
            self.take()
            inner_neg = self.accept("-")
            num = self.take()
            if num.kind != "num":
                self.fail("malformed exponent", num)
            value = Fraction(int(num.text))
            if self.accept("/"):
                den = self.take()
                if den.kind != "num" or int(den.text) == 0:
                    self.fail("malformed exponent", den)
                value /= int(den.text)
            self.expect(")")
            if inner_neg:
                value = -value
        else:
            self.fail("malformed exponent", tok)
        return -value if neg else value

    def atom(self):
        tok = self.take()
        if tok.kind == "num":
            return self.dom.number(Fraction(int(tok.text)))
        if tok.kind == "name":
            nxt = self.peek()
            if tok.text == "O" and nxt.kind == "op" and nxt.text == "(":
                return self.big_o(tok)
            return self.dom.name(tok.text, self, tok)
        if tok.kind == "op" and tok.text == "(":
            value = self.sum_()
            self.expect(")")
            return value
        self.fail("expected a value", tok)

    def big_o(self, o_tok):
        self.expect("(")
        tok = self.take()
        if tok.kind == "num":
            exp = Fraction(int(tok.text))
            if self.accept("/"):
                den = self.take()
                if den.kind != "num" or int(den.text) == 0:
                    self.fail("malformed precision marker", den)
                exp /= int(den.text)
            self.expect(")")
            return self.dom.big_o(None, exp, self, tok)
        if tok.kind == "name":
            exp = self.literal_exponent() if self.accept("^") else Fraction(1)
            self.expect(")")
            return self.dom.big_o(tok.text, exp, self, tok)
        self.fail("malformed precision marker", tok)


_POW_CAP = 200


def _binary_power(one, base, k: int, mul):
    out = one
    while k:
        if k & 1:
            out = mul(out, base)
        k >>= 1
        if k:
            base = mul(base, base)
    return out


class _SeriesDomain:
    """Entries as ramified series over a coefficient field.

    ``scalars`` maps extra names (the family parameter) to coefficient
    field elements.
    """

    def __init__(self, field, var: str, scalars=None):
        self.field = field
        self.var = var
        self.scalars = scalars or {}

    def number(self, q: Fraction):
        return RamifiedSeries.from_scalar(self.field, self.field.from_fraction(q))

    def name(self, text, p, tok):
        if text == self.var:
            return RamifiedSeries.monomial(self.field, self.field.one, Fraction(1))
        c = self.scalars.get(text)
        if c is None:
            p.fail(f"unknown name {text!r}", tok)
        return RamifiedSeries.from_scalar(self.field, c)

    def add(self, a, b):
        return a + b

    def sub(self, a, b):
        return a - b

    def neg(self, a):
        return -a

    def mul(self, a, b):
        return a * b

    def div(self, a, b, p, tok):
        if len(b.coeffs) != 1 or b.prec is not None:
            p.fail("division is only by single exact terms", tok)
        return a * b.invert()

    def pow(self, a, exp: Fraction, p, tok):
        if exp.denominator != 1:
            if (
                len(a.coeffs) == 1
                and a.prec is None
                and self.field.eq(next(iter(a.coeffs.values())), self.field.one)
            ):
                w = next(iter(a.coeffs)) * exp
                return RamifiedSeries.monomial(
                    self.field, self.field.one, w, e=w.denominator
                )
            p.fail("fractional powers apply to bare variable monomials", tok)
        k = int(exp)
        if k < 0:
            if len(a.coeffs) != 1 or a.prec is not None:
                p.fail("negative powers apply to single exact terms", tok)
            a = a.invert()
            k = -k
        if k > _POW_CAP:
            p.fail(f"exponent exceeds the cap of {_POW_CAP}", tok)
        return _binary_power(RamifiedSeries.one(self.field), a, k, lambda x, y: x * y)

    def big_o(self, var, exp: Fraction, p, tok):
        if var is not None and var != self.var:
            p.fail(f"precision marker must use the series variable {self.var!r}", tok)
        return RamifiedSeries.zero(self.field, exp.denominator, exp)


class _BiDomain:
    """Entries as exact two-variable series over the rationals."""

    names = {"y1": (1, 0), "y2": (0, 1)}

    def number(self, q: Fraction):
        return BiSeries(QQ, {(0, 0): QQ.from_fraction(q)})

    def name(self, text, p, tok):
        key = self.names.get(text)
        if key is None:
            p.fail(f"unknown name {text!r}", tok)
        return BiSeries.term(QQ, QQ.one, *key)

    def add(self, a, b):
        return a + b

    def sub(self, a, b):
        return a - b

    def neg(self, a):
        return -a

    def mul(self, a, b):
        return a * b

    def div(self, a, b, p, tok):
        if len(b.coeffs) != 1 or b.prec is not None:
            p.fail("division is only by single exact terms", tok)
        (i, j), c = next(iter(b.coeffs.items()))
        return a * BiSeries(QQ, {(-i, -j): QQ.inv(c)})

    def pow(self, a, exp: Fraction, p, tok):
        if exp.denominator != 1:
            p.fail("two-variable entries use integer exponents", tok)
        k = int(exp)
        if k < 0:
            if len(a.coeffs) != 1 or a.prec is not None:
                p.fail("negative powers apply to single exact terms", tok)
            (i, j), c = next(iter(a.coeffs.items()))
            a = BiSeries(QQ, {(-i, -j): QQ.inv(c)})
            k = -k
        if k > _POW_CAP:
            p.fail(f"exponent exceeds the cap of {_POW_CAP}", tok)
        return _binary_power(BiSeries.one(QQ), a, k, lambda x, y: x * y)

    def big_o(self, var, exp: Fraction, p, tok):
        if var is not None:
            p.fail("two-variable precision markers bound total degree: O(n)", tok)
        if exp.denominator != 1 or exp < 0:
            p.fail("malformed precision marker", tok)
        return BiSeries(QQ, {}, int(exp))


def parse_entry(text: str, domain, line=None):
    return _ExprParser(text, domain, line).parse()


# -- document structure ----------------------------------------------------------


class ParsedDocument(NamedTuple):
    kind: str  # "family" | "bivariate" | "curves"
    family: Optional[ParametricModule]
    connection: Optional[BiConnection]
    curves: dict  # name -> CurveGerm, insertion ordered
    precision: Optional[int]  # None = exact
    extensions: dict  # name -> ExtensionField
    rank: Optional[int]
    var: str
    param: str

    def primary(self):
        if self.kind == "family":
            return self.family
        if self.kind == "bivariate":
            return self.connection
        return self.curves


_HEADER_RE = re.compile(r"(rank|var|param|precision)\s*=\s*(.+)$")
_MATRIX_RE = re.compile(r"(matrix[12]?)\s*=\s*(.*)$")
_EXTENSION_RE = re.compile(r"extension\s+([A-Za-z_][A-Za-z_0-9]*)\s*:\s*(.+)$")
_CURVE_RE = re.compile(r"curve\s+([A-Za-z_][A-Za-z_0-9]*)\s*:\s*(.+)$")

_RESERVED = {"O", "s", "y1", "y2"}


def _strip_comment(line: str) -> str:
    cut = line.find("#")
    return line if cut < 0 else line[:cut]


def _capture_brackets(lines, i, start: str, line_no: int):
    """Text from the first '[' through its balanced ']', possibly multiline."""
    buf = start
    depth = buf.count("[") - buf.count("]")
    if "[" not in buf or depth < 0:
        raise UserInputError("expected a bracketed matrix", line=line_no, col=1)
    while depth > 0:
        i += 1
        if i >= len(lines):
            raise UserInputError("unterminated matrix", line=line_no, col=1)
        piece = _strip_comment(lines[i])
        buf += " " + piece.strip()
        depth += piece.count("[") - piece.count("]")
    if depth < 0:
        raise UserInputError("unbalanced brackets in matrix", line=line_no, col=1)
    return buf, i


def _load_matrix_literal(text: str, line_no: int):
    try:
        rows = json.loads(text)
    except json.JSONDecodeError as err:
        raise UserInputError(
            f"matrix must be a JSON-style nested list of quoted entries ({err.msg})",
            line=line_no,
            col=err.colno,
        ) from None
    if (
        not isinstance(rows, list)
        or not rows
        or not all(isinstance(r, list) and r for r in rows)
        or not all(isinstance(cell, str) for r in rows for cell in r)
    ):
        raise UserInputError(
            "matrix must be a non-empty list of lists of entry strings",
            line=line_no,
            col=1,
        )
    if any(len(r) != len(rows) for r in rows):
        raise UserInputError("matrix must be square", line=line_no, col=1)
    return rows


def _split_curve_body(body: str, line_no: int):
    body = body.strip()
    if not body.startswith("(") or not body.endswith(")"):
        raise UserInputError(
            "a curve is a parenthesized pair: (series, series)", line=line_no, col=1
        )
    inner = body[1:-1]
    depth = 0
    for k, ch in enumerate(inner):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            return inner[:k], inner[k + 1 :]
    raise UserInputError(
        "a curve needs two comma-separated coordinates", line=line_no, col=1
    )


def _parse_name_value(header, key, value, line_no):
    if key in header:
        raise UserInputError(f"duplicate {key} directive", line=line_no, col=1)
    value = value.strip()
    if key == "rank":
        if not value.isdigit() or int(value) < 1:
            raise UserInputError("rank must be a positive integer", line=line_no, col=1)
        header[key] = int(value)
    elif key == "precision":
        if value == "exact":
            header[key] = None
        elif value.isdigit() and int(value) >= 1:
            header[key] = int(value)
        else:
            raise UserInputError(
                "precision must be 'exact' or a positive integer", line=line_no, col=1
            )
    else:
        if not _NAME_RE.fullmatch(value) or value in _RESERVED:
            raise UserInputError(
                f"{key} must be an unreserved identifier", line=line_no, col=1
            )
        header[key] = value


def _extension_from_expr(name: str, expr: str, line_no: int) -> ExtensionField:
    series = parse_entry(expr, _SeriesDomain(QQ, name), line_no)
    if series.prec is not None:
        raise UserInputError(
            "a minimal polynomial must be exact", line=line_no, col=1
        )
    if any(e.denominator != 1 or e < 0 for e in series.coeffs):
        raise UserInputError(
            "a minimal polynomial has non-negative integer exponents",
            line=line_no,
            col=1,
        )
    top = max((int(e) for e in series.coeffs), default=0)
    if top < 1:
        raise UserInputError(
            "a minimal polynomial has degree at least one", line=line_no, col=1
        )
    coeffs = [QQ.zero] * (top + 1)
    for e, c in series.coeffs.items():
        coeffs[int(e)] = c
    factors = irreducible_factors(Poly(QQ, coeffs))
    if len(factors) != 1 or factors[0][1] != 1:
        raise UserInputError(
            f"the minimal polynomial of {name} must be irreducible",
            line=line_no,
            col=1,
        )
    return ExtensionField(QQ, name, tuple(coeffs))


def parse_document(text: str, require_integrable: bool = True) -> ParsedDocument:
    lines = text.splitlines()
    header = {}
    matrices = {}
    extensions = {}
    curve_bodies = []
    i = 0
    while i < len(lines):
        line_no = i + 1
        stripped = _strip_comment(lines[i]).strip()
        if not stripped:
            i += 1
            continue
        m = _HEADER_RE.match(stripped)
        if m:
            _parse_name_value(header, m.group(1), m.group(2), line_no)
            i += 1
            continue
        m = _MATRIX_RE.match(stripped)
        if m:
            key = m.group(1)
            if key in matrices:
                raise UserInputError(f"duplicate {key} block", line=line_no, col=1)
            buf, i = _capture_brackets(lines, i, m.group(2).strip(), line_no)
            matrices[key] = (buf, line_no)
            i += 1
            continue
        m = _EXTENSION_RE.match(stripped)
        if m:
            name = m.group(1)
            if name in extensions or name in _RESERVED:
                raise UserInputError(
                    f"extension name {name!r} is taken", line=line_no, col=1
                )
            extensions[name] = _extension_from_expr(name, m.group(2), line_no)
            i += 1
            continue
        m = _CURVE_RE.match(stripped)
        if m:
            curve_bodies.append((m.group(1), m.group(2), line_no))
            i += 1
            continue
        raise UserInputError(
            f"unrecognized directive {stripped.split()[0]!r}", line=line_no, col=1
        )

    rank = header.get("rank")
    var = header.get("var", "x")
    param = header.get("param", "t")
    precision = header.get("precision")
    if var == param:
        raise UserInputError("var and param must differ", line=1, col=1)
    if {var, param} & set(extensions):
        raise UserInputError("extension names must not shadow var or param", line=1, col=1)

    curves = {}
    for name, body, line_no in curve_bodies:
        if name in curves:
            raise UserInputError(f"duplicate curve {name!r}", line=line_no, col=1)
        left, right = _split_curve_body(body, line_no)
        dom = _SeriesDomain(QQ, "s")
        y1 = parse_entry(left.strip(), dom, line_no)
        y2 = parse_entry(right.strip(), dom, line_no)
        try:
            curves[name] = CurveGerm(y1, y2)
        except UserInputError as err:
            raise UserInputError(str(err), line=line_no, col=1) from None

    if "matrix" in matrices and ("matrix1" in matrices or "matrix2" in matrices):
        raise UserInputError(
            "a document holds either one family matrix or a two-variable pair",
            line=1,
            col=1,
        )

    if "matrix" in matrices:
        if curves:
            raise UserInputError(
                "curve blocks accompany two-variable systems", line=1, col=1
            )
        buf, line_no = matrices["matrix"]
        rows_text = _load_matrix_literal(buf, line_no)
        if rank is not None and rank != len(rows_text):
            raise UserInputError(
                f"declared rank {rank} but the matrix has {len(rows_text)} rows",
                line=line_no,
                col=1,
            )
        Ft = FunctionField(QQ, param)
        dom = _SeriesDomain(Ft, var, {param: Ft.gen})
        rows = [[parse_entry(cell, dom, line_no) for cell in r] for r in rows_text]
        e = 1
        for row in rows:
            for s in row:
                e = lcm(e, s.e)
        module = DiffModule(Ft, SeriesMatrix(Ft, rows, e), var)
        family = ParametricModule(module)
        return ParsedDocument(
            "family", family, None, {}, precision, extensions, len(rows_text), var, param
        )

    if "matrix1" in matrices or "matrix2" in matrices:
        if not ("matrix1" in matrices and "matrix2" in matrices):
            raise UserInputError(
                "a two-variable system needs both matrix1 and matrix2", line=1, col=1
            )
        parsed = {}
        for key in ("matrix1", "matrix2"):
            buf, line_no = matrices[key]
            rows_text = _load_matrix_literal(buf, line_no)
            if rank is not None and rank != len(rows_text):
                raise UserInputError(
                    f"declared rank {rank} but {key} has {len(rows_text)} rows",
                    line=line_no,
                    col=1,
                )
            dom = _BiDomain()
            parsed[key] = BiMatrix(
                QQ, [[parse_entry(cell, dom, line_no) for cell in r] for r in rows_text]
            )
        connection = BiConnection(
            QQ, parsed["matrix1"], parsed["matrix2"], require_integrable=require_integrable
        )
        return ParsedDocument(
            "bivariate",
            None,
            connection,
            curves,
            precision,
            extensions,
            connection.rank,
            var,
            param,
        )

    if curves:
        return ParsedDocument(
            "curves", None, None, curves, precision, extensions, rank, var, param
        )
    raise UserInputError("the document declares no matrix and no curves", line=1, col=1)


def parse_input(text: str):
    """The document's payload: a family, a two-variable system, or curves."""
    return parse_document(text).primary()


# -- serialization ---------------------------------------------------------------


def _json_matrix(rows) -> str:
    return json.dumps(rows, separators=(", ", ": "))


def _family_lines(pm: ParametricModule) -> list:
    lines = [
        f"rank = {pm.rank}",
        f"var = {pm.module.var}",
        f"param = {pm.param}",
    ]
    rows = pm.module.matrix.to_str_rows(pm.module.var)
    lines.append(f"matrix = {_json_matrix(rows)}")
    return lines


def _bivariate_lines(N: BiConnection) -> list:
    lines = [f"rank = {N.rank}"]
    for key, M in (("matrix1", N.psi1), ("matrix2", N.psi2)):
        rows = [[M.entry(i, j).to_str() for j in range(N.rank)] for i in range(N.rank)]
        lines.append(f"{key} = {_json_matrix(rows)}")
    return lines


def _curve_lines(curves: dict) -> list:
    return [
        f"curve {name}: ({germ.y1.to_str('s')}, {germ.y2.to_str('s')})"
        for name, germ in curves.items()
    ]


def serialize(obj) -> str:
    """Canonical document text; parsing it back yields an equal object."""
    if isinstance(obj, ParsedDocument):
        lines = []
        if obj.precision is not None:
            lines.append(f"precision = {obj.precision}")
        for name, ext in obj.extensions.items():
            lines.append(f"extension {name}: {format_poly(QQ, ext.minpoly, name)}")
        if obj.kind == "family":
            lines += _family_lines(obj.family)
        elif obj.kind == "bivariate":
            lines += _bivariate_lines(obj.connection) + _curve_lines(obj.curves)
        else:
            lines += _curve_lines(obj.curves)
        return "\n".join(lines) + "\n"
    if isinstance(obj, ParametricModule):
        return "\n".join(_family_lines(obj)) + "\n"
    if isinstance(obj, BiConnection):
        return "\n".join(_bivariate_lines(obj)) + "\n"
    if isinstance(obj, dict):
        return "\n".join(_curve_lines(obj)) + "\n"
    raise UserInputError(f"cannot serialize {type(obj).__name__}")
