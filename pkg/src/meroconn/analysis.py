"""Dispatch analyses over parsed documents into JSON-ready reports.

Every invocation produces a single versioned report dictionary whose
values are JSON primitives; rationals are rendered exactly with
``str(Fraction)`` and never as floats.  Reports are deterministic for a
fixed input text and seed.  Exit codes: 0 on success, 1 on user error,
2 when a theorem-backed inequality fails to hold (a bug, not an input
problem).
"""

import json
import os
from fractions import Fraction
from math import lcm
from typing import NamedTuple, Optional

from .bivariate import BlowupChart, check_integrability, toric_pullback
from .blowups import stabilize_by_blowup
from .errors import (
    MeroconnError,
    PrecisionError,
    TheoremViolationError,
    UserInputError,
)
from .geometry import (
    axis_germ,
    check_irregularity_semicontinuity,
    check_rank_semicontinuity,
)
from .lattice import (
    lambda_estimate,
    legendre,
    legendre_reconstruct,
    polygon_boundary,
    polygon_lambda,
    young_inequality_holds,
)
from .parametric import (
    check_point,
    generic_polygon,
    slope_divisor,
    turning_locus,
)
from .parsing import input_digest, parse_document
from .turrittin import turrittin_levelt

SCHEMA_VERSION = 1
PRECISION_ENV = "MEROCONN_PRECISION"

COMMANDS = (
    "newton",
    "rank",
    "irregularity",
    "turrittin",
    "turning-locus",
    "divisor",
    "specialize",
    "blowup",
    "stabilize",
    "check-semicontinuity",
    "lattice-slope",
    "legendre",
    "check-integrability",
)


class AnalysisReport(NamedTuple):
    report: dict
    code: int
    svg: Optional[str]

    def to_json(self) -> str:
        return json.dumps(self.report, indent=2) + "\n"


def _q(x) -> str:
    return str(Fraction(x))


def _polygon_results(np) -> dict:
    return {
        "vertices": [[_q(a), _q(b)] for a, b in np.vertices],
        "slopes": {_q(s): _q(mu) for s, mu in sorted(np.slopes().items())},
        "katz_rank": _q(np.max_slope()),
        "irregularity": _q(np.irregularity),
    }


def _np_ramification(np) -> int:
    e = 1
    for s in np.slopes():
        e = lcm(e, s.denominator)
    return e


def _pl_points(f) -> list:
    return [[_q(a), _q(b)] for a, b in f.points]


def _family(doc):
    if doc.kind != "family":
        raise UserInputError("this command needs a one-variable family document")
    return doc.family


def _system(doc):
    if doc.kind != "bivariate":
        raise UserInputError("this command needs a two-variable system document")
    return doc.connection


def _point(doc, at):
    if at is None:
        raise UserInputError("this command needs --at with a parameter value")
    at = str(at).strip()
    ext = doc.extensions.get(at)
    if ext is not None:
        return ext.gen, ext
    try:
        return Fraction(at), None
    except (ValueError, ZeroDivisionError):
        raise UserInputError(
            f"--at takes a rational like 3/2 or a declared extension name, got {at!r}"
        ) from None


def _fraction_arg(value, flag):
    try:
        return Fraction(str(value))
    except (ValueError, ZeroDivisionError):
        raise UserInputError(f"{flag} takes a rational like 3/2, got {value!r}") from None


def _int_arg(value, flag, minimum=0):
    try:
        out = int(str(value))
    except ValueError:
        raise UserInputError(f"{flag} takes an integer, got {value!r}") from None
    if out < minimum:
        raise UserInputError(f"{flag} must be at least {minimum}")
    return out


# -- handlers; each returns (results, ramification, polygon-for-svg or None) ------


def _cmd_newton(doc, wp, seed, args):
    np = generic_polygon(_family(doc), wprec=wp, seed=seed)
    return _polygon_results(np), _np_ramification(np), np


def _cmd_rank(doc, wp, seed, args):
    np = generic_polygon(_family(doc), wprec=wp, seed=seed)
    return {"katz_rank": _q(np.max_slope())}, _np_ramification(np), None


def _cmd_irregularity(doc, wp, seed, args):
    np = generic_polygon(_family(doc), wprec=wp, seed=seed)
    return {"irregularity": _q(np.irregularity)}, _np_ramification(np), None


def _cmd_turrittin(doc, wp, seed, args):
    pm = _family(doc)
    dec = turrittin_levelt(pm.module, wprec=wp, seed=seed)
    e = 1
    for part in dec.parts:
        e = lcm(e, part.phi.e)
    results = {
        "parts": [{"phi": phi, "rank": r} for phi, r in dec.phi_multiset()],
        "slopes": [[_q(s), r] for s, r in sorted(dec.slope_multiset().items())],
        "reconstruction_ok": dec.reconstruction_ok,
    }
    return results, e, None


def _cmd_turning_locus(doc, wp, seed, args):
    pm = _family(doc)
    tl = turning_locus(pm, wprec=wp, seed=seed)
    turning = [f for f, v in tl.classification.items() if v == "turning"]
    results = {
        "turning": turning,
        "classification": dict(tl.classification),
        "candidate_polynomial": tl.candidates.to_str(pm.param),
        "is_empty": tl.is_empty(),
    }
    return results, 1, None


def _cmd_divisor(doc, wp, seed, args):
    pm = _family(doc)
    sigma = _fraction_arg(args.get("slope"), "--slope")
    d = slope_divisor(pm, sigma, wprec=wp, seed=seed)
    results = {
        "slope": _q(d.sigma),
        "equation": d.to_str("xi"),
        "part_rank": d.part_rank,
        "degree": d.poly.degree,
    }
    return results, d.sigma.denominator, None


def _cmd_specialize(doc, wp, seed, args):
    pm = _family(doc)
    point, field = _point(doc, args.get("at"))
    rep = check_point(pm, point, field=field, wprec=wp, seed=seed)
    results = {
        "at": str(args.get("at")).strip(),
        "verdict": rep.verdict,
        "generic": _polygon_results(rep.polygon),
        "specialized": _polygon_results(rep.specialized_polygon),
        "end_generic": _polygon_results(rep.end_polygon),
        "end_specialized": _polygon_results(rep.end_specialized_polygon),
    }
    return results, _np_ramification(rep.specialized_polygon), rep.specialized_polygon


def _cmd_blowup(doc, wp, seed, args):
    N = _system(doc)
    raw = args.get("chart")
    if raw is None:
        raise UserInputError("this command needs --chart a,b,c,d")
    parts = str(raw).split(",")
    if len(parts) != 4:
        raise UserInputError("--chart takes four comma-separated integers")
    chart = BlowupChart.make(*(_int_arg(p.strip(), "--chart") for p in parts))
    pulled = toric_pullback(N, chart)
    n = pulled.rank
    results = {
        "chart": list(chart),
        "matrix1": [[pulled.psi1.entry(i, j).to_str() for j in range(n)] for i in range(n)],
        "matrix2": [[pulled.psi2.entry(i, j).to_str() for j in range(n)] for i in range(n)],
    }
    return results, 1, None


def _cmd_stabilize(doc, wp, seed, args):
    pm = _family(doc)
    point, field = _point(doc, args.get("at"))
    if field is not None:
        raise UserInputError("stabilization expands at rational centers only")
    cert = stabilize_by_blowup(pm, point, wprec=wp, seed=seed)
    results = {
        "at": _q(point),
        "steps": cert.steps,
        "bound": cert.bound,
        "substitutions": list(cert.substitutions),
        "verdicts": [r.verdict for r in cert.reports],
        "stable": cert.stable,
        "summary": cert.to_str(),
    }
    return results, 1, None


def _cmd_check_semicontinuity(doc, wp, seed, args):
    N = _system(doc)
    name = args.get("curve")
    if name is None:
        if len(doc.curves) == 1:
            name = next(iter(doc.curves))
        else:
            raise UserInputError("this command needs --curve with a declared curve name")
    germ = doc.curves.get(str(name))
    if germ is None:
        raise UserInputError(f"no curve named {name!r} in the document")
    zs = [axis_germ(1), axis_germ(2)]
    rank_rep = check_rank_semicontinuity(N, germ, zs)
    irr_rep = check_irregularity_semicontinuity(N, germ, zs)
    results = {
        "curve": str(name),
        "rank": {
            "statement": rank_rep.to_str(),
            "left": _q(rank_rep.left),
            "right": _q(rank_rep.right),
            "holds": rank_rep.holds,
        },
        "irregularity": {
            "statement": irr_rep.to_str(),
            "left": _q(irr_rep.left),
            "right": _q(irr_rep.right),
            "holds": irr_rep.holds,
        },
    }
    if not (rank_rep.holds and irr_rep.holds):
        raise TheoremViolationError(
            "semicontinuity fails along the given curve",
            details={"rank": rank_rep.to_str(), "irregularity": irr_rep.to_str()},
        )
    return results, 1, None


def _cmd_lattice_slope(doc, wp, seed, args):
    pm = _family(doc)
    m = _int_arg(args.get("m", 0), "--m")
    n = _int_arg(args.get("n"), "--n", minimum=1) if args.get("n") is not None else None
    lam = lambda_estimate(pm.module, m, n_max=n, wprec=wp)
    np = generic_polygon(pm, wprec=wp, seed=seed)
    plam = polygon_lambda(np, m)
    results = {
        "m": str(m),
        "lambda": _q(lam),
        "polygon_lambda": _q(plam),
        "irregularity": _q(np.irregularity),
        "agrees": lam == plam,
    }
    if lam != plam:
        raise TheoremViolationError(
            f"lattice growth slope {lam} differs from the polygon value {plam} at m={m}",
            details=results,
        )
    return results, _np_ramification(np), None


def _cmd_legendre(doc, wp, seed, args):
    pm = _family(doc)
    np = generic_polygon(pm, wprec=wp, seed=seed)
    f = polygon_boundary(np)
    fstar = legendre(f)
    round_trip = legendre_reconstruct(fstar) == f
    young = young_inequality_holds(f, fstar)
    results = {
        "boundary": _pl_points(f),
        "transform": _pl_points(fstar),
        "tail_slope": _q(fstar.tail_slope),
        "round_trip": round_trip,
        "young_holds": young,
    }
    if args.get("m") is not None:
        m = _fraction_arg(args["m"], "--m")
        value = fstar.value(m)
        results["m"] = _q(m)
        results["f_star"] = _q(value)
        results["lambda"] = _q(value - m * np.mu)
    if not (round_trip and young):
        raise TheoremViolationError(
            "Legendre transform failed its round-trip or Young inequality",
            details={k: results[k] for k in ("round_trip", "young_holds")},
        )
    return results, _np_ramification(np), None


def _cmd_check_integrability(doc, wp, seed, args):
    N = _system(doc)
    return {"integrable": check_integrability(N)}, 1, None


_HANDLERS = {
    "newton": _cmd_newton,
    "rank": _cmd_rank,
    "irregularity": _cmd_irregularity,
    "turrittin": _cmd_turrittin,
    "turning-locus": _cmd_turning_locus,
    "divisor": _cmd_divisor,
    "specialize": _cmd_specialize,
    "blowup": _cmd_blowup,
    "stabilize": _cmd_stabilize,
    "check-semicontinuity": _cmd_check_semicontinuity,
    "lattice-slope": _cmd_lattice_slope,
    "legendre": _cmd_legendre,
    "check-integrability": _cmd_check_integrability,
}


def _resolve_precision(cli_value, doc_value):
    """CLI flag wins over the document's precision line, which wins over
    the environment override; the fall-through is exact (module defaults)."""
    for value in (cli_value, doc_value, os.environ.get(PRECISION_ENV)):
        if value is None:
            continue
        if value == "exact":
            return None
        out = int(value)
        if out < 1:
            raise UserInputError("precision must be 'exact' or a positive integer")
        return out
    return None


def run(command, text, seed=0, precision=None, svg=False, **args) -> AnalysisReport:
    """Parse ``text``, run ``command`` on it, and assemble the report."""
    base = {
        "schema": SCHEMA_VERSION,
        "command": command,
        "input": input_digest(text),
        "seed": seed,
    }
    try:
        handler = _HANDLERS.get(command)
        if handler is None:
            raise UserInputError(
                f"unknown command {command!r}; choose one of {', '.join(COMMANDS)}"
            )
        doc = parse_document(text, require_integrable=command != "check-integrability")
        wp = _resolve_precision(precision, doc.precision)
        warnings = []
        try:
            results, ram, np_for_svg = handler(doc, wp, seed, args)
            used = wp
        except PrecisionError as err:
            base_prec = wp if wp is not None else (err.available or 8)
            used = max(2 * base_prec, 8)
            warnings.append(
                f"working precision raised to {used} after exhaustion at {base_prec}"
            )
            results, ram, np_for_svg = handler(doc, used, seed, args)
        report = dict(base)
        report["precision"] = "default" if used is None else str(used)
        report["ramification"] = str(ram)
        report["results"] = results
        report["warnings"] = warnings
        image = polygon_svg(np_for_svg) if svg and np_for_svg is not None else None
        return AnalysisReport(report, 0, image)
    except TheoremViolationError as err:
        entry = {"code": err.code, "message": str(err)}
        if err.details:
            entry["details"] = err.details
        return AnalysisReport({**base, "error": entry}, 2, None)
    except MeroconnError as err:
        entry = {"code": err.code, "message": str(err)}
        line = getattr(err, "line", None)
        if line is not None:
            entry["line"] = line
            col = getattr(err, "col", None)
            if col is not None:
                entry["col"] = col
        return AnalysisReport({**base, "error": entry}, 1, None)


# -- SVG -------------------------------------------------------------------------

_SVG_UNIT = 60
_SVG_PAD = 50


def polygon_svg(np) -> str:
    """The polygon drawn in the fourth quadrant: heights are non-positive,
    so they render below the horizontal axis."""
    verts = list(np.vertices)
    max_x = max((x for x, _ in verts), default=Fraction(1))
    min_h = min((h for _, h in verts), default=Fraction(0))
    width = 2 * _SVG_PAD + _SVG_UNIT * float(max(max_x, 1))
    height = 2 * _SVG_PAD + _SVG_UNIT * float(max(-min_h, 1))

    def px(x):
        return _SVG_PAD + _SVG_UNIT * float(x)

    def py(h):
        return _SVG_PAD - _SVG_UNIT * float(h)

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:g}" height="{height:g}" '
        f'viewBox="0 0 {width:g} {height:g}">',
        '<style>text { font: 12px monospace; } .axis { stroke: #888; } '
        ".edge { stroke: #1a4; stroke-width: 2; fill: none; }</style>",
        f'<line class="axis" x1="{_SVG_PAD - 30:g}" y1="{py(0):g}" '
        f'x2="{width - 10:g}" y2="{py(0):g}"/>',
        f'<line class="axis" x1="{px(0):g}" y1="{py(0) - 30:g}" '
        f'x2="{px(0):g}" y2="{height - 10:g}"/>',
    ]
    points = " ".join(f"{px(x):g},{py(h):g}" for x, h in verts)
    lines.append(f'<polyline class="edge" points="{points}"/>')
    for x, h in verts:
        lines.append(f'<circle cx="{px(x):g}" cy="{py(h):g}" r="3" fill="#1a4"/>')
        lines.append(
            f'<text x="{px(x) + 6:g}" y="{py(h) - 6:g}">({_q(x)}, {_q(h)})</text>'
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
