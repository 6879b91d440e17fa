"""Command-line front end.

Exit codes: 0 when every verdict passes, 1 when an inequality is violated,
2 for usage or parse errors, 3 when a numerical routine does not converge.
JSON output has sorted keys and 17-digit floats, so a fixed seed gives
byte-identical reports.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import math
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .concentration import (
    HerbstParams,
    TailCurve,
    mc_tail_experiment,
    mgf_verify,
    sharpness_fit,
    tail_bound,
    theorem_tail,
)
from .errors import IneqLabError, InsufficientData, NonConvergent
from .expr import parse_expression
from .functionals import ia_ratio
from .measures import CATALOG_KEYS, Seed, parse_measure
from .phi_class import LEMMA_IDS, run_lemma_suite
from .transport import build_z_r, dump_csv, jacobian_bound_check, jacobian_profile, pushforward_check
from .two_point import optimal_constant_bruteforce, optimal_constant_closed_form

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE, EXIT_NONCONVERGENT = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _num(x) -> str:
    x = float(x)
    if not math.isfinite(x):
        return "null"
    if x == int(x) and abs(x) < 2**53:
        return repr(float(x))
    return format(x, ".17g")


def canonical_json(obj, indent: int = 0) -> str:
    """Deterministic JSON: sorted keys, floats to 17 significant digits, NaN as null."""
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{inner}{_string(str(k))}: {canonical_json(obj[k], indent + 1)}' for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, np.ndarray):
        return canonical_json(obj.tolist(), indent)
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(inner + canonical_json(v, indent + 1) for v in obj) + "\n" + pad + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    return _string(str(obj))


def _string(s: str) -> str:
    out = ['"']
    for ch in s:
        if ch in '"\\':
            out.append("\\" + ch)
        elif ord(ch) < 0x20:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    out.append('"')
    return "".join(out)


def _csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if isinstance(v, float) and not math.isfinite(v) else
                    (format(float(v), ".17g") if isinstance(v, (float, np.floating)) else v) for v in row])
    return buf.getvalue()


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError as exc:
        raise UsageError(f"bad number list {text!r}") from exc


def _range(text: str) -> np.ndarray:
    """``a:b:step`` inclusive of ``b`` up to rounding, or a comma list."""
    if ":" not in text:
        return np.array(_floats(text))
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"range must be a:b:step, got {text!r}")
    a, b, step = (float(v) for v in parts)
    if step <= 0 or b < a:
        raise UsageError(f"empty range {text!r}")
    count = int(math.floor((b - a) / step + 1e-9)) + 1
    return a + step * np.arange(count)


# ---- commands ----------------------------------------------------------------


def cmd_catalog(args):
    payload = {"measures": list(CATALOG_KEYS), "lemma_ids": list(LEMMA_IDS)}
    rows = [(k,) for k in CATALOG_KEYS]
    return payload, True, (("key",), rows)


def cmd_constant(args):
    closed = optimal_constant_closed_form(args.alpha, args.p)
    payload = {"alpha": args.alpha, "p": args.p, "closed_form": closed}
    if args.oracle:
        brute, (fm, fp) = optimal_constant_bruteforce(args.alpha, args.p, args.resolution)
        payload.update({"bruteforce": brute, "gap": abs(brute - closed),
                        "maximizer": [fm, fp], "resolution": args.resolution})
    passed = payload.get("gap", 0.0) <= 1e-6
    header = ("alpha", "p", "closed_form", "bruteforce", "gap")
    row = (args.alpha, args.p, closed, payload.get("bruteforce", math.nan), payload.get("gap", math.nan))
    return payload, passed, (header, [row])


def cmd_verify(args):
    verdict = run_lemma_suite(args.id, args.trials, Seed(args.seed))
    header = ("lemma_id", "trials", "violations", "worst_margin", "tolerance")
    row = (verdict.lemma_id, verdict.trials, verdict.violations, verdict.worst_margin, verdict.tolerance)
    return verdict.to_dict(), verdict.passed, (header, [row])


def cmd_ia_ratio(args):
    m = parse_measure(args.measure)
    f = parse_expression(args.f, getattr(m, "dimension", 1)).to_test_function()
    weight = None
    if args.weight:
        w = parse_expression(args.weight, getattr(m, "dimension", 1))
        weight = lambda x: w.value(np.asarray(x, dtype=float).reshape(len(np.atleast_1d(x)), -1))
    reports = [ia_ratio(m, f, p, args.a, weight) for p in _floats(args.p)]
    payload = {"reports": [r.to_dict() for r in reports], "max_ratio": max(r.ratio for r in reports)}
    passed = True
    if args.C is not None:
        payload["C"] = args.C
        passed = payload["max_ratio"] <= args.C * (1 + 1e-9)
    header = ("p", "a", "var_p", "energy", "ratio")
    return payload, passed, (header, [(r.p, r.a, r.var_p, r.energy, r.ratio) for r in reports])


def cmd_transport_build(args):
    tm = build_z_r(args.r)
    payload = {"r": tm.r, "a": tm.a, "c_r": tm.c_r, "nodes": int(tm.grid.size),
               "x_max": tm.x_max, "z_max": tm.z_max}
    if args.dump == "csv":
        return payload, True, ("raw", dump_csv(tm))
    return payload, True, None


def cmd_transport_check(args):
    tm = build_z_r(args.r)
    ys = np.linspace(-args.xmax, args.xmax, args.points)
    verdict = jacobian_bound_check(tm, ys)
    x_pos = tm.grid[1:]
    lower_ok = bool(np.all(tm.z_values[1:] >= x_pos**tm.r - 1e-10 * np.maximum(1.0, x_pos**tm.r)))
    payload = {"jacobian": verdict.to_dict(), "z_at_least_x_pow_r": lower_ok}
    passed = verdict.passed and lower_ok
    if args.ks_samples:
        ks = pushforward_check(tm, args.ks_samples, Seed(args.seed))
        payload["pushforward"] = {"statistic": ks.statistic, "threshold": ks.threshold,
                                  "n": ks.n, "passed": ks.passed}
        passed = passed and ks.passed
    prof = jacobian_profile(tm, ys)
    rows = zip(prof["y"], prof["jacobian"], prof["bound_lo"], prof["bound_hi"])
    return payload, passed, (("y", "jacobian", "bound_lo", "bound_hi"), list(rows))


def _curve_table(curve: TailCurve):
    return TailCurve.CSV_COLUMNS, list(curve.csv_rows())


def cmd_tail_mc(args):
    h = parse_expression(args.h, args.n).to_test_function()
    ts = _range(args.t)
    curve = mc_tail_experiment(args.r, args.n, h, ts, args.samples, Seed(args.seed), args.C)
    payload = {"curve": curve.to_dict()}
    try:
        payload["fit"] = sharpness_fit(curve).to_dict()
    except InsufficientData as exc:
        payload["fit"] = {"skipped": str(exc)}
    return payload, True, _curve_table(curve)


def cmd_tail_bound(args):
    hp = HerbstParams(args.C, args.a)
    ts = _range(args.t)
    mode = "optimized" if args.optimized else "paper_choice"
    bounds = np.array([tail_bound(hp, t, mode) for t in ts])
    curve = TailCurve(ts, bounds)
    payload = {"a": args.a, "r": hp.r, "mode": mode, "t": ts, "bound": bounds,
               "reference": theorem_tail(args.a, ts)}
    return payload, True, _curve_table(curve)


def cmd_mgf_verify(args):
    m = parse_measure(args.measure)
    h = parse_expression(args.h, getattr(m, "dimension", 1)).to_test_function()
    rep = mgf_verify(m, h, HerbstParams(args.C, args.a), _floats(args.lam), _floats(args.p), Seed(args.seed))
    rows = [(r.p, r.lam, r.value, r.bound, r.margin) for r in rep.rows]
    return rep.to_dict(), rep.violations == 0, (("p", "lambda", "value", "bound", "margin"), rows)


# ---- parser ------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", type=Path)
    common.add_argument("--format", choices=("json", "csv"))
    common.add_argument("--timing", action="store_true", help="print wall time to stderr")

    root = _Parser(prog="ineqlab", description="I(a) inequality verification lab")
    root.add_argument("--version", action="version", version=f"ineqlab {__version__}")
    sub = root.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("catalog", parents=[common], help="list measure keys and lemma ids")
    p.set_defaults(func=cmd_catalog)

    p = sub.add_parser("constant", help="optimal constants")
    kind = p.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    q = kind.add_parser("two-point", parents=[common])
    q.add_argument("--alpha", type=float, required=True)
    q.add_argument("--p", type=float, required=True)
    q.add_argument("--oracle", action="store_true", help="also run the brute-force optimizer")
    q.add_argument("--resolution", type=int, default=4096)
    q.set_defaults(func=cmd_constant)

    p = sub.add_parser("verify", help="randomized property suites")
    kind = p.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    q = kind.add_parser("lemma", parents=[common])
    q.add_argument("--id", required=True, choices=LEMMA_IDS)
    q.add_argument("--trials", type=int, default=1000)
    q.set_defaults(func=cmd_verify)

    p = sub.add_parser("ia-ratio", parents=[common], help="witnessed I(a) constant of a function")
    p.add_argument("--measure", required=True)
    p.add_argument("--f", required=True, help="expression in x (or x1..xn)")
    p.add_argument("--p", required=True, help="one or more p values")
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--weight", help="energy weight expression")
    p.add_argument("--C", type=float, help="fail when a ratio exceeds this constant")
    p.set_defaults(func=cmd_ia_ratio)

    p = sub.add_parser("transport", help="the map from mu_r to the symmetric exponential law")
    kind = p.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    q = kind.add_parser("build", parents=[common])
    q.add_argument("--r", type=float, required=True)
    q.add_argument("--dump", choices=("csv",))
    q.set_defaults(func=cmd_transport_build)
    q = kind.add_parser("check", parents=[common])
    q.add_argument("--r", type=float, required=True)
    q.add_argument("--xmax", type=float, default=30.0)
    q.add_argument("--points", type=int, default=6001)
    q.add_argument("--ks-samples", type=int, default=0)
    q.set_defaults(func=cmd_transport_check)

    p = sub.add_parser("tail", help="tail bounds and Monte Carlo tails")
    kind = p.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    q = kind.add_parser("mc", parents=[common])
    q.add_argument("--r", type=float, required=True)
    q.add_argument("--n", type=int, default=1)
    q.add_argument("--h", default="x")
    q.add_argument("--t", default="0:4:0.1")
    q.add_argument("--samples", type=int, default=10**5)
    q.add_argument("--C", type=float, default=1.0)
    q.set_defaults(func=cmd_tail_mc)
    q = kind.add_parser("bound", parents=[common])
    q.add_argument("--a", type=float, required=True)
    q.add_argument("--t", required=True)
    q.add_argument("--C", type=float, default=1.0)
    q.add_argument("--optimized", action="store_true")
    q.set_defaults(func=cmd_tail_bound)

    p = sub.add_parser("mgf", help="moment generating function checks")
    kind = p.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    q = kind.add_parser("verify", parents=[common])
    q.add_argument("--measure", required=True)
    q.add_argument("--h", default="x")
    q.add_argument("--C", type=float, required=True)
    q.add_argument("--a", type=float, required=True)
    q.add_argument("--lambda", dest="lam", required=True, help="one or more lambda values")
    q.add_argument("--p", default="1 1.5 1.9 1.99")
    q.set_defaults(func=cmd_mgf_verify)
    return root


_NOT_CONFIG = {"func", "out", "format", "timing"}


def config_digest(args: argparse.Namespace) -> str:
    config = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k not in _NOT_CONFIG}
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def _emit(text: str, out: Optional[Path]) -> None:
    if out is None:
        try:
            sys.stdout.write(text)
            sys.stdout.flush()
        except BrokenPipeError:
            pass
    else:
        out.write_text(text)


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except SystemExit as exc:
        return int(exc.code or 0)
    fmt = args.format or ("csv" if args.out is not None and args.out.suffix == ".csv" else "json")
    if getattr(args, "dump", None) == "csv":
        fmt = "csv"
    start = time.perf_counter()
    try:
        payload, passed, table = args.func(args)
    except NonConvergent as exc:
        sys.stderr.write(f"did not converge: {exc}\n")
        return EXIT_NONCONVERGENT
    except (IneqLabError, UsageError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    if args.timing:
        sys.stderr.write(f"wall time {time.perf_counter() - start:.3f} s\n")
    if fmt == "csv":
        if table is None:
            sys.stderr.write("error: this command has no CSV form; use --dump csv or JSON\n")
            return EXIT_USAGE
        text = table[1] if table[0] == "raw" else _csv_text(*table)
    else:
        report = {"tool": "ineqlab", "version": __version__, "command": argv, "seed": args.seed,
                  "config_digest": config_digest(args), "passed": bool(passed), "result": payload}
        text = canonical_json(report) + "\n"
    _emit(text, args.out)
    return EXIT_OK if passed else EXIT_VIOLATION


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
