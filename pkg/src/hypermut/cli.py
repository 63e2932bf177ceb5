"""Command-line front end: ``hypermut {exact,oracle,mc,table}``.

Exit codes: 0 success, 1 usage error, 2 numerical failure (a series that
did not converge, a singular solve, all trials censored, or a failed
``--verify``).
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction

from . import __version__
from .chain import ModelParams, binomial, transition_matrix
from .errors import AllCensored, DomainError, HypermutError, NonConvergence, SingularSystem
from .exact import (
    Method,
    SeriesControl,
    passage_time_explicit,
    passage_time_kac_series,
    return_time_class,
    traversal_time,
)
from .montecarlo import SimConfig, estimate_hitting_time
from .oracle import (
    ehrenfest_matrix,
    hitting_times_solve,
    lempot_residual,
    stationary_distribution,
)

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2
DEFAULT_TABLE_CAP = 12
VERIFY_RTOL = 1e-8


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_prob(text: str, exact: bool = False) -> float | Fraction:
    """``"0.25"`` -> float, ``"1/4"`` -> Fraction; ``exact`` turns decimals into Fractions too."""
    try:
        if "/" in text or exact:
            return Fraction(text)
        return float(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"cannot parse probability {text!r}") from exc


def encode(x):
    """JSON-safe scalar: exact rationals as strings, floats at full precision."""
    if isinstance(x, Fraction):
        return str(x) if x.denominator != 1 else str(x.numerator)
    if isinstance(x, bool) or x is None:
        return x
    if isinstance(x, int):
        return x
    x = float(x)
    return None if math.isnan(x) else x


def fmt(x) -> str:
    if x is None:
        return "nan"
    if isinstance(x, (Fraction, str)):
        return str(x)
    if isinstance(x, int):
        return str(x)
    return repr(float(x))


@dataclass
class RunRecord:
    command: str
    params: dict
    options: dict
    results: list = field(default_factory=list)
    tool_version: str = __version__
    timestamp: str = field(
        default_factory=lambda: _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"))
    footnotes: list = field(default_factory=list)
    exit_code: int = EXIT_OK

    def to_json(self) -> str:
        doc = {
            "command": self.command,
            "params": self.params,
            "options": self.options,
            "results": self.results,
            "tool_version": self.tool_version,
            "timestamp": self.timestamp,
        }
        if self.footnotes:
            doc["footnotes"] = self.footnotes
        return json.dumps(doc, indent=2)


# -- argument plumbing ------------------------------------------------------

def _common(parser):
    parser.add_argument("--n", type=int, required=True, help="genome length N")
    parser.add_argument("--format", choices=["table", "csv", "json"], default="table")


def _series_flags(parser):
    parser.add_argument("--tol", type=float, default=1e-12, help="series term tolerance")
    parser.add_argument("--max-terms", type=int, default=100_000)
    parser.add_argument("--min-terms", type=int, default=8)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hypermut", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"hypermut {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("exact", help="closed forms and series for one (from, to) pair")
    _common(p)
    p.add_argument("--p", required=True, help="mutation probability, decimal or a/b")
    p.add_argument("--from", dest="from_class", type=int, required=True)
    p.add_argument("--to", dest="to_class", type=int, required=True)
    _series_flags(p)

    p = sub.add_parser("oracle", help="linear-algebra ground truth")
    _common(p)
    p.add_argument("--p", help="mutation probability, decimal or a/b")
    p.add_argument("--to", dest="to_class", type=int, default=0)
    p.add_argument("--exact-rational", action="store_true", help="solve over the rationals")
    p.add_argument("--ehrenfest", action="store_true", help="also solve the Ehrenfest urn chain")
    p.add_argument("--stationary", action="store_true", help="report the invariant law")

    p = sub.add_parser("mc", help="Monte Carlo estimate of a mean passage time")
    _common(p)
    p.add_argument("--p", required=True)
    p.add_argument("--from", dest="from_class", type=int, required=True)
    p.add_argument("--to", dest="to_class", type=int, required=True)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-steps", type=int, default=None, help="step cap (default 100*2^N)")
    p.add_argument("--jobs", type=int, default=1, help="worker threads; never changes results")
    _series_flags(p)

    p = sub.add_parser("table", help="full (from, to) matrix of mean passage times")
    _common(p)
    p.add_argument("--p", required=True)
    p.add_argument("--verify", action="store_true", help="compare every cell with the oracle")
    p.add_argument("--max-n", type=int, default=DEFAULT_TABLE_CAP, help="grid size cap")
    _series_flags(p)
    return parser


def _params(args, exact=False) -> ModelParams:
    try:
        return ModelParams(args.n, parse_prob(args.p, exact))
    except DomainError as exc:
        raise UsageError(str(exc)) from exc


def _control(args) -> SeriesControl:
    try:
        return SeriesControl(args.tol, args.max_terms, args.min_terms)
    except DomainError as exc:
        raise UsageError(str(exc)) from exc


def _check_class(args, value, name):
    if not 0 <= value <= args.n:
        raise UsageError(f"--{name} must lie in [0, {args.n}], got {value}")


def _param_echo(params: ModelParams | None, n: int) -> dict:
    return {"n_sites": n, "mut_prob": encode(params.mut_prob) if params else None}


def _options(args, skip=("command", "n", "p", "format")) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


# -- commands ---------------------------------------------------------------

def _report_row(rep) -> dict:
    d = rep.to_dict()
    d["value"] = encode(d["value"])
    d["error_bound"] = encode(d["error_bound"])
    return d


def cmd_exact(args) -> RunRecord:
    params = _params(args)
    ctrl = _control(args)
    i, j = args.from_class, args.to_class
    _check_class(args, i, "from")
    _check_class(args, j, "to")
    rec = RunRecord("exact", _param_echo(params, args.n), _options(args))
    if i == j:
        rec.results.append(_report_row(return_time_class(params, j)))
    elif i == params.n_sites and j == 0:
        rec.results.append(_report_row(traversal_time(params)))
    for fn in (passage_time_explicit, passage_time_kac_series):
        try:
            rec.results.append(_report_row(fn(params, i, j, ctrl)))
        except NonConvergence as exc:
            rec.results.append({"from_class": i, "to_class": j, "value": None,
                                "method": fn.__name__, "error": str(exc)})
            rec.footnotes.append(str(exc))
            rec.exit_code = EXIT_NUMERIC
    return rec


def _vector(values) -> list:
    return [encode(v) for v in values]


def cmd_oracle(args) -> RunRecord:
    if args.p is None and not args.ehrenfest:
        raise UsageError("oracle needs --p, --ehrenfest, or both")
    _check_class(args, args.to_class, "to")
    j = args.to_class
    exact = args.exact_rational or (args.p is not None and "/" in args.p)
    params = _params(args, exact) if args.p is not None else None
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    rec = RunRecord("oracle", _param_echo(params, args.n), _options(args))
    mutation_h = None
    if params is not None:
        P = transition_matrix(params)
        mutation_h = hitting_times_solve(P, j)
        rec.results.append({"kind": "hitting_times", "chain": "mutation", "to_class": j,
                            "values": _vector(mutation_h)})
        rec.results.append({"kind": "return_time", "chain": "mutation", "to_class": j,
                            "value": encode(mutation_h[j])})
        rec.results.append({"kind": "lempot_residual", "chain": "mutation", "to_class": j,
                            "value": encode(lempot_residual(P, j))})
        if args.stationary:
            rec.results.append({"kind": "stationary", "chain": "mutation",
                                "values": _vector(stationary_distribution(P).probs)})
    if args.ehrenfest:
        E = ehrenfest_matrix(args.n, exact=exact or params is None)
        eh = hitting_times_solve(E, j)
        rec.results.append({"kind": "hitting_times", "chain": "ehrenfest", "to_class": j,
                            "values": _vector(eh)})
        rec.results.append({"kind": "return_time", "chain": "ehrenfest", "to_class": j,
                            "value": encode(eh[j])})
        rows = []
        for k in range(args.n + 1):
            row = {"class": k, "kac": encode(Fraction(2 ** args.n, binomial(args.n, k))),
                   "ehrenfest": encode(hitting_times_solve(E, k)[k])}
            if params is not None:
                row["mutation"] = encode(hitting_times_solve(P, k)[k])
            rows.append(row)
        rec.results.append({"kind": "return_time_comparison", "rows": rows})
    return rec


def cmd_mc(args) -> RunRecord:
    params = _params(args)
    _check_class(args, args.from_class, "from")
    _check_class(args, args.to_class, "to")
    if args.trials < 1 or args.jobs < 1:
        raise UsageError("--trials and --jobs must be positive")
    max_steps = args.max_steps if args.max_steps is not None else 100 * 2 ** args.n
    if max_steps < 1:
        raise UsageError("--max-steps must be positive")
    cfg = SimConfig(args.seed, args.trials, max_steps)
    options = _options(args, skip=("command", "n", "p", "format", "jobs"))
    options["max_steps"] = max_steps
    rec = RunRecord("mc", _param_echo(params, args.n), options)
    est = estimate_hitting_time(params, args.from_class, args.to_class, cfg, n_jobs=args.jobs)
    ref = passage_time_explicit(params, args.from_class, args.to_class, _control(args))
    row = {"from_class": args.from_class, "to_class": args.to_class,
           "method": Method.MONTE_CARLO.value}
    row.update({k: encode(v) for k, v in est.to_dict().items()})
    row["reference"] = encode(ref.value)
    row["reference_method"] = ref.method.value
    row["z_score"] = encode(est.z_score(ref.value))
    rec.results.append(row)
    return rec


def cmd_table(args) -> RunRecord:
    params = _params(args)
    ctrl = _control(args)
    if args.n > args.max_n:
        raise UsageError(f"--n {args.n} exceeds the grid cap {args.max_n} (raise --max-n)")
    N = args.n
    rec = RunRecord("table", _param_echo(params, N), _options(args))
    matrix = [[None] * (N + 1) for _ in range(N + 1)]
    bounds = [[None] * (N + 1) for _ in range(N + 1)]
    for i in range(N + 1):
        for j in range(N + 1):
            try:
                rep = passage_time_explicit(params, i, j, ctrl)
                matrix[i][j], bounds[i][j] = rep.value, rep.error_bound
            except NonConvergence as exc:
                rec.footnotes.append(f"cell ({i},{j}): {exc}")
                rec.exit_code = EXIT_NUMERIC
    rec.results.append({"kind": "passage_time_matrix", "rows": [_vector(r) for r in matrix]})
    if args.verify:
        P = transition_matrix(params.as_float())
        worst = 0.0
        for j in range(N + 1):
            h = hitting_times_solve(P, j)
            for i in range(N + 1):
                if matrix[i][j] is None:
                    continue
                worst = max(worst, abs(matrix[i][j] - h[i]) / h[i])
        passed = worst <= VERIFY_RTOL
        rec.results.append({"kind": "verify", "max_rel_deviation": worst,
                            "rtol": VERIFY_RTOL, "passed": passed})
        if not passed:
            rec.footnotes.append(f"max relative deviation {worst:.3e} exceeds {VERIFY_RTOL:g}")
            rec.exit_code = EXIT_NUMERIC
    return rec


COMMANDS = {"exact": cmd_exact, "oracle": cmd_oracle, "mc": cmd_mc, "table": cmd_table}


# -- rendering --------------------------------------------------------------

def _flat_rows(rec: RunRecord) -> list[list[str]]:
    rows = []
    for res in rec.results:
        if "kind" not in res:
            rows.append([f"{k}={fmt(v)}" for k, v in res.items() if v is not None])
            continue
        label = " ".join(str(res[k]) for k in ("kind", "chain") if k in res)
        if "values" in res:
            rows.append([label] + [fmt(v) for v in res["values"]])
        elif "rows" in res and res["kind"] == "return_time_comparison":
            for r in res["rows"]:
                rows.append([label] + [f"{k}={fmt(v)}" for k, v in r.items()])
        elif "rows" not in res:
            rows.append([label] + [f"{k}={fmt(v)}" for k, v in res.items()
                                   if k not in ("kind", "chain")])
    return rows


def render_csv(rec: RunRecord) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if rec.command == "table":
        mat = rec.results[0]["rows"]
        w.writerow(["from"] + [str(j) for j in range(len(mat))])
        for i, row in enumerate(mat):
            w.writerow([str(i)] + [fmt(v) for v in row])
        for res in rec.results[1:]:
            w.writerow(["# max_rel_deviation", fmt(res["max_rel_deviation"]),
                        "passed" if res["passed"] else "FAILED"])
    elif rec.command in ("exact", "mc"):
        keys = list(dict.fromkeys(k for res in rec.results for k in res))
        w.writerow(keys)
        for res in rec.results:
            w.writerow([fmt(res.get(k)) if k in res else "" for k in keys])
    else:
        for row in _flat_rows(rec):
            w.writerow(row)
    for note in rec.footnotes:
        w.writerow([f"# note: {note}"])
    return buf.getvalue()


def render_table(rec: RunRecord) -> str:
    lines = [f"hypermut {rec.command}  N={rec.params['n_sites']}  p={rec.params['mut_prob']}"]
    if rec.command == "table":
        mat = rec.results[0]["rows"]
        cells = [[fmt(v) for v in row] for row in mat]
        width = max(len(c) for row in cells for c in row)
        lines.append("from\\to " + " ".join(f"{j:>{width}}" for j in range(len(mat))))
        for i, row in enumerate(cells):
            lines.append(f"{i:>7} " + " ".join(f"{c:>{width}}" for c in row))
        for res in rec.results[1:]:
            status = "ok" if res["passed"] else "FAILED"
            lines.append(f"max relative deviation vs oracle: {res['max_rel_deviation']:.3e} ({status})")
    else:
        for row in _flat_rows(rec):
            lines.append("  ".join(row))
    for note in rec.footnotes:
        lines.append(f"note: {note}")
    return "\n".join(lines) + "\n"


def render(rec: RunRecord, fmt_name: str) -> str:
    if fmt_name == "json":
        return rec.to_json() + "\n"
    if fmt_name == "csv":
        return render_csv(rec)
    return render_table(rec)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        rec = COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"hypermut: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AllCensored as exc:
        print(f"hypermut: {exc} (try a larger --max-steps)", file=sys.stderr)
        return EXIT_NUMERIC
    except (NonConvergence, SingularSystem) as exc:
        print(f"hypermut: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DomainError as exc:
        print(f"hypermut: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HypermutError as exc:
        print(f"hypermut: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    sys.stdout.write(render(rec, args.format))
    for note in rec.footnotes:
        print(f"hypermut: {note}", file=sys.stderr)
    return rec.exit_code


if __name__ == "__main__":
    sys.exit(main())
