"""Command-line front end.

    buffon estimate  --constant gamma --trials 1000000 --seed 42
    buffon enumerate --constant rational:1/3 --depth 40
    buffon trace     --constant gamma --bits 110
    buffon tails     --constant pi4 --format csv --out tails.csv

Exit codes: 0 success, 1 invariant flag raised, 2 usage error, 3 the bit
string given to ``trace`` ran out before the sampler stopped.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from typing import Optional, Sequence

from .coins import ReplaySource, SourceExhausted
from .constants import get_provider
from .rational import format_rational
from .sampler import MemoizedEngine, ProviderDivergence
from .stats import TrialError, exact_mass, run_trials, tail_report

EXIT_OK, EXIT_FLAGGED, EXIT_USAGE, EXIT_EXHAUSTED = 0, 1, 2, 3


def _constant(name: str) -> str:
    try:
        get_provider(name)
    except (KeyError, ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(str(exc).strip("'\""))
    return name


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="buffon", description="Exact Bernoulli sampling from fair bits.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, trials=False, depth=False):
        p.add_argument("--constant", required=True, type=_constant,
                       help="gamma, pi4, ln2 or rational:n/d")
        if trials:
            p.add_argument("--trials", type=_positive, default=10**6)
            p.add_argument("--seed", type=int, default=0)
            p.add_argument("--shards", type=_positive, default=os.cpu_count() or 1)
        if depth:
            p.add_argument("--depth", type=_positive, default=40)
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--out", help="write the report here instead of stdout")

    common(sub.add_parser("estimate", help="Monte Carlo means and tail checks"), trials=True)
    common(sub.add_parser("enumerate", help="exact bracket on Pr[Y=1]"), depth=True)
    tr = sub.add_parser("trace", help="run one sample on an explicit bit string")
    common(tr)
    tr.add_argument("--bits", required=True, help="input bits, e.g. 110")
    common(sub.add_parser("tails", help="plot-ready tail data"), trials=True)
    return parser


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(data) -> str:
    return json.dumps(data, indent=2, sort_keys=False) + "\n"


def _csv(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _config(args) -> dict:
    keys = ("command", "constant", "trials", "seed", "shards", "depth")
    return {k: getattr(args, k) for k in keys if hasattr(args, k)}


def _mean_l_flags(summary) -> list:
    """Mean inputs must sit in [2, 3] (within 5 sigma) and in [mean_m, mean_m + 1]."""
    flags = []
    var = sum(c * (l - summary.mean_l) ** 2 for l, c in summary.hist_l.items()) / summary.trials
    band = 5 * math.sqrt(var / summary.trials)
    if not 2 - band <= summary.mean_l <= 3 + band:
        flags.append("mean_l outside [2, 3]")
    if not summary.sum_m <= summary.sum_l <= summary.sum_m + summary.trials:
        flags.append("mean_l outside [mean_m, mean_m + 1]")
    return flags


def cmd_estimate(args) -> int:
    provider = get_provider(args.constant)
    summary = run_trials(provider, args.trials, args.seed, args.shards)
    report = tail_report(summary, provider)
    flags = report.flags + _mean_l_flags(summary)
    if args.format == "json":
        text = _json({"config": _config(args), "summary": summary.to_dict(),
                      "tails": report.to_dict(), "flags": flags, "ok": not flags})
    else:
        data = summary.to_dict()
        rows = [("field", "value")]
        rows += [(k, data[k]) for k in ("provider", "seed", "trials", "mean_y", "mean_m",
                                        "mean_l", "mean_nm", "max_l", "max_nm")]
        rows += [(f"{k}_approx", v) for k, v in data["approximate"].items()]
        rows += [("prng", data["prng"]["name"]), ("ok", not flags)]
        text = _csv(rows)
    _emit(text, args.out)
    return EXIT_FLAGGED if flags else EXIT_OK


def cmd_enumerate(args) -> int:
    provider = get_provider(args.constant)
    try:
        bracket = exact_mass(provider, args.depth)
    except ProviderDivergence as exc:
        print(f"buffon: {exc}", file=sys.stderr)
        return EXIT_FLAGGED
    if args.format == "json":
        text = _json({"config": _config(args), **bracket.to_dict()})
    else:
        rows = [("field", "value"),
                ("depth", bracket.depth),
                ("p_one_low", format_rational(bracket.p_one_low)),
                ("unresolved", format_rational(bracket.unresolved)),
                ("p_one_high", format_rational(bracket.upper)),
                ("p_one_low_approx", float(bracket.p_one_low)),
                ("p_one_high_approx", float(bracket.upper))]
        text = _csv(rows)
    _emit(text, args.out)
    return EXIT_OK


def cmd_trace(args) -> int:
    provider = get_provider(args.constant)
    try:
        source = ReplaySource(args.bits)
    except ValueError as exc:
        print(f"buffon: {exc}", file=sys.stderr)
        return EXIT_USAGE
    engine = MemoizedEngine(provider)
    try:
        trace = engine.sample(source)
    except SourceExhausted as exc:
        partial = {"error": "bits exhausted before the sampler stopped",
                   "bits_used": source.consumed,
                   "schedule": [list(p) for p in getattr(exc, "schedule", ())]}
        _emit(_json(partial), args.out)
        return EXIT_EXHAUSTED
    data = trace.to_dict()
    if args.format == "json":
        text = _json({"config": _config(args), **data})
    else:
        rows = [("field", "value")] + [(k, data[k]) for k in ("y", "m", "l", "n_m")]
        rows += [("schedule", " ".join(f"{n}:{s}" for n, s in trace.schedule))]
        text = _csv(rows)
    _emit(text, args.out)
    return EXIT_OK


def cmd_tails(args) -> int:
    provider = get_provider(args.constant)
    summary = run_trials(provider, args.trials, args.seed, args.shards)
    report = tail_report(summary, provider)
    if args.format == "csv":
        rows = [("quantity", "index", "count", "empirical", "bound", "bound_exact",
                 "checked", "flagged")]
        for name, index, count, empirical, bound, checked, flagged in report.rows():
            rows.append((name, index, count, repr(empirical), repr(float(bound)),
                         format_rational(bound), int(checked), int(flagged)))
        text = _csv(rows)
    else:
        text = _json({"config": _config(args), **report.to_dict()})
    _emit(text, args.out)
    return EXIT_OK if report.ok else EXIT_FLAGGED


COMMANDS = {"estimate": cmd_estimate, "enumerate": cmd_enumerate,
            "trace": cmd_trace, "tails": cmd_tails}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except TrialError as exc:
        print(f"buffon: {exc}", file=sys.stderr)
        return EXIT_FLAGGED


if __name__ == "__main__":
    sys.exit(main())
