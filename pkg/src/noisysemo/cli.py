"""Command-line entry point: ``noisysemo {run,sweep,fit,validate}``.

Exit codes: 0 success, 1 I/O failure, 2 usage error, 3 validation failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from collections import defaultdict
from pathlib import Path
from typing import Optional, Sequence

from . import serialize
from .algorithms import budget_for
from .engine import DEFAULT_BACKEND
from .experiments import (
    NoiseRule,
    RuleError,
    SweepGrid,
    VariantSpec,
    fit_scaling,
    run_cell,
    run_sweep,
    separation_report,
    summarize,
)

log = logging.getLogger("noisysemo")

EXIT_IO = 1
EXIT_USAGE = 2
EXIT_VALIDATION = 3

RULE_HELP = (
    "noise rate: a number or a rule 'C/n', 'C/n2', 'Clogn/n2' (log is natural), e.g. 0.25/n or 4logn/n2"
)


class UsageError(Exception):
    pass


def _rule(text: str) -> NoiseRule:
    try:
        return NoiseRule.parse(text)
    except RuleError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError(f"problem sizes must be positive, got {text!r}")
    return values


def _rule_list(text: str) -> list[NoiseRule]:
    return [_rule(t.strip()) for t in text.split(",") if t.strip()]


def _trace(text: str) -> Optional[int]:
    if text == "off":
        return None
    if text == "full":
        return 1
    if text.startswith("stride:"):
        try:
            stride = int(text[len("stride:"):])
        except ValueError:
            stride = 0
        if stride >= 1:
            return stride
    raise argparse.ArgumentTypeError(f"--trace expects off, full or stride:S (S >= 1), got {text!r}")


def _K(text: str) -> float:
    if text.lower() in ("inf", "infinity"):
        return math.inf
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--K expects a non-negative integer or 'inf', got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError("--K must be >= 0")
    return value


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--K", type=_K, default=None, help="iterations during which extremes are re-appended (keep variant)")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--budget-multiple", type=float, default=20.0,
                   help="iteration budget as a multiple of n^2 ln n (natural log; default 20)")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--workers", type=int, default=1, help="worker processes; output does not depend on it")
    p.add_argument("--backend", choices=["compiled", "python"], default=None,
                   help=f"simulation backend (default {DEFAULT_BACKEND})")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out", type=Path, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noisysemo",
        description="SEMO on OneMinMax under one-bit prior noise. 'log' always means the natural logarithm.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one cell (one or more trials) and print the records")
    run.add_argument("--n", type=int, required=True)
    run.add_argument("--p", type=_rule, default=NoiseRule.parse("0"), help=RULE_HELP)
    run.add_argument("--variant", default="cached", help="cached | reeval | keep (with --K) | keep<K>")
    run.add_argument("--budget", type=int, default=None, help="absolute iteration budget (overrides --budget-multiple)")
    run.add_argument("--trial-seed", type=int, default=None,
                     help="replay one trial from its recorded per-trial seed")
    run.add_argument("--trace", type=_trace, default=None, metavar="{off|full|stride:S}")
    _common(run)

    sweep = sub.add_parser("sweep", help="run a grid of cells; writes CSV records and a JSON summary")
    sweep.add_argument("--config", type=Path, default=None,
                       help="flat 'key = value' file with the same keys as the flags; flags override it")
    sweep.add_argument("--n", type=_int_list, default=None, help="comma-separated sizes")
    sweep.add_argument("--p", type=_rule_list, default=None, help="comma-separated noise rules; " + RULE_HELP)
    sweep.add_argument("--variant", default=None, help="comma-separated variants")
    sweep.add_argument("--summary", type=Path, default=None, help="JSON summary path (default <out>.summary.json)")
    sweep.add_argument("--threshold", type=float, default=0.5, help="censored-fraction threshold for separation flags")
    _common(sweep)

    fit = sub.add_parser("fit", help="fit a power law to per-cell statistics of a sweep CSV")
    fit.add_argument("csv", type=Path)
    fit.add_argument("--statistic", choices=["median", "mean"], default="median")
    fit.add_argument("--field", choices=["T_total", "T_ex", "evaluations"], default="T_total")
    fit.add_argument("--regressor", choices=["n", "n2logn"], default="n")
    fit.add_argument("--format", choices=["csv", "json"], default="json")
    fit.add_argument("--out", type=Path, default=None)

    val = sub.add_parser("validate", help="run the invariant and oracle suite")
    val.add_argument("--quick", action="store_true", help="n=50, p=0.5/n, 1e4 steps per variant")
    val.add_argument("--n", type=int, default=50)
    val.add_argument("--p", type=_rule, default=None, help="default 0.5/n")
    val.add_argument("--steps", type=int, default=None)
    val.add_argument("--seed", type=int, default=0)
    return parser


def _config_file_args(path: Path) -> list[str]:
    args = []
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or key == "config":
            raise UsageError(f"{path}:{lineno}: bad key {key!r}")
        args += [f"--{key}", value]
    return args


def _config_echo(args, **extra) -> dict:
    out = {"command": args.command}
    for key in ("n", "p", "variant", "K", "trials", "budget_multiple", "budget", "seed", "trial_seed", "trace"):
        if hasattr(args, key):
            value = getattr(args, key)
            if isinstance(value, NoiseRule):
                value = value.text
            elif isinstance(value, list):
                value = [v.text if isinstance(v, NoiseRule) else v for v in value]
            elif isinstance(value, float) and math.isinf(value):
                value = "inf"
            out[key] = value
    out.update(extra)
    out["schema_version"] = serialize.SCHEMA_VERSION
    return out


def cmd_run(args) -> int:
    spec = VariantSpec.parse(args.variant, args.K)
    try:
        p = args.p(args.n)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    budget = args.budget if args.budget is not None else budget_for(args.n, args.budget_multiple)
    if budget < 0:
        raise UsageError("--budget must be >= 0")
    if args.trial_seed is not None:
        from .algorithms import AlgorithmConfig
        from .engine import simulate
        from .noise import NoiseSpec

        if args.trials not in (None, 1):
            raise UsageError("--trial-seed replays exactly one trial; drop --trials")
        config = AlgorithmConfig(args.n, NoiseSpec(p), spec.variant, spec.K)
        records = [simulate(config, budget, args.trial_seed, args.trace, args.backend)]
    else:
        trials = args.trials or 1
        if trials < 1:
            raise UsageError("--trials must be >= 1")
        records = run_cell(args.n, p, spec, trials, budget, args.seed,
                           workers=args.workers, trace_stride=args.trace, backend=args.backend)
    for i, r in enumerate(records):
        status = "censored" if r.T_total_censored else "covered"
        ex = f"{r.T_ex}{'+' if r.T_ex_censored else ''}"
        print(f"trial {i}: {status} T_total={r.T_total}{'+' if r.T_total_censored else ''} T_ex={ex} "
              f"evaluations={r.evaluations} seed={r.seed}")
    s = summarize(records, args.p.text)
    print(f"{spec} n={args.n} p={p:.6g} budget={budget}: median T_total={s.median_T_total} "
          f"censored={s.censored_fraction:.3f}")
    if args.out is not None:
        echo = _config_echo(args, variant=str(spec), p_value=p, budget=budget)
        if args.format == "csv":
            serialize.write_records_csv(args.out, [(args.p.text, i, r) for i, r in enumerate(records)], echo)
            if args.trace:
                for i, r in enumerate(records):
                    path = args.out.with_name(f"{args.out.stem}.trace-{i}.csv")
                    serialize.write_trace_csv(path, r.trace, dict(echo, trial=i, trial_seed=r.seed))
        else:
            serialize.write_json(
                args.out, echo,
                records=[serialize.record_to_dict(r, include_trace=bool(args.trace)) for r in records],
                summary=s.to_dict(),
            )
    return 0


def cmd_sweep(args) -> int:
    if args.n is None or args.p is None or args.variant is None:
        raise UsageError("sweep needs --n, --p and --variant (from flags or --config)")
    if args.out is None:
        raise UsageError("sweep needs --out")
    variants = [VariantSpec.parse(v, args.K) for v in args.variant.split(",") if v.strip()]
    try:
        grid = SweepGrid(tuple(args.n), tuple(args.p), tuple(variants), args.trials or 20,
                         args.budget_multiple, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    results = run_sweep(grid, workers=args.workers, backend=args.backend, log=log.info)
    echo = dict(_config_echo(args), **grid.describe(), schema_version=serialize.SCHEMA_VERSION)
    rows = [(cell.rule.text, i, r) for cell, recs in results for i, r in enumerate(recs)]
    serialize.write_records_csv(args.out, rows, echo)
    summaries = [summarize(recs, cell.rule.text) for cell, recs in results]
    fits = _fits_from_summaries(summaries)
    sep = separation_report(summaries, args.threshold)
    summary_path = args.summary or args.out.with_suffix(".summary.json")
    serialize.write_json(summary_path, echo, cells=serialize.summaries_to_json(summaries),
                         fits=fits, separation=sep)
    for row in sep:
        print(f"n={row.n} p={row.p:.6g}: cached censored={row.cached_censored:.3f} "
              f"reeval censored={row.reeval_censored:.3f} ratio={row.median_ratio}"
              f"{'  FLAG' if row.flagged else ''}")
    print(f"wrote {args.out} and {summary_path}")
    return 0


def _fits_from_summaries(summaries) -> list[dict]:
    groups = defaultdict(list)
    for s in summaries:
        if s.median_T_total is not None and s.n > 1:
            groups[(s.variant, s.K if not math.isinf(s.K) else "inf", s.p_rule)].append((s.n, s.median_T_total))
    fits = []
    for (variant, K, rule), pts in sorted(groups.items(), key=lambda kv: str(kv[0])):
        if len(pts) >= 3:
            for reg in ("n", "n2logn"):
                f = fit_scaling(pts, reg)
                fits.append({"variant": variant, "K": K, "p_rule": rule, "statistic": "median_T_total",
                             "regressor": reg, "exponent": f.exponent, "constant": f.constant,
                             "residual": f.residual, "points": f.points})
    return fits


def cmd_fit(args) -> int:
    import numpy as np

    config, rows = serialize.read_records_csv(args.csv)
    groups = defaultdict(list)
    for row in rows:
        censored = row["T_ex_censored"] if args.field == "T_ex" else row["T_total_censored"]
        if not censored:
            groups[(row["variant"], row["K"], row["p_rule"])].append(row)
    results = []
    for (variant, K, rule), grp in sorted(groups.items(), key=lambda kv: str(kv[0])):
        by_n = defaultdict(list)
        for row in grp:
            by_n[row["n"]].append(row[args.field])
        stat = np.median if args.statistic == "median" else np.mean
        pts = [(n, float(stat(v))) for n, v in sorted(by_n.items())]
        if len(pts) < 3:
            log.warning("skipping %s K=%s p=%s: fewer than 3 sizes", variant, K, rule)
            continue
        f = fit_scaling(pts, args.regressor)
        results.append({"variant": variant, "K": "inf" if math.isinf(K) else K, "p_rule": rule,
                        "statistic": f"{args.statistic}_{args.field}", "regressor": f.regressor,
                        "exponent": f.exponent, "constant": f.constant, "residual": f.residual,
                        "points": pts})
        print(f"{variant} p={rule}: exponent={f.exponent:.4f} constant={f.constant:.4g} "
              f"residual={f.residual:.3g} ({args.regressor}, {len(pts)} sizes)")
    if not results:
        raise UsageError("no group has at least 3 sizes with uncensored trials")
    if args.out is not None:
        echo = {"command": "fit", "source": str(args.csv), "source_config": config, "statistic": args.statistic,
                "field": args.field, "regressor": args.regressor, "schema_version": serialize.SCHEMA_VERSION}
        if args.format == "json":
            serialize.write_json(args.out, echo, fits=results)
        else:
            import csv

            with open(args.out, "w", newline="") as fh:
                fh.write("# config: " + json.dumps(echo, sort_keys=True) + "\n")
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["variant", "K", "p_rule", "statistic", "regressor", "exponent", "constant", "residual"])
                for r in results:
                    w.writerow([r["variant"], r["K"], r["p_rule"], r["statistic"], r["regressor"],
                                repr(r["exponent"]), repr(r["constant"]), repr(r["residual"])])
    return 0


def cmd_validate(args) -> int:
    from .validate import run_suite

    p = args.p(args.n) if args.p is not None else None
    results = run_suite(quick=args.quick, n=args.n, p=p, steps=args.steps, seed=args.seed, log=print)
    failed = [r for r in results if not r.passed]
    total = sum(r.violations for r in results)
    print(f"{len(results) - len(failed)}/{len(results)} checks passed, {total} violations")
    return EXIT_VALIDATION if failed else 0


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "fit": cmd_fit, "validate": cmd_validate}


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        if argv and argv[0] == "sweep" and "--config" in argv:
            i = argv.index("--config")
            if i + 1 >= len(argv):
                parser.parse_args(argv)
            argv = ["sweep"] + _config_file_args(Path(argv[i + 1])) + argv[1:]
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"noisysemo: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"noisysemo: error: {exc}", file=sys.stderr)
        return EXIT_IO
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ValueError) as exc:
        parser.print_usage(sys.stderr)
        print(f"noisysemo: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"noisysemo: error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
