"""Command line front end.

    reactive-overhead analytic    --config exp.yaml --out analytic.csv
    reactive-overhead simulate    --config exp.yaml --seed 7 --out runs.csv
    reactive-overhead sensitivity --config exp.yaml
    reactive-overhead compare     --config exp.yaml --jobs 4 --out cmp.csv
    reactive-overhead validate    --config exp.yaml

Without ``--config`` the desk preset is used. Exit status is 0 on success,
2 for configuration errors and 1 for failed runs.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import asdict, replace
from typing import List, Optional

from .config import COMPARE, EXPERIMENT_MODES, VALIDATE, ConfigError, load_experiment
from .experiments import (
    VALIDATE_COLUMNS,
    ExperimentError,
    format_table,
    rank,
    run_experiment,
    summarize,
    validate_model,
    write_table,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reactive-overhead",
        description="Reactive routing overhead: closed-form model and protocol simulator.",
    )
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in EXPERIMENT_MODES:
        p = sub.add_parser(mode, help=f"run a {mode} experiment")
        p.add_argument("--config", help="YAML experiment file (default: desk preset)")
        p.add_argument("--out", help="CSV output path (overrides the file's output)")
        p.add_argument("--seed", type=int, action="append",
                       help="seed override; repeat for several seeds")
        p.add_argument("--jobs", type=int, help="parallel runs")
        p.add_argument("--jsonl", help="line-delimited JSON record stream")
        p.add_argument("--trace-dir", help="write per-run event traces into this directory")
        p.add_argument("-q", "--quiet", action="store_true", help="suppress summary tables")
    return parser


def _validate(args, e) -> int:
    report = validate_model(e.validate)
    rows = [asdict(g) for g in report.grids]
    out = args.out or e.output
    if out:
        write_table(out, rows)
    if not args.quiet:
        print(format_table(rows, VALIDATE_COLUMNS))
        print(f"monotone agreement: {str(report.monotone_agreement).lower()}")
        for rows_, cols in report.unreachable:
            print(f"unreachable: {rows_}x{cols} grid endpoints are disconnected")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        e = load_experiment(args.config, args.mode)
        changes = {}
        if args.out:
            changes["output"] = args.out
        if args.seed:
            changes["seeds"] = tuple(args.seed)
        if args.jobs is not None:
            changes["jobs"] = args.jobs
        if args.jsonl:
            changes["jsonl"] = args.jsonl
        e = replace(e, **changes)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    if e.mode == VALIDATE:
        return _validate(args, e)

    if args.trace_dir:
        os.makedirs(args.trace_dir, exist_ok=True)
    try:
        records = run_experiment(e, trace_dir=args.trace_dir)
    except ExperimentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    summary = summarize(records)
    if e.output:
        stem = os.path.splitext(e.output)[0]
        write_table(stem + ".summary.csv", summary)
    if not args.quiet:
        print(format_table(summary))
    if e.mode == COMPARE:
        ranking = rank(summary)
        if e.output:
            write_table(os.path.splitext(e.output)[0] + ".ranking.csv", ranking)
        if not args.quiet:
            print()
            print(format_table(ranking, ["sweep_value", "metric", "ranking", "medians"]))
    return 0


if __name__ == "__main__":
    sys.exit(main())
