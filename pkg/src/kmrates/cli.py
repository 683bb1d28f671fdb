"""Command line front end.

    kmrates run <config.toml>    full experiment: trace, bounds, checks
    kmrates check <config.toml>  property suites only
    kmrates table --eps 1,0.1,0.01 --d 1 --K 2 --lambda 0.5

Exit codes: 0 all checks pass, 1 a violation or invalid bound was
found, 2 configuration problem.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .geometry import GeometryError
from .iteration import IterationError
from .harness import (ConfigError, load_config, run_experiment, run_checks,
                      build_trace, comparison_table, render_report_text,
                      render_report_csv, render_table_text, render_table_csv)


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--tol", type=float, default=None,
                        help="override the check tolerance")
    parser.add_argument("--out", type=Path, default=None,
                        help="output directory (traces, tables)")
    parser.add_argument("--format", choices=("text", "csv"), default="text",
                        help="stdout rendering")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kmrates",
        description="KM iteration rates: run experiments, verify bounds")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment config")
    p_run.add_argument("config", type=Path)
    _add_common(p_run)

    p_check = sub.add_parser("check", help="run property suites only")
    p_check.add_argument("config", type=Path)
    _add_common(p_check)

    p_table = sub.add_parser("table", help="bound comparison table")
    p_table.add_argument("--eps", type=str, default="",
                         help="comma-separated accuracy targets")
    p_table.add_argument("--d", type=float, default=1.0,
                         help="diameter parameter")
    p_table.add_argument("--K", type=int, default=2,
                         help="exponential-bound constant")
    p_table.add_argument("--lambda", dest="lam", type=float, default=0.5,
                         help="constant step size")
    _add_common(p_table)
    return parser


def _load(args) -> "harness.ExperimentConfig":
    config = load_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if args.tol is not None:
        config.tol = args.tol
    return config


def _cmd_run(args) -> int:
    config = _load(args)
    report = run_experiment(config, out_dir=args.out)
    if args.format == "csv":
        sys.stdout.write(render_report_csv(report))
    else:
        sys.stdout.write(render_report_text(report))
    return 0 if report.passed else 1


def _cmd_check(args) -> int:
    config = _load(args)
    trace = build_trace(config)
    checks = run_checks(config, trace)
    ok = True
    for name, rep in checks.items():
        status = "PASS" if rep.passed else "FAIL"
        ok = ok and rep.passed
        sys.stdout.write(
            f"{status} {name}: samples={rep.samples} "
            f"violations={rep.violations} worst={rep.worst:.3g} "
            f"skipped={rep.skipped} tol={rep.tol:g}\n")
    sys.stdout.write("result: " + ("PASS" if ok else "FAIL") + "\n")
    return 0 if ok else 1


def _cmd_table(args) -> int:
    eps_list = [float(tok) for tok in args.eps.split(",") if tok.strip()]
    rows = comparison_table(eps_list, args.d, args.K, args.lam)
    if args.format == "csv":
        rendered = render_table_csv(rows)
        suffix = "csv"
    else:
        rendered = render_table_text(rows)
        suffix = "txt"
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / f"table.{suffix}").write_text(rendered)
    else:
        sys.stdout.write(rendered)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "check":
            return _cmd_check(args)
        return _cmd_table(args)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (GeometryError, IterationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
