"""Command-line entry point: ``icnsim run|validate|oracle``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Optional

from .errors import InvariantViolation, ScenarioError
from .scenario import load_scenario, run
from .trace import check_trace, derive_report, dump_report, read_trace

EXIT_OK = 0
EXIT_SCENARIO = 2
EXIT_INVARIANT = 3


def _setup_logging() -> None:
    level = os.environ.get("ICNSIM_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _write(text: str, path: Optional[str]) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def cmd_run(args: argparse.Namespace) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"{args.scenario}:{exc.line}: {exc.message}", file=sys.stderr)
        return EXIT_SCENARIO
    try:
        result = run(scenario, seed=args.seed, until=args.until)
    except InvariantViolation as exc:
        sim = getattr(exc, "sim", None)
        if sim is not None and args.trace:
            sim.trace.write(args.trace)
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    if args.trace:
        result.trace.write(args.trace)
    _write(dump_report(result.report), args.report)
    for problem in result.violations:
        print(f"invariant violation: {problem}", file=sys.stderr)
    return EXIT_INVARIANT if result.violations else EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"{args.scenario}:{exc.line}: {exc.message}", file=sys.stderr)
        return EXIT_SCENARIO
    print(f"{args.scenario}: ok ({len(scenario.topology.nodes)} nodes, {len(scenario.timeline)} actions)")
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    records = read_trace(args.trace)
    _write(dump_report(derive_report(records)), args.report)
    problems = check_trace(records)
    for problem in problems:
        print(f"invariant violation: {problem}", file=sys.stderr)
    return EXIT_INVARIANT if problems else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="icnsim", description="Deterministic 5G ICN slicing simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario and emit its metrics report")
    p.add_argument("scenario")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--trace", help="write the JSONL event trace here")
    p.add_argument("--report", help="write the JSON report here (default: stdout)")
    p.add_argument("--until", type=int, default=None, help="stop at this simulated time (us)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="parse and check a scenario without running it")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("oracle", help="re-derive the report and check invariants from a saved trace")
    p.add_argument("trace")
    p.add_argument("--report", help="write the derived report here (default: stdout)")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
