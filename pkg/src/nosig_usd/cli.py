"""Command-line entry point ``nosig-usd``.

Exit codes: 0 success, 2 bad input, 3 invariant violated beyond
tolerance, 4 numerical integrity failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

from .qcore import InvalidArgumentError, NumericalIntegrityError
from .report import (EXIT_INPUT, EXIT_NUMERICAL, Overrides, compare_scenarios, format_compare,
                     format_report, run_scenario)
from .scenario import SCENARIO_SCHEMA, ScenarioError, bundled_scenarios, load


def _resolve(source: str):
    """Load a scenario path, or a bundled scenario by name."""
    if not Path(source).exists():
        bundled = bundled_scenarios()
        if source in bundled:
            return load(bundled[source])
    return load(source)


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _nonnegative_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be nonnegative")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tolerance-eq5", type=_positive_float, metavar="TOL",
                        help="tolerance for the conditional-probability balance check")
    common.add_argument("--zero-tol", type=_positive_float, metavar="TOL",
                        help="absolute tolerance for exact zeros in the witness scan")
    common.add_argument("--half-stderr", type=_positive_float, metavar="K",
                        help="sampled p_i counts as 1/2 within K standard errors (default 3)")
    common.add_argument("--json-out", metavar="PATH", help="write the JSON report here")
    common.add_argument("--quiet", action="store_true", help="suppress the human-readable table")
    common.add_argument("--timing", action="store_true",
                        help="include wall-clock time (makes reports non-reproducible)")

    parser = argparse.ArgumentParser(
        prog="nosig-usd",
        description="Check no-signaling consistency and unambiguous-discrimination bounds "
                    "for steering-prepared ensembles.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="analyse one scenario")
    run.add_argument("scenario", help="scenario file or bundled scenario name")

    cmp_ = sub.add_parser("compare", parents=[common], help="tabulate several scenarios")
    cmp_.add_argument("scenarios", nargs="+", help="two or more scenario files")
    cmp_.add_argument("--workers", type=_positive_int, default=1)

    attack = sub.add_parser("attack", parents=[common], help="search Eve's POVMs")
    attack.add_argument("scenario")
    attack.add_argument("--budget", type=_positive_int, default=10_000,
                        help="objective evaluations per objective")
    attack.add_argument("--seed", type=_nonnegative_int, default=0)
    attack.add_argument("--outcomes", type=_positive_int, help="number of Eve outcomes K")
    attack.add_argument("--restarts", type=_positive_int)

    smp = sub.add_parser("sample", parents=[common], help="finite-sample estimates")
    smp.add_argument("scenario")
    smp.add_argument("--n", type=_positive_int, required=True, help="number of rounds")
    smp.add_argument("--seed", type=_nonnegative_int, default=0)

    sub.add_parser("schema", help="print the scenario JSON schema")
    sub.add_parser("list", help="list bundled scenarios")
    return parser


def _overrides(args) -> Overrides:
    ov = Overrides(tolerance_eq5=args.tolerance_eq5, zero_tol=args.zero_tol,
                   half_stderr=args.half_stderr, timing=args.timing)
    if args.command == "attack":
        if args.outcomes is not None and args.outcomes < 2:
            raise ScenarioError("--outcomes must be at least 2")
        ov.force_attack = True
        ov.attack_budget, ov.attack_seed = args.budget, args.seed
        ov.attack_outcomes, ov.attack_restarts = args.outcomes, args.restarts
    elif args.command == "sample":
        if args.n < 2:
            raise ScenarioError("--n must be at least 2")
        ov.sample_n, ov.sample_seed = args.n, args.seed
    return ov


def _emit(text: str, args) -> None:
    if not args.quiet:
        sys.stdout.write(text)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else 0

    if args.command == "schema":
        sys.stdout.write(json.dumps(SCENARIO_SCHEMA, indent=2, sort_keys=True) + "\n")
        return 0
    if args.command == "list":
        for name, path in bundled_scenarios().items():
            sys.stdout.write(f"{name}\t{path}\n")
        return 0

    try:
        ov = _overrides(args)
        if args.command == "compare":
            if len(args.scenarios) < 2:
                sys.stderr.write("error: compare needs at least two scenarios\n")
                return EXIT_INPUT
            rows, code = compare_scenarios(_resolve, args.scenarios, ov, args.workers)
            _emit(format_compare(rows), args)
            if args.json_out:
                doc = [r.data if r.data is not None
                       else {"source": r.source, "error": r.error, "exit_code": r.exit_code}
                       for r in rows]
                Path(args.json_out).write_text(
                    json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n")
            return code
        report = run_scenario(_resolve(args.scenario), ov)
    except NumericalIntegrityError as exc:
        sys.stderr.write(f"numerical error: {exc}\n")
        return EXIT_NUMERICAL
    except (ScenarioError, InvalidArgumentError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT

    if args.json_out:
        Path(args.json_out).write_text(report.to_json())
    _emit(format_report(report.data), args)
    for v in report.violations:
        sys.stderr.write(f"violation: {v}\n")
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
