"""
Command-line entry point.

Usage:
    python -m actionlab run CONFIG [--out DIR] [--only NAME] [--jobs N] [--plots] [--log-level LEVEL]
    python -m actionlab list CONFIG

Exit codes: 0 when every applicable check passes, 2 when a check fails,
1 on configuration or runtime errors.
"""

import argparse
import logging
import sys
from typing import List, Optional

from .config import ConfigManager, LOG_LEVELS
from .error_handling import ErrorHandler, LabError
from .suite import SuiteRunner
from .utils import load_environment, setup_logging

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FAILED = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="actionlab",
                                     description="Cognitive action learning dynamics laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run every scenario of a suite config")
    run.add_argument("config", help="path to a JSON suite config")
    run.add_argument("--out", help="output directory (overrides the config and ACTIONLAB_OUTPUT_DIR)")
    run.add_argument("--only", metavar="NAME", help="run a single scenario")
    run.add_argument("--jobs", type=int, help="worker processes (0 = one per physical core)")
    run.add_argument("--plots", action="store_true", help="write SVG figures next to the CSVs")
    run.add_argument("--log-level", choices=LOG_LEVELS, type=str.upper, help="log level for logs/actionlab.log")

    lst = sub.add_parser("list", help="print scenario names and their checks")
    lst.add_argument("config", help="path to a JSON suite config")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    load_environment()

    manager = ConfigManager(args.config)
    try:
        config = manager.load_config()
    except LabError as e:
        print(e.message, file=sys.stderr)
        return EXIT_ERROR

    if args.command == "list":
        for scenario in config.scenarios:
            print(f"{scenario.name}: {', '.join(scenario.checks) if scenario.checks else '(no checks)'}")
        return EXIT_OK

    setup_logging(manager.get_absolute_path(config.log_dir), args.log_level or config.log_level)
    logger = logging.getLogger(__name__)
    if args.jobs is not None and args.jobs < 0:
        print("--jobs must be non-negative", file=sys.stderr)
        return EXIT_ERROR

    try:
        runner = SuiteRunner(manager, config, output_dir=args.out, only=args.only, jobs=args.jobs,
                             plots=args.plots)
        result = runner.run_all()
    except LabError as e:
        ErrorHandler(logger).handle_error(e, "suite")
        print(e.message, file=sys.stderr)
        return EXIT_ERROR
    except Exception as e:
        error = ErrorHandler(logger).handle_error(e, "suite")
        print(error.message, file=sys.stderr)
        return EXIT_ERROR

    runner.display_summary(result)
    logger.info(f"Suite '{config.name}' finished with exit code {result.exit_code}")
    return result.exit_code
