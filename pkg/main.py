#!/usr/bin/env python3
"""
HybridCI command line
    python main.py run <config.json> [--seed N] [--out DIR] [--quiet]
    python main.py gen-series <config.json> [--out DIR]
    python main.py compare <run dir>... [--out DIR]

Exit status: 0 on success, 1 when a run diverged or failed, 2 on configuration errors.
"""

import argparse
import logging
import sys

from src.config.experiment import load_experiment
from src.config.settings import toolkit_settings
from src.core.errors import ComparisonError, HybridCIError, InvalidConfigError
from src.experiments.compare import compare
from src.experiments.runner import exit_status, run_experiment
from src.ui.display import display

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


def build_parser():
    parser = argparse.ArgumentParser(prog="hybridci", description="Hybrid computational intelligence experiments")
    parser.add_argument("--quiet", action="store_true", help="only print warnings and errors")
    commands = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (("run", "run the experiment described by a config file"),
                            ("gen-series", "generate the configured benchmark series")):
        command = commands.add_parser(name, help=help_text)
        command.add_argument("config", help="experiment JSON file")
        command.add_argument("--seed", type=int, help="override the config seed")
        command.add_argument("--out", help="override the output directory")
        command.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS, help=argparse.SUPPRESS)

    command = commands.add_parser("compare", help="tabulate finished runs on the same dataset")
    command.add_argument("runs", nargs="+", help="run directories")
    command.add_argument("--out", default=".", help="directory for comparison.csv")
    command.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS, help=argparse.SUPPRESS)
    return parser


def configure_logging(quiet):
    level = logging.WARNING if quiet else getattr(logging, toolkit_settings.log_level, logging.INFO)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    display.set_quiet(quiet)


def command_run(args, task=None):
    """Run (or only generate the series of) one experiment; returns the exit status."""
    try:
        cfg = load_experiment(args.config, seed=args.seed, output_dir=args.out)
        if task is not None and cfg.task != task:
            raise InvalidConfigError("task", f"gen-series needs a gen-series config, got {cfg.task!r}")
    except InvalidConfigError as exc:
        print(f"❌ Invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        record = run_experiment(cfg)
    except InvalidConfigError as exc:
        print(f"❌ Invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HybridCIError as exc:
        print(f"❌ Run failed: {exc}", file=sys.stderr)
        return EXIT_FAILED
    return exit_status(record)


def command_compare(args):
    try:
        compare(args.runs, args.out)
    except (ComparisonError, HybridCIError) as exc:
        print(f"❌ Cannot compare: {exc}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


def main(argv=None):
    """Entry point; returns the process exit status."""
    args = build_parser().parse_args(argv)
    toolkit_settings.load_settings()
    configure_logging(args.quiet)
    if args.command == "compare":
        return command_compare(args)
    return command_run(args, task="gen-series" if args.command == "gen-series" else None)


if __name__ == "__main__":
    sys.exit(main())
