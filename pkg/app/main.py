"""Command-line entry point: `python -m app.main run <config.json>` or `list`."""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from app.cli import list_scenarios, load_config, run_experiment
from app.core.config import settings, validate_settings
from app.core.exceptions import ConfigError
from app.core.logging import setup_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=settings.app_name,
        description="Nonlocal monostable evolution: simulation and property checks.",
    )
    parser.add_argument("--log-level", default=None, help="Override LOG_LEVEL")
    parser.add_argument("--log-format", choices=["plain", "json"], default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run one experiment config")
    run.add_argument("config", type=Path, help="Experiment JSON file")
    run.add_argument("--output-dir", type=Path, default=None, help="Root for run directories")

    sub.add_parser("list", help="List the available scenarios")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level, args.log_format)

    if args.command == "list":
        print(list_scenarios())
        return EXIT_OK

    try:
        validate_settings(settings)
        config = load_config(args.config)
    except (ConfigError, RuntimeError) as exc:
        logger.error(str(exc))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    outcome = run_experiment(config, args.output_dir)
    for report in outcome.reports:
        print(report.to_text())
    print(f"artifacts: {outcome.run_dir}")
    return outcome.exit_status


if __name__ == "__main__":
    sys.exit(main())
