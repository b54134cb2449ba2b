#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
State-Aliasing Lab - command-line entry point

Dispatches to the subcommands in the commands package:

    gen-data     expert demonstrations
    train        bc / aux / aux-ptr training
    probe-bc     frozen-encoder behavior cloning probe with rollouts
    probe-state  frozen-encoder proprioceptive state probe
    align        state-feature alignment
    report       tables, plots and HTML index
    verify       property suite
    experiment   desk-scale variant comparison

Exit codes: 0 success, 1 failed precondition (one-line diagnostic on stderr),
2 usage error.
"""

import argparse
import logging
import sys
from typing import List, Optional

from commands import COMMANDS
from config import VERSION
from env_config import apply_runtime_settings, load_env_file, reload_settings
from exceptions import USAGE_EXIT_CODE, LabError, format_error_line, get_exit_code, log_exception
from performance import log_performance_stats

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sal",
        description="State-Aliasing Lab: auxiliary inverse dynamics with Pseudo Time Reversal",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    parser.add_argument("--log-level", default=None, help="Logging level (overrides SAL_LOG_LEVEL)")
    parser.add_argument("--env-file", default=None, help="Load settings from this .env file")
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    subparsers.required = True
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def configure_logging(level: str) -> None:
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 0 for --help/--version and 2 for usage errors
        return USAGE_EXIT_CODE if e.code not in (0, None) else 0

    if args.env_file:
        load_env_file(args.env_file)
    try:
        settings = reload_settings()
        level = (args.log_level or settings.log_level).upper()
        configure_logging(level)
    except (ValueError, LabError) as e:
        print(format_error_line(e), file=sys.stderr)
        return 1

    logger.info(f"State-Aliasing Lab {VERSION}: {args.command}")
    try:
        apply_runtime_settings(settings)
        code = args.handler(args)
    except LabError as e:
        log_exception(e, {"command": args.command})
        print(format_error_line(e), file=sys.stderr)
        return get_exit_code(e)
    finally:
        log_performance_stats()
    return code


if __name__ == "__main__":
    sys.exit(main())
