#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
verify: run the property suite; exit 1 when any check fails.
"""

import argparse
import json
import logging

from commands.common import add_common_options, prepare_output
from services.verification import run_property_suite
from utils import atomic_write_text

logger = logging.getLogger(__name__)

NAME = "verify"


def register(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(NAME, help="Run the property suite")
    add_common_options(parser, config=False)
    parser.set_defaults(handler=run)
    return parser


def run(args: argparse.Namespace) -> int:
    report = run_property_suite(seed=args.seed or 0)
    if args.out:
        out_dir = prepare_output(args, {})
        atomic_write_text(out_dir / "verify.json", json.dumps(report.to_dict(), indent=2) + "\n")

    failed = [check.name for check in report.checks if not check.passed]
    if failed:
        logger.error(f"Property suite failed: {', '.join(failed)}")
        return 1
    logger.info(f"Property suite passed ({len(report.checks)} checks)")
    return 0
