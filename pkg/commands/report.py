#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
report: CSV tables, SVG plots and an HTML index from artifact directories.
"""

import argparse
import logging

from commands.common import add_common_options, output_path, prepare_output
from services.report_service import build_report

logger = logging.getLogger(__name__)

NAME = "report"


def register(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(NAME, help="Build tables and plots from run outputs")
    add_common_options(parser, config=False)
    parser.add_argument("--in", dest="inputs", nargs="+", required=True, help="Artifact directories")
    parser.set_defaults(handler=run)
    return parser


def run(args: argparse.Namespace) -> int:
    outputs = build_report(args.inputs, output_path(args))
    prepare_output(args, {})
    logger.info(f"Report index: {outputs.index}")
    return 0
