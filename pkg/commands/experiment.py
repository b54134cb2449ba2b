#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
experiment: the desk-scale bc / aux / aux-ptr comparison end to end.
"""

import argparse
import logging

from commands.common import add_common_options, load_section, prepare_output
from config import ExperimentConfig
from services.experiment_service import run_experiment

logger = logging.getLogger(__name__)

NAME = "experiment"


def register(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(NAME, help="Run the desk-scale variant comparison")
    add_common_options(parser)
    parser.add_argument("--seeds", type=int, nargs="+", default=None, help="Training seeds")
    parser.set_defaults(handler=run)
    return parser


def run(args: argparse.Namespace) -> int:
    config = load_section(args, ExperimentConfig, seeds=args.seeds)
    if args.seed is not None:
        config = config.model_copy(
            update={"generate": config.generate.model_copy(update={"seed": args.seed})}
        )
    out_dir = prepare_output(args, {"experiment": config})

    summary = run_experiment(config, out_dir)
    logger.info(f"Trend summary: {summary.path}")
    return 0
