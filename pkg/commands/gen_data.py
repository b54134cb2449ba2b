#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
gen-data: generate a dataset of successful expert demonstrations.
"""

import argparse
import logging

from commands.common import add_common_options, load_section, prepare_output
from config import GenerateConfig
from services.dataset_service import generate_dataset

logger = logging.getLogger(__name__)

NAME = "gen-data"


def register(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(NAME, help="Generate expert demonstrations")
    add_common_options(parser)
    parser.add_argument("--n", type=int, default=None, help="Number of successful demonstrations")
    parser.add_argument(
        "--tasks",
        nargs="+",
        default=None,
        help="Template ids (pick stack place reach) or instruction keys such as stack:red:blue",
    )
    parser.add_argument("--workers", type=int, default=None, help="Parallel simulation workers")
    parser.set_defaults(handler=run)
    return parser


def run(args: argparse.Namespace) -> int:
    config = load_section(args, GenerateConfig, n_traj=args.n, tasks=args.tasks, workers=args.workers)
    out_dir = prepare_output(args, {"generate": config})
    manifest = generate_dataset(config, out_dir)
    logger.info(
        f"Dataset ready: {manifest.n_traj} trajectories "
        f"({len(manifest.train_ids)} train / {len(manifest.val_ids)} val)"
    )
    return 0
