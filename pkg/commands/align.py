#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
align: state-feature alignment (pixel-controlled partial Spearman) of one or
more encoders on a shared set of frame pairs.
"""

import argparse
import logging

from commands.common import add_common_options, load_section, open_dataset, prepare_output, resolve_encoders
from config import AlignConfig
from services.alignment_service import alignment_report, write_alignment

logger = logging.getLogger(__name__)

NAME = "align"


def register(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(NAME, help="State-feature alignment of encoders")
    add_common_options(parser)
    parser.add_argument("--ckpt", nargs="+", required=True, help="Checkpoint paths and/or random:SEED")
    parser.add_argument("--data", required=True, help="Dataset directory")
    parser.add_argument("--split", choices=("val", "all"), default=None)
    parser.set_defaults(handler=run)
    return parser


def run(args: argparse.Namespace) -> int:
    config = load_section(args, AlignConfig, split=args.split)
    dataset = open_dataset(args.data)
    config.check_image_size(dataset.manifest.image_size)
    encoders = resolve_encoders(args.ckpt, dataset)
    out_dir = prepare_output(args, {"align": config})

    report = alignment_report(dataset, encoders, config)
    pairs_path, summary_path = write_alignment(report, out_dir)
    logger.info(f"Wrote {summary_path} and {pairs_path}")
    return 0
