#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
train: train encoder + policy as one of the ablation variants.

    bc        policy loss only
    aux       policy loss + lambda_inv * inverse-dynamics loss
    aux-ptr   aux with Pseudo Time Reversal on the inverse-dynamics samples
"""

import argparse
import logging

from commands.common import add_common_options, load_section, open_dataset, prepare_output
from config import VARIANTS, TrainConfig
from services.checkpoint_service import load_checkpoint
from services.training_service import train_policy

logger = logging.getLogger(__name__)

NAME = "train"


def register(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(NAME, help="Train a policy (bc / aux / aux-ptr)")
    add_common_options(parser)
    parser.add_argument("--data", required=True, help="Dataset directory")
    parser.add_argument("--variant", choices=VARIANTS, required=True)
    parser.add_argument("--steps", type=int, default=None, help="Override the number of optimizer steps")
    parser.add_argument("--resume", default=None, help="Checkpoint to continue from")
    parser.set_defaults(handler=run)
    return parser


def run(args: argparse.Namespace) -> int:
    config = load_section(args, TrainConfig, steps=args.steps).for_variant(args.variant)
    dataset = open_dataset(args.data)
    resume = load_checkpoint(args.resume) if args.resume else None
    out_dir = prepare_output(args, {"train": config})

    result = train_policy(config, dataset, out_dir, resume=resume)
    if result.log:
        logger.info(
            f"Finished {args.variant}: final total loss {result.log[-1].total:.5f}, "
            f"checkpoint {result.checkpoint_path}"
        )
    return 0
