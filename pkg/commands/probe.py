#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
probe-bc / probe-state: frozen-encoder probes.

probe-bc trains one behavior cloning probe per task found in the dataset and
evaluates it with rollouts; probe-state regresses the proprioceptive state.
Both write probe_results.csv into the output directory.
"""

import argparse
import logging

from commands.common import add_common_options, dataset_sim, load_section, open_dataset, prepare_output, resolve_encoders
from config import BCProbeConfig, StateProbeConfig
from services.probe_service import RESULTS_NAME, ProbeRow, run_bc_probes, train_state_probe, write_probe_results

logger = logging.getLogger(__name__)

BC_NAME = "probe-bc"
STATE_NAME = "probe-state"
STATE_TASK = "all"


def _add_probe_options(parser: argparse.ArgumentParser) -> None:
    add_common_options(parser)
    parser.add_argument("--ckpt", required=True, help="Checkpoint path or random:SEED")
    parser.add_argument("--data", required=True, help="Dataset directory")


def register(subparsers) -> None:
    bc = subparsers.add_parser(BC_NAME, help="Frozen-encoder behavior cloning probe with rollouts")
    _add_probe_options(bc)
    bc.add_argument("--rollouts", type=int, default=None, help="Rollouts per task")
    bc.add_argument("--steps", type=int, default=None, help="Probe optimizer steps")
    bc.set_defaults(handler=run_bc)

    state = subparsers.add_parser(STATE_NAME, help="Frozen-encoder proprioceptive state probe")
    _add_probe_options(state)
    state.add_argument("--epochs", type=int, default=None)
    state.set_defaults(handler=run_state)


def run_bc(args: argparse.Namespace) -> int:
    config = load_section(args, BCProbeConfig, n_rollouts=args.rollouts, steps=args.steps)
    dataset = open_dataset(args.data)
    [(encoder_id, encoder)] = resolve_encoders([args.ckpt], dataset)
    out_dir = prepare_output(args, {"bc_probe": config})

    rows = run_bc_probes(encoder, encoder_id, dataset.trajectories(), config, dataset_sim(dataset))
    write_probe_results(rows, out_dir / RESULTS_NAME)
    for row in rows:
        logger.info(
            f"{encoder_id} {row.task}: success {row.success_rate:.3f} "
            f"train {row.bc_train_loss:.5f} val {row.bc_val_loss:.5f}"
        )
    return 0


def run_state(args: argparse.Namespace) -> int:
    config = load_section(args, StateProbeConfig, epochs=args.epochs)
    dataset = open_dataset(args.data)
    [(encoder_id, encoder)] = resolve_encoders([args.ckpt], dataset)
    out_dir = prepare_output(args, {"state_probe": config})

    result = train_state_probe(encoder, dataset, config)
    row = ProbeRow(
        encoder_id,
        STATE_TASK,
        state_train_loss=result.train_loss,
        state_val_loss=result.val_loss,
    )
    write_probe_results([row], out_dir / RESULTS_NAME)
    logger.info(
        f"{encoder_id}: state probe train {result.train_loss:.5f} val {result.val_loss:.5f} "
        f"(median baseline {result.baseline_val_loss:.5f})"
    )
    return 0
