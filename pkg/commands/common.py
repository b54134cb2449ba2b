#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Shared helpers for the command modules.

These helpers handle the plumbing every subcommand repeats:
- Adding the common options (--config, --seed, --out)
- Loading a config section with command-line overrides
- Opening the dataset and resolving encoder references
- Echoing the run configuration into the artifact directory
"""

import argparse
import logging
from pathlib import Path
from typing import Any, Dict, List, Tuple, Type

from pydantic import BaseModel

from config import EncoderConfig, SimConfig, echo_config, load_config
from env_config import get_settings
from exceptions import ConfigurationError
from services.checkpoint_service import load_encoder
from services.dataset_service import Dataset, load_dataset
from services.networks import Encoder
from utils import check_directory

logger = logging.getLogger(__name__)

# argparse attributes that are plumbing, not run arguments
_INTERNAL_ARGS = {"handler"}


def add_common_options(
    parser: argparse.ArgumentParser, config: bool = True, out: bool = True
) -> None:
    """
    Add the options every subcommand accepts.

    Args:
        parser: subcommand parser
        config: add --config (JSON config file for the command's section)
        out: add --out (artifact directory, default <SAL_ARTIFACT_ROOT>/<command>)
    """
    parser.add_argument("--seed", type=int, default=None, help="Override the config seed")
    if config:
        parser.add_argument("--config", default=None, help="JSON config file")
    if out:
        parser.add_argument("--out", default=None, help="Output directory")


def load_section(args: argparse.Namespace, model: Type[BaseModel], **overrides: Any) -> BaseModel:
    """Load the --config file into `model`, applying --seed and other overrides."""
    if "seed" in model.model_fields:
        overrides.setdefault("seed", args.seed)
    return load_config(getattr(args, "config", None), model, **overrides)


def open_dataset(path: str) -> Dataset:
    """
    Open a dataset directory given on the command line.

    Raises:
        DatasetError: missing or unreadable manifest
    """
    dataset = load_dataset(path)
    logger.info(f"Opened dataset {path} ({len(dataset)} trajectories)")
    return dataset


def dataset_sim(dataset: Dataset) -> SimConfig:
    """Simulator settings the dataset was generated with."""
    if not dataset.manifest.sim:
        return SimConfig()
    return SimConfig.model_validate(dataset.manifest.sim)


def resolve_encoders(specs: List[str], dataset: Dataset) -> List[Tuple[str, Encoder]]:
    """
    Resolve --ckpt references to (encoder id, encoder).

    Random encoders (random:SEED) are built at the dataset's image size.

    Raises:
        ConfigurationError: malformed reference or duplicate encoder ids
    """
    encoder_config = EncoderConfig(image_size=dataset.manifest.image_size)
    resolved = [load_encoder(spec, encoder_config) for spec in specs]
    ids = [encoder_id for _, encoder_id in resolved]
    if len(set(ids)) != len(ids):
        raise ConfigurationError("ckpt", f"encoder ids must be unique, got {ids}")
    return [(encoder_id, encoder) for encoder, encoder_id in resolved]


def run_arguments(args: argparse.Namespace) -> Dict[str, Any]:
    """Command-line arguments as plain JSON values."""
    return {
        key: value if not isinstance(value, Path) else str(value)
        for key, value in sorted(vars(args).items())
        if key not in _INTERNAL_ARGS
    }


def output_path(args: argparse.Namespace) -> Path:
    """--out, or <artifact root>/<command> when it was not given."""
    if args.out:
        return Path(args.out)
    return Path(get_settings().artifact_root) / args.command


def prepare_output(args: argparse.Namespace, configs: Dict[str, BaseModel]) -> Path:
    """Create the artifact directory and write its run.json echo."""
    out_dir = check_directory(output_path(args))
    echo_config(out_dir, args.command, run_arguments(args), configs)
    return out_dir


__all__ = [
    "add_common_options",
    "dataset_sim",
    "load_section",
    "open_dataset",
    "output_path",
    "prepare_output",
    "resolve_encoders",
    "run_arguments",
]
