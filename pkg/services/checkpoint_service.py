#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Checkpoint persistence.

Parameters are stored as little-endian float32 arrays named
"encoder/<param>", "policy/<param>" and optionally "invdyn/<param>"; Adam
moments as "optim/<index>/<key>". The header metadata carries the config echo,
step count, RNG states and the action statistics used for normalization.
"""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np
import torch

from config import VERSION, EncoderConfig, TrainConfig
from exceptions import ConfigurationError, RecordFormatError
from models import ActionStats
from services.archive import read_archive, write_archive
from services.networks import Encoder, VisuomotorModel, encoder_digest
from utils import PathLike

logger = logging.getLogger(__name__)

CHECKPOINT_KIND = "checkpoint"
CHECKPOINT_NAME = "checkpoint.sal"
RANDOM_ENCODER_PREFIX = "random:"


@dataclass
class Checkpoint:
    """Trained model plus everything needed to resume or evaluate it."""

    config: TrainConfig
    step: int
    model: VisuomotorModel
    action_stats: ActionStats
    optimizer_state: Optional[Dict[str, Any]] = None
    rng_states: Dict[str, Any] = field(default_factory=dict)
    dataset: str = ""

    @property
    def has_invdyn(self) -> bool:
        return self.model.invdyn is not None

    def strip_invdyn(self) -> "Checkpoint":
        """Inference-only copy without the inverse-dynamics head or optimizer state."""
        return replace(self, model=self.model.strip_invdyn(), optimizer_state=None)


def _module_arrays(prefix: str, module: torch.nn.Module) -> Dict[str, np.ndarray]:
    return {
        f"{prefix}/{name}": tensor.detach().cpu().to(torch.float32).numpy().astype("<f4")
        for name, tensor in module.state_dict().items()
    }


def _optimizer_arrays(state: Dict[str, Any]) -> Tuple[Dict[str, np.ndarray], list]:
    arrays = {}
    for index, entry in sorted(state["state"].items()):
        for key, value in sorted(entry.items()):
            tensor = value if torch.is_tensor(value) else torch.tensor(value)
            arrays[f"optim/{index}/{key}"] = tensor.detach().cpu().numpy()
    groups = [
        {k: (list(v) if isinstance(v, tuple) else v) for k, v in group.items()}
        for group in state["param_groups"]
    ]
    return arrays, groups


def save_checkpoint(ckpt: Checkpoint, path: PathLike) -> Path:
    arrays: Dict[str, np.ndarray] = {}
    arrays.update(_module_arrays("encoder", ckpt.model.encoder))
    arrays.update(_module_arrays("policy", ckpt.model.policy))
    if ckpt.model.invdyn is not None:
        arrays.update(_module_arrays("invdyn", ckpt.model.invdyn))

    optim_groups = None
    if ckpt.optimizer_state is not None:
        optim_arrays, optim_groups = _optimizer_arrays(ckpt.optimizer_state)
        arrays.update(optim_arrays)

    meta = {
        "tool_version": VERSION,
        "config": ckpt.config.model_dump(mode="json"),
        "step": int(ckpt.step),
        "action_stats": ckpt.action_stats.to_dict(),
        "rng_states": ckpt.rng_states,
        "optim_groups": optim_groups,
        "has_invdyn": ckpt.has_invdyn,
        "dataset": ckpt.dataset,
        "encoder_digest": encoder_digest(ckpt.model.encoder),
    }
    path = write_archive(path, CHECKPOINT_KIND, arrays, meta)
    logger.info(f"Saved checkpoint at step {ckpt.step} to {path}")
    return path


def _load_module(module: torch.nn.Module, prefix: str, arrays: Dict[str, np.ndarray], source: str) -> None:
    state = {
        name[len(prefix) + 1 :]: torch.from_numpy(np.asarray(array, dtype=np.float32))
        for name, array in arrays.items()
        if name.startswith(prefix + "/")
    }
    try:
        module.load_state_dict(state, strict=True)
    except RuntimeError as e:
        raise RecordFormatError(source, f"{prefix} parameters do not match the config: {e}")


def _optimizer_state(arrays: Dict[str, np.ndarray], groups: list) -> Dict[str, Any]:
    state: Dict[int, Dict[str, torch.Tensor]] = {}
    for name, array in arrays.items():
        if not name.startswith("optim/"):
            continue
        _, index, key = name.split("/", 2)
        state.setdefault(int(index), {})[key] = torch.from_numpy(np.array(array))
    return {"state": state, "param_groups": groups}


def load_checkpoint(path: PathLike) -> Checkpoint:
    """
    Read a checkpoint and rebuild the model.

    Raises:
        RecordFormatError: malformed record or parameters inconsistent with the config echo
    """
    source = str(path)
    contents = read_archive(path, kind=CHECKPOINT_KIND)
    meta, arrays = contents.meta, contents.arrays
    try:
        config = TrainConfig.model_validate(meta["config"])
        has_invdyn = bool(meta["has_invdyn"])
        stats = ActionStats.from_dict(meta["action_stats"])
    except (KeyError, ValueError) as e:
        raise RecordFormatError(source, f"incomplete checkpoint metadata: {e}")

    model = VisuomotorModel.build(config, with_invdyn=has_invdyn)
    _load_module(model.encoder, "encoder", arrays, source)
    _load_module(model.policy, "policy", arrays, source)
    if has_invdyn:
        _load_module(model.invdyn, "invdyn", arrays, source)

    optimizer_state = None
    if meta.get("optim_groups") is not None:
        optimizer_state = _optimizer_state(arrays, meta["optim_groups"])

    return Checkpoint(
        config=config,
        step=int(meta["step"]),
        model=model,
        action_stats=stats,
        optimizer_state=optimizer_state,
        rng_states=meta.get("rng_states", {}),
        dataset=meta.get("dataset", ""),
    )


def load_encoder(spec: str, encoder_config: Optional[EncoderConfig] = None) -> Tuple[Encoder, str]:
    """
    Resolve an encoder reference.

    Args:
        spec: checkpoint path, or "random:SEED" for a freshly initialized encoder

    Returns:
        (encoder, encoder id)
    """
    if spec.startswith(RANDOM_ENCODER_PREFIX):
        try:
            seed = int(spec[len(RANDOM_ENCODER_PREFIX) :])
        except ValueError:
            raise ConfigurationError("ckpt", f"'{spec}' must be random:<non-negative integer>")
        if seed < 0:
            raise ConfigurationError("ckpt", f"'{spec}' must be random:<non-negative integer>")
        base = encoder_config or EncoderConfig()
        encoder = Encoder(base.model_copy(update={"seed": seed}))
        return encoder, spec

    ckpt = load_checkpoint(spec)
    path = Path(spec)
    return ckpt.model.encoder, path.parent.name if path.name == CHECKPOINT_NAME else path.stem
