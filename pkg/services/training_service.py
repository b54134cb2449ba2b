#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Combined-objective training: L = L_vla + lambda_inv * L_inv.

Every step samples (trajectory, t) indices once; the same index feeds the
policy target a_{t:t+H} and the forward inverse-dynamics sample
(o_t, o_{t+H}, a_{t:t+H}), which PTR may then reverse. Index sampling and PTR
draw from separate seeded streams, and each module is initialized from its own
generator, so a bc run and an aux run with lambda_inv = 0 update the encoder
and policy identically.
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence

import numpy as np
import torch

from config import SimConfig, TrainConfig
from exceptions import ConfigurationError, DatasetError, DivergenceError
from models import GRIPPER_INDEX, MOTION_DIM, Action, ActionStats, Instruction, Observation
from performance import PhaseTimer
from services.checkpoint_service import CHECKPOINT_NAME, Checkpoint, save_checkpoint
from services.networks import VisuomotorModel, chunk_loss, instruction_ids
from services.sampling import (
    IndexSampler,
    collate_samples,
    fixed_ptr_decision,
    make_invdyn_sample,
    maybe_ptr,
    ptr_reverse,
)
from utils import PathLike, check_directory, make_rng

logger = logging.getLogger(__name__)

LOG_NAME = "train_log.csv"
LOG_COLUMNS = ("step", "L_vla", "L_inv", "total", "reversed_fraction")

# RNG stream tags under the training seed
SAMPLING_STREAM = 1
PTR_STREAM = 2

# fields that may differ between a checkpoint and the config used to resume it
_RESUMABLE_FIELDS = {"steps", "log_every"}


@dataclass
class StepRecord:
    """Loss components recorded for one optimizer step."""

    step: int
    l_vla: float
    l_inv: float
    total: float
    reversed_fraction: float

    def to_row(self) -> List:
        return [self.step, repr(self.l_vla), repr(self.l_inv), repr(self.total), repr(self.reversed_fraction)]


@dataclass
class TrainingResult:
    checkpoint: Checkpoint
    log: List[StepRecord] = field(default_factory=list)
    checkpoint_path: Optional[Path] = None

    def mean_total(self, first: Optional[int] = None, last: Optional[int] = None) -> float:
        records = self.log
        if first is not None:
            records = records[:first]
        if last is not None:
            records = records[-last:]
        return float(np.mean([r.total for r in records]))


def normalize_chunks(chunks: np.ndarray, stats: ActionStats) -> torch.Tensor:
    """z-score the motion channels; the gripper channel stays binary."""
    out = np.array(chunks, dtype=np.float64, copy=True)
    out[..., :MOTION_DIM] = stats.normalize(out[..., :MOTION_DIM])
    return torch.from_numpy(out.astype(np.float32))


def chunk_to_action(pred_chunk: np.ndarray, stats: ActionStats, max_step: float) -> Action:
    """First action of a predicted (normalized) chunk: denormalized, clipped to the step cap, gripper thresholded."""
    first = np.asarray(pred_chunk, dtype=np.float64)[0]
    motion = np.clip(stats.denormalize(first[:MOTION_DIM]), -max_step, max_step)
    g = 1.0 if first[GRIPPER_INDEX] > 0.0 else 0.0
    return Action.from_array([*motion, g])


def policy_fn_from_model(
    model: VisuomotorModel, stats: ActionStats, sim: SimConfig = SimConfig()
) -> Callable[[Observation, Instruction], Action]:
    """Closed-loop policy that executes the first action of each predicted chunk."""
    model.eval()

    @torch.no_grad()
    def act(obs: Observation, instr: Instruction) -> Action:
        views = {v: torch.from_numpy(obs[v][None]) for v in model.policy.views}
        pred = model.policy_forward(views, instruction_ids([instr]))
        return chunk_to_action(pred[0].numpy(), stats, sim.max_step)

    return act


def _check_resume(config: TrainConfig, resume: Checkpoint) -> None:
    mine = config.model_dump(mode="json", exclude=_RESUMABLE_FIELDS)
    theirs = resume.config.model_dump(mode="json", exclude=_RESUMABLE_FIELDS)
    if mine != theirs:
        changed = sorted(k for k in mine if mine[k] != theirs.get(k))
        raise ConfigurationError("resume", f"checkpoint was trained with different settings: {changed}")
    if resume.step > config.steps:
        raise ConfigurationError("steps", f"checkpoint is already at step {resume.step}")


def _set_lr(optimizer: torch.optim.Optimizer, config: TrainConfig, step: int) -> None:
    lr = config.lr
    if config.warmup_steps > 0:
        lr = config.lr * min(1.0, (step + 1) / config.warmup_steps)
    for group in optimizer.param_groups:
        group["lr"] = lr


def _append_log(path: Path, records: Sequence[StepRecord]) -> None:
    new_file = not path.exists()
    with open(path, "a", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        if new_file:
            writer.writerow(LOG_COLUMNS)
        writer.writerows(r.to_row() for r in records)


def read_train_log(path: PathLike) -> List[StepRecord]:
    with open(path, newline="", encoding="utf-8") as f:
        return [
            StepRecord(
                step=int(row["step"]),
                l_vla=float(row["L_vla"]),
                l_inv=float(row["L_inv"]),
                total=float(row["total"]),
                reversed_fraction=float(row["reversed_fraction"]),
            )
            for row in csv.DictReader(f)
        ]


def train_policy(
    config: TrainConfig,
    dataset,
    out_dir: Optional[PathLike] = None,
    resume: Optional[Checkpoint] = None,
) -> TrainingResult:
    """
    Train encoder + policy (+ inverse-dynamics head when AUX is on).

    Args:
        config: training settings; config.aux / config.ptr select the variant
        dataset: loaded Dataset; only its training split is used
        out_dir: where train_log.csv and checkpoint.sal are written (None = in memory)
        resume: checkpoint to continue from; must come from the same settings

    Raises:
        DatasetError: no training trajectory supports the horizon
        DivergenceError: a loss became non-finite
    """
    trajectories = dataset.trajectories("train")
    if not trajectories:
        raise DatasetError("training split is empty")
    horizon = config.horizon
    sampler = IndexSampler(trajectories, horizon)
    stats: ActionStats = dataset.action_stats
    views = list(config.views)

    sample_rng = make_rng(config.seed, SAMPLING_STREAM)
    ptr_rng = make_rng(config.seed, PTR_STREAM)
    if resume is not None:
        _check_resume(config, resume)
        model = resume.model
        start = resume.step
        sample_rng.bit_generator.state = resume.rng_states["sampling"]
        ptr_rng.bit_generator.state = resume.rng_states["ptr"]
        stats = resume.action_stats
    else:
        model = VisuomotorModel.build(config)
        start = 0
    if config.aux and model.invdyn is None:
        raise ConfigurationError("aux", "model has no inverse-dynamics head")
    model.train()

    optimizer = torch.optim.Adam(model.parameters(), lr=config.lr)
    if resume is not None and resume.optimizer_state is not None:
        optimizer.load_state_dict(resume.optimizer_state)

    log_path = None
    if out_dir is not None:
        log_path = check_directory(out_dir) / LOG_NAME
        if resume is None and log_path.exists():
            log_path.unlink()

    records: List[StepRecord] = []
    pending: List[StepRecord] = []
    variant = "bc" if not config.aux else ("aux-ptr" if config.use_ptr else "aux")
    logger.info(
        f"Training {variant}: {config.steps - start} steps, {len(sampler)} start indices, "
        f"lambda_inv={config.lambda_inv} p_rev={config.p_rev if config.use_ptr else 0}"
    )

    with PhaseTimer(f"train {variant} seed {config.seed}"):
        for step in range(start, config.steps):
            indices = sampler.sample(sample_rng, config.batch_size)
            forward = [make_invdyn_sample(trajectories[i], t, horizon, views) for i, t in indices]
            keys = [trajectories[i].instruction.key for i, _ in indices]

            batch = collate_samples(forward, keys)
            current = {v: torch.from_numpy(batch.current[v]) for v in views}
            vla_target = normalize_chunks(batch.chunks, stats)

            _set_lr(optimizer, config, step)
            z_cur = model.encoder.encode(current)
            l_vla = chunk_loss(
                model.policy(z_cur, torch.from_numpy(batch.instruction_ids)), vla_target, config.lambda_g
            )

            reversed_fraction = 0.0
            if config.aux:
                aux_samples = forward
                if config.use_ptr:
                    if config.ptr_resample:
                        aux_samples = [maybe_ptr(s, config.p_rev, ptr_rng) for s in forward]
                    else:
                        aux_samples = [
                            ptr_reverse(s)
                            if fixed_ptr_decision(config.seed, s.source[0], s.source[1], config.p_rev)
                            else s
                            for s in forward
                        ]
                aux_batch = collate_samples(aux_samples, keys)
                rev = torch.from_numpy(aux_batch.reversed)
                reversed_fraction = float(rev.float().mean())
                inv_target = normalize_chunks(aux_batch.chunks, stats)
                future = {v: torch.from_numpy(batch.future[v]) for v in views}
                z_fut = model.encoder.encode(future)
                mask = rev.view(-1, 1, 1)
                per_view = [
                    chunk_loss(
                        model.invdyn(
                            torch.where(mask, z_fut[v], z_cur[v]),
                            torch.where(mask, z_cur[v], z_fut[v]),
                        ),
                        inv_target,
                        config.lambda_g,
                    )
                    for v in views
                ]
                l_inv = torch.stack(per_view).mean()
                total = l_vla + config.lambda_inv * l_inv
            else:
                l_inv = None
                total = l_vla

            l_vla_value = float(l_vla.item())
            l_inv_value = float(l_inv.item()) if l_inv is not None else 0.0
            if not (math.isfinite(l_vla_value) and math.isfinite(l_inv_value)):
                raise DivergenceError(step, {"L_vla": l_vla_value, "L_inv": l_inv_value})

            optimizer.zero_grad(set_to_none=True)
            total.backward()
            optimizer.step()

            record = StepRecord(
                step=step,
                l_vla=l_vla_value,
                l_inv=l_inv_value,
                total=l_vla_value + config.lambda_inv * l_inv_value,
                reversed_fraction=reversed_fraction,
            )
            records.append(record)
            pending.append(record)
            logger.debug(
                f"step {step}: L_vla={record.l_vla:.5f} L_inv={record.l_inv:.5f} "
                f"total={record.total:.5f} rev={reversed_fraction:.2f}"
            )
            if (step + 1) % config.log_every == 0 or step + 1 == config.steps:
                window = records[-config.log_every :]
                logger.info(
                    f"step {step + 1}/{config.steps}: mean total {np.mean([r.total for r in window]):.5f}"
                )
                if log_path is not None:
                    _append_log(log_path, pending)
                pending = []

    if log_path is not None and pending:
        _append_log(log_path, pending)

    model.eval()
    checkpoint = Checkpoint(
        config=config,
        step=config.steps,
        model=model,
        action_stats=stats,
        optimizer_state=optimizer.state_dict(),
        rng_states={
            "sampling": sample_rng.bit_generator.state,
            "ptr": ptr_rng.bit_generator.state,
        },
        dataset=str(getattr(dataset, "root", "")),
    )
    result = TrainingResult(checkpoint=checkpoint, log=records)
    if out_dir is not None:
        result.checkpoint_path = save_checkpoint(checkpoint, Path(out_dir) / CHECKPOINT_NAME)
    return result


__all__ = [
    "LOG_COLUMNS",
    "StepRecord",
    "TrainingResult",
    "chunk_to_action",
    "normalize_chunks",
    "policy_fn_from_model",
    "read_train_log",
    "train_policy",
]
