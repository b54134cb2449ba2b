#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Chunk sampling, inverse-dynamics samples and Pseudo Time Reversal (PTR).

A reversed sample swaps the observation pair and replaces the chunk
(a_t, ..., a_{t+H-1}) with (a'_{t+H-1}, ..., a'_t), where a' negates the six
motion offsets and keeps the gripper command of the same action.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from exceptions import ActionIndexError, DatasetError
from models import GRIPPER_INDEX, MOTION_DIM, VOCABULARY_INDEX, InvDynSample, Trajectory
from utils import make_rng
from validators import validate_probability

logger = logging.getLogger(__name__)

# stream tag for the fixed (non-resampled) reversal decision
_FIXED_PTR_STREAM = 3


def last_valid_start(length: int, horizon: int) -> int:
    """Largest t with t + H <= T - 1 (negative when the trajectory is too short)."""
    return length - 1 - horizon


def make_invdyn_sample(
    traj: Trajectory, t: int, horizon: int, views: Optional[Sequence[str]] = None
) -> InvDynSample:
    """
    Forward sample (o_t, o_{t+H}, a_{t:t+H}).

    Raises:
        ActionIndexError: t < 0 or t + H > T - 1
    """
    if horizon < 1 or t < 0 or t > last_valid_start(traj.length, horizon):
        raise ActionIndexError(t, horizon, traj.length)
    views = list(views) if views is not None else sorted(traj.observations)
    return InvDynSample(
        obs_first={v: traj.observations[v][t] for v in views},
        obs_second={v: traj.observations[v][t + horizon] for v in views},
        chunk=np.array(traj.actions[t : t + horizon], copy=True),
        reversed=False,
        source=(traj.traj_id, t),
    )


def reverse_chunk(chunk: np.ndarray) -> np.ndarray:
    """Reverse the order of a chunk and negate its motion offsets; gripper values stay with their action."""
    reversed_chunk = np.array(chunk[::-1], copy=True)
    reversed_chunk[..., :MOTION_DIM] = -reversed_chunk[..., :MOTION_DIM]
    return reversed_chunk


def ptr_reverse(sample: InvDynSample) -> InvDynSample:
    return InvDynSample(
        obs_first=sample.obs_second,
        obs_second=sample.obs_first,
        chunk=reverse_chunk(sample.chunk),
        reversed=not sample.reversed,
        source=sample.source,
    )


def maybe_ptr(sample: InvDynSample, p_rev: float, rng: np.random.Generator) -> InvDynSample:
    """
    Reverse with probability p_rev.

    Exactly one uniform draw is consumed per call regardless of p_rev, so the
    stream stays aligned across settings.
    """
    p_rev = validate_probability("p_rev", p_rev)
    if rng.random() < p_rev:
        return ptr_reverse(sample)
    return sample


def fixed_ptr_decision(seed: int, traj_id: int, t: int, p_rev: float) -> bool:
    """Reversal decision that is a fixed function of (seed, trajectory, t)."""
    p_rev = validate_probability("p_rev", p_rev)
    return bool(make_rng(seed, _FIXED_PTR_STREAM, traj_id, t).random() < p_rev)


class IndexSampler:
    """
    Uniform sampler over valid (trajectory, t) start indices for a horizon.

    Trajectories shorter than H + 1 contribute no indices.
    """

    def __init__(self, trajectories: Sequence[Trajectory], horizon: int):
        self.trajectories = list(trajectories)
        self.horizon = horizon
        table = [
            (i, t)
            for i, traj in enumerate(self.trajectories)
            for t in range(last_valid_start(traj.length, horizon) + 1)
        ]
        if not table:
            raise DatasetError(f"no trajectory is long enough for horizon {horizon}")
        self._table = np.asarray(table, dtype=np.int64)
        skipped = sum(1 for traj in self.trajectories if last_valid_start(traj.length, horizon) < 0)
        if skipped:
            logger.warning(f"{skipped} trajectories are too short for horizon {horizon}")

    def __len__(self) -> int:
        return len(self._table)

    def sample(self, rng: np.random.Generator, batch_size: int) -> List[Tuple[int, int]]:
        rows = rng.integers(0, len(self._table), size=batch_size)
        return [(int(i), int(t)) for i, t in self._table[rows]]

    def all_indices(self) -> List[Tuple[int, int]]:
        return [(int(i), int(t)) for i, t in self._table]


@dataclass
class ChunkBatch:
    """Collated numpy batch: current and future frames per view, chunks, instruction ids."""

    current: Dict[str, np.ndarray]
    future: Dict[str, np.ndarray]
    chunks: np.ndarray
    instruction_ids: np.ndarray
    reversed: np.ndarray


def collate_samples(
    samples: Sequence[InvDynSample], instruction_keys: Sequence[str]
) -> ChunkBatch:
    views = sorted(samples[0].obs_first)
    return ChunkBatch(
        current={v: np.stack([s.obs_first[v] for s in samples]) for v in views},
        future={v: np.stack([s.obs_second[v] for s in samples]) for v in views},
        chunks=np.stack([s.chunk for s in samples]).astype(np.float32),
        instruction_ids=np.asarray([VOCABULARY_INDEX[k] for k in instruction_keys], dtype=np.int64),
        reversed=np.asarray([s.reversed for s in samples], dtype=bool),
    )


def gripper_sequence(chunk: np.ndarray) -> np.ndarray:
    return np.asarray(chunk)[..., GRIPPER_INDEX]
