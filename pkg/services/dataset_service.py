#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Demonstration dataset generation and loading.

A dataset directory holds manifest.json and one binary record per trajectory
under trajectories/. Generation is deterministic in the dataset seed and
independent of the worker count: attempt k uses the episode seed derived from
(dataset seed, k), and successful attempts are kept in attempt order.
"""

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from config import FORMAT_VERSION, VIEW_NAMES, GenerateConfig
from exceptions import DatasetError, TaskInfeasibleError
from models import (
    MOTION_DIM,
    ActionStats,
    DatasetManifest,
    Trajectory,
    TrajectoryEntry,
)
from performance import PhaseTimer
from services.expert import expert_action, run_expert_episode
from services.rendering import render
from services.simulator import is_success, proprio, reset_episode, step
from services.trajectory_io import load_trajectory, save_trajectory, trajectory_filename
from utils import PathLike, atomic_write_text, check_directory, derive_seed, make_rng

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
TRAJECTORY_DIR = "trajectories"
STATS_EPS = 1e-8

# stream tag for the train/validation split
_SPLIT_STREAM = 1


def simulate_demonstration(
    episode_seed: int, task: str, config: GenerateConfig, traj_id: int = -1
) -> Optional[Trajectory]:
    """
    Roll out the expert for one episode and record it.

    The terminal observation is recorded with a no-op hold action, and short
    episodes are padded with further holds up to config.min_length.

    Returns:
        The trajectory, or None when the expert fails or the task is infeasible
    """
    sim = config.sim
    state, instr = reset_episode(episode_seed, task, sim)
    try:
        states, actions, success = run_expert_episode(state, instr, config.horizon_max - 1, sim)
        if not success:
            return None
        final = states[-1]
        hold = expert_action(final, instr, sim)
    except TaskInfeasibleError as e:
        logger.debug(f"Skipping episode seed {episode_seed}: {e.message}")
        return None

    actions.append(hold)
    while len(actions) < config.min_length:
        final = step(final, hold, sim)
        states.append(final)
        actions.append(hold)
    if not is_success(states[-1], instr, sim):
        return None

    return Trajectory(
        traj_id=traj_id,
        instruction=instr,
        episode_seed=episode_seed,
        observations={
            view: np.stack([render(s, view, sim) for s in states]) for view in VIEW_NAMES
        },
        actions=np.stack([a.to_array() for a in actions]).astype(np.float32),
        states=np.stack([proprio(s) for s in states]).astype(np.float32),
        poses=np.stack([s.ee.as_array() for s in states]),
    )


def _simulate_attempt(job) -> Optional[Trajectory]:
    episode_seed, task, config_data = job
    return simulate_demonstration(episode_seed, task, GenerateConfig.model_validate(config_data))


def compute_action_stats(
    source: Iterable[Union[Trajectory, np.ndarray]], eps: float = STATS_EPS
) -> ActionStats:
    """
    Per-dimension mean and population std of the six motion components.

    Args:
        source: trajectories (their actions are used) or raw (N, 7) action arrays

    Raises:
        DatasetError: no actions
    """
    blocks = [np.asarray(getattr(item, "actions", item), dtype=np.float64) for item in source]
    blocks = [b.reshape(-1, b.shape[-1]) for b in blocks if b.size]
    if not blocks:
        raise DatasetError("cannot compute action statistics of an empty dataset")
    motion = np.concatenate(blocks)[:, :MOTION_DIM]
    mean = motion.mean(axis=0)
    std = motion.std(axis=0)
    floored = std < eps
    if floored.any():
        logger.info(f"Action std floored at {eps} for dims {np.flatnonzero(floored).tolist()}")
    return ActionStats(
        mean=[float(v) for v in mean],
        std=[float(v) for v in std],
        floored=[bool(v) for v in floored],
        eps=eps,
    )


def split_ids(n_traj: int, val_fraction: float, seed: int):
    """Seeded train/validation split of trajectory ids (both sorted)."""
    n_val = int(round(n_traj * val_fraction))
    if val_fraction > 0 and n_traj >= 2:
        n_val = min(max(n_val, 1), n_traj - 1)
    else:
        n_val = 0
    order = make_rng(seed, _SPLIT_STREAM).permutation(n_traj)
    val = sorted(int(i) for i in order[:n_val])
    train = sorted(int(i) for i in order[n_val:])
    return train, val


def _collect(config: GenerateConfig) -> List[Trajectory]:
    target = config.n_traj
    max_attempts = config.max_attempts_factor * target
    config_data = config.model_dump(mode="json")
    kept: List[Trajectory] = []
    attempt = 0
    batch = max(config.workers * 4, 1)

    executor = ProcessPoolExecutor(max_workers=config.workers) if config.workers > 1 else None
    try:
        while len(kept) < target and attempt < max_attempts:
            jobs = [
                (derive_seed(config.seed, k), config.tasks[k % len(config.tasks)], config_data)
                for k in range(attempt, min(attempt + batch, max_attempts))
            ]
            attempt += len(jobs)
            results = executor.map(_simulate_attempt, jobs) if executor else map(_simulate_attempt, jobs)
            for traj in results:
                if traj is not None and len(kept) < target:
                    traj.traj_id = len(kept)
                    kept.append(traj)
    finally:
        if executor is not None:
            executor.shutdown()

    if len(kept) < target:
        raise DatasetError(
            f"infeasible task mix: {len(kept)} of {target} successful demonstrations "
            f"after {max_attempts} attempts",
            {"tasks": config.tasks, "kept": len(kept), "attempts": max_attempts},
        )
    logger.info(f"Kept {target} demonstrations from {attempt} attempts")
    return kept


def generate_dataset(config: GenerateConfig, out_dir: PathLike) -> DatasetManifest:
    """
    Generate N successful expert demonstrations and write the dataset directory.

    Raises:
        DatasetError: infeasible task mix or unwritable output path
    """
    out_dir = Path(out_dir)
    with PhaseTimer(f"generate {config.n_traj} trajectories"):
        trajectories = _collect(config)

    train_ids, val_ids = split_ids(len(trajectories), config.val_fraction, config.seed)
    stats = compute_action_stats(trajectories[i] for i in train_ids)

    entries = []
    try:
        record_dir = check_directory(out_dir / TRAJECTORY_DIR)
        for traj in trajectories:
            name = trajectory_filename(traj.traj_id)
            save_trajectory(traj, record_dir / name)
            entries.append(
                TrajectoryEntry(
                    traj_id=traj.traj_id,
                    file=f"{TRAJECTORY_DIR}/{name}",
                    instruction=traj.instruction.key,
                    length=traj.length,
                    episode_seed=traj.episode_seed,
                )
            )

        manifest = DatasetManifest(
            format_version=FORMAT_VERSION,
            seed=config.seed,
            n_traj=len(trajectories),
            tasks=list(config.tasks),
            image_size=config.sim.image_size,
            views=list(VIEW_NAMES),
            action_stats=stats,
            train_ids=train_ids,
            val_ids=val_ids,
            trajectories=entries,
            sim=config.sim.model_dump(mode="json"),
        )
        atomic_write_text(out_dir / MANIFEST_NAME, json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n")
    except OSError as e:
        raise DatasetError(f"cannot write dataset to {out_dir}: {e}", {"path": str(out_dir)})

    logger.info(f"Wrote dataset with {len(trajectories)} trajectories to {out_dir}")
    return manifest


class Dataset:
    """
    Loaded dataset directory; trajectory records are read on first use and kept.
    """

    def __init__(self, root: PathLike, manifest: DatasetManifest):
        self.root = Path(root)
        self.manifest = manifest
        self._entries: Dict[int, TrajectoryEntry] = {e.traj_id: e for e in manifest.trajectories}
        self._loaded: Dict[int, Trajectory] = {}

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def action_stats(self) -> ActionStats:
        return self.manifest.action_stats

    def ids(self, split: str = "all") -> List[int]:
        if split == "train":
            return list(self.manifest.train_ids)
        if split == "val":
            return list(self.manifest.val_ids)
        if split == "all":
            return sorted(self._entries)
        raise DatasetError(f"unknown split '{split}'")

    def trajectory(self, traj_id: int) -> Trajectory:
        if traj_id not in self._loaded:
            if traj_id not in self._entries:
                raise DatasetError(f"trajectory {traj_id} is not in the manifest")
            self._loaded[traj_id] = load_trajectory(self.root / self._entries[traj_id].file)
        return self._loaded[traj_id]

    def trajectories(self, split: str = "all") -> List[Trajectory]:
        return [self.trajectory(i) for i in self.ids(split)]

    @classmethod
    def from_trajectories(
        cls, trajectories: Sequence[Trajectory], val_fraction: float = 0.1, seed: int = 0
    ) -> "Dataset":
        """In-memory dataset (no directory), used for probes and tests."""
        train_ids, val_ids = split_ids(len(trajectories), val_fraction, seed)
        by_id = {t.traj_id: t for t in trajectories}
        manifest = DatasetManifest(
            format_version=FORMAT_VERSION,
            seed=seed,
            n_traj=len(trajectories),
            tasks=sorted({t.instruction.key for t in trajectories}),
            image_size=int(next(iter(trajectories[0].observations.values())).shape[1]),
            views=sorted(trajectories[0].observations),
            action_stats=compute_action_stats(
                trajectories[i] for i in (train_ids or range(len(trajectories)))
            ),
            train_ids=[trajectories[i].traj_id for i in train_ids],
            val_ids=[trajectories[i].traj_id for i in val_ids],
            trajectories=[
                TrajectoryEntry(t.traj_id, "", t.instruction.key, t.length, t.episode_seed)
                for t in trajectories
            ],
        )
        dataset = cls(Path("."), manifest)
        dataset._loaded = dict(by_id)
        return dataset


def load_dataset(path: PathLike) -> Dataset:
    """
    Open a dataset directory.

    Raises:
        DatasetError: missing or unreadable manifest, or unknown format version
    """
    root = Path(path)
    manifest_path = root / MANIFEST_NAME
    try:
        data = json.loads(manifest_path.read_text(encoding="utf-8"))
        manifest = DatasetManifest.from_dict(data)
    except FileNotFoundError:
        raise DatasetError(f"no {MANIFEST_NAME} in {root}", {"path": str(root)})
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise DatasetError(f"unreadable manifest {manifest_path}: {e}", {"path": str(manifest_path)})
    if manifest.format_version != FORMAT_VERSION:
        raise DatasetError(
            f"dataset format {manifest.format_version!r}, expected {FORMAT_VERSION!r}",
            {"path": str(root)},
        )
    if not manifest.trajectories:
        raise DatasetError(f"dataset {root} is empty")
    logger.debug(f"Loaded manifest for {manifest.n_traj} trajectories from {root}")
    return Dataset(root, manifest)


__all__ = [
    "Dataset",
    "compute_action_stats",
    "generate_dataset",
    "load_dataset",
    "simulate_demonstration",
    "split_ids",
]
