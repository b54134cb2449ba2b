#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Trajectory record persistence.

Actions and proprioceptive states are stored as little-endian float32, poses as
float64 and images as zlib-compressed uint8, so a save/load roundtrip is exact.
"""

import logging
from pathlib import Path

import numpy as np

from exceptions import InputError, RecordFormatError
from models import ACTION_DIM, MOTION_DIM, STATE_DIM, Instruction, Trajectory
from services.archive import read_archive, write_archive
from utils import PathLike
from validators import validate_shape

logger = logging.getLogger(__name__)

RECORD_KIND = "trajectory"
RECORD_SUFFIX = ".sal"

_OBS_PREFIX = "obs/"


def trajectory_filename(traj_id: int) -> str:
    return f"traj_{traj_id:05d}{RECORD_SUFFIX}"


def save_trajectory(traj: Trajectory, path: PathLike) -> Path:
    """
    Write one trajectory record atomically.

    Raises:
        InputError: empty trajectory or malformed streams
    """
    length = traj.length
    if length == 0:
        raise InputError("trajectory", traj.traj_id, "length must be at least 1")
    validate_shape("actions", traj.actions.shape, (length, ACTION_DIM))
    validate_shape("states", traj.states.shape, (length, STATE_DIM))
    validate_shape("poses", traj.poses.shape, (length, MOTION_DIM))

    arrays = {}
    for view in sorted(traj.observations):
        frames = traj.observations[view]
        validate_shape(f"observations[{view}]", frames.shape, (length, -1, -1, 3))
        arrays[_OBS_PREFIX + view] = np.asarray(frames, dtype=np.uint8)
    arrays["actions"] = np.asarray(traj.actions, dtype="<f4")
    arrays["states"] = np.asarray(traj.states, dtype="<f4")
    arrays["poses"] = np.asarray(traj.poses, dtype="<f8")

    meta = {
        "traj_id": int(traj.traj_id),
        "instruction": traj.instruction.key,
        "episode_seed": int(traj.episode_seed),
        "length": int(length),
    }
    compress = [name for name in arrays if name.startswith(_OBS_PREFIX)]
    return write_archive(path, RECORD_KIND, arrays, meta, compress)


def load_trajectory(path: PathLike) -> Trajectory:
    contents = read_archive(path, kind=RECORD_KIND)
    arrays, meta = contents.arrays, contents.meta
    try:
        observations = {
            name[len(_OBS_PREFIX):]: frames
            for name, frames in arrays.items()
            if name.startswith(_OBS_PREFIX)
        }
        return Trajectory(
            traj_id=int(meta["traj_id"]),
            instruction=Instruction.from_key(meta["instruction"]),
            episode_seed=int(meta["episode_seed"]),
            observations=observations,
            actions=arrays["actions"],
            states=arrays["states"],
            poses=arrays["poses"],
        )
    except (KeyError, ValueError) as e:
        raise RecordFormatError(str(path), f"incomplete trajectory record: {e}")
