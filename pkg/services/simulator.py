#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Kinematic tabletop simulator.

Actions integrate directly into the end-effector pose, so the pose change over
any clamp-free, wrap-free segment is exactly the sum of the applied motion
offsets. Every function here is pure: the same inputs give bit-identical outputs.
"""

import logging
import math
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial.transform import Rotation

from config import SimConfig
from exceptions import ConfigurationError
from models import (
    COLORS,
    DIRECTIONS,
    TEMPLATES,
    Action,
    Block,
    EEPose,
    Instruction,
    WorldState,
)
from utils import make_rng
from validators import parse_instruction, validate_action

logger = logging.getLogger(__name__)

DEFAULT_SIM = SimConfig()

# RNG stream tags under an episode seed
_RESET_STREAM = 0

_BLOCK_REGION = (0.3, 0.7)
_EE_REGION = (0.2, 0.8)
_EE_Z_RANGE = (0.08, 0.16)
_PSI_RANGE = (-math.pi / 4, math.pi / 4)
_MIN_BLOCK_SPACING = 0.12
_MIN_EE_CLEARANCE = 0.1
_MAX_TRIES = 10_000
_REST_TOLERANCE = 1e-6

TaskSpec = Union[Instruction, str, None]


def clamp(value: float, low: float, high: float) -> float:
    """Clamp without touching in-range values (keeps additivity exact)."""
    if value < low:
        return low
    if value > high:
        return high
    return value


def wrap_angle(angle: float) -> float:
    """Wrap to (-pi, pi]; in-range angles are returned unchanged."""
    if -math.pi < angle <= math.pi:
        return angle
    wrapped = math.fmod(angle + math.pi, 2.0 * math.pi)
    if wrapped <= 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


def lateral_distance(a: Sequence[float], b: Sequence[float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def resolve_instruction(task: TaskSpec, rng: np.random.Generator) -> Instruction:
    """Turn an Instruction, instruction key, template id or None into an Instruction."""
    if isinstance(task, Instruction):
        return parse_instruction(task)
    if task is None:
        template = str(rng.choice(sorted(TEMPLATES)))
    elif ":" in task:
        return parse_instruction(task)
    else:
        template = task
    if template not in TEMPLATES:
        raise ConfigurationError("task", f"unknown template id '{template}'")

    color = str(rng.choice(COLORS))
    if template == "stack":
        others = [c for c in COLORS if c != color]
        return Instruction(template, (color, str(rng.choice(others))))
    if template == "place":
        return Instruction(template, (color, str(rng.choice(DIRECTIONS))))
    return Instruction(template, (color,))


def _sample_blocks(
    instr: Instruction, rng: np.random.Generator, config: SimConfig
) -> Tuple[Block, ...]:
    colors = [instr.color]
    if instr.target_color is not None:
        colors.append(instr.target_color)
    remaining = [c for c in COLORS if c not in colors]
    rng.shuffle(remaining)
    colors.extend(remaining[: config.n_blocks - len(colors)])

    blocks = []
    for color in colors:
        edge = float(rng.uniform(config.block_edge_min, config.block_edge_max))
        for _ in range(_MAX_TRIES):
            x, y = (float(v) for v in rng.uniform(*_BLOCK_REGION, size=2))
            spacing_ok = all(
                lateral_distance((x, y), b.position)
                >= max(_MIN_BLOCK_SPACING, (edge + b.edge) / 2.0)
                for b in blocks
            )
            if spacing_ok:
                blocks.append(Block(color, (x, y, edge / 2.0), edge))
                break
        else:
            raise ConfigurationError("n_blocks", "cannot place blocks without overlap")
    return tuple(blocks)


def _sample_ee(blocks: Tuple[Block, ...], rng: np.random.Generator) -> EEPose:
    for _ in range(_MAX_TRIES):
        x, y = (float(v) for v in rng.uniform(*_EE_REGION, size=2))
        z = float(rng.uniform(*_EE_Z_RANGE))
        psi = float(rng.uniform(*_PSI_RANGE))
        if all(lateral_distance((x, y), b.position) >= _MIN_EE_CLEARANCE for b in blocks):
            return EEPose(x, y, z, 0.0, 0.0, psi)
    raise ConfigurationError("reset", "cannot place end-effector away from blocks")


def reset_episode(
    seed: int, task: TaskSpec = None, config: SimConfig = DEFAULT_SIM
) -> Tuple[WorldState, Instruction]:
    """
    Start an episode.

    Args:
        seed: episode seed; the result is a pure function of (seed, task, config)
        task: Instruction, instruction key, template id, or None for a random template

    Returns:
        (initial state, resolved instruction)
    """
    if seed < 0:
        raise ConfigurationError("seed", "must be a non-negative integer")
    rng = make_rng(seed, _RESET_STREAM)
    instr = resolve_instruction(task, rng)
    blocks = _sample_blocks(instr, rng, config)
    ee = _sample_ee(blocks, rng)
    state = WorldState(
        ee=ee,
        gripper_width=config.gripper_max_width,
        held=None,
        blocks=blocks,
        rng_tag=f"seed={seed}",
    )
    return state, instr


def reset(seed: int, task: TaskSpec = None, config: SimConfig = DEFAULT_SIM) -> WorldState:
    """Initial WorldState for an episode seed (see reset_episode)."""
    return reset_episode(seed, task, config)[0]


def _rest_height(block: Block, others: Sequence[Block]) -> float:
    x, y, _ = block.position
    support = [
        other.top
        for other in others
        if abs(other.position[0] - x) <= other.edge / 2.0
        and abs(other.position[1] - y) <= other.edge / 2.0
    ]
    base = max(support) if support else 0.0
    return base + block.edge / 2.0


def step(state: WorldState, action: Action, config: SimConfig = DEFAULT_SIM) -> WorldState:
    """
    Apply one relative end-effector command.

    Each motion component is clipped to [-max_step, max_step] before it is
    integrated, so no caller can move the end-effector further than the cap.
    """
    validate_action(action)
    ee = state.ee
    cap = config.max_step
    dx, dy, dz = (clamp(v, -cap, cap) for v in action.d_pos)
    dphi, dtheta, dpsi = (clamp(v, -cap, cap) for v in action.d_rot)
    new_ee = EEPose(
        clamp(ee.x + dx, 0.0, 1.0),
        clamp(ee.y + dy, 0.0, 1.0),
        clamp(ee.z + dz, 0.0, config.z_max),
        wrap_angle(ee.phi + dphi),
        wrap_angle(ee.theta + dtheta),
        wrap_angle(ee.psi + dpsi),
    )
    ee_pos = (new_ee.x, new_ee.y, new_ee.z)

    blocks = list(state.blocks)
    held = state.held
    width = state.gripper_width
    if held is not None:
        blocks[held] = blocks[held].moved_to(ee_pos)

    if action.g == 1:
        if held is None:
            was_open = state.gripper_width >= config.gripper_max_width
            candidate = _attach_candidate(blocks, ee_pos, config) if was_open else None
            if candidate is None:
                width = 0.0
            else:
                held = candidate
                width = blocks[candidate].edge
                blocks[candidate] = blocks[candidate].moved_to(ee_pos)
    else:
        if held is not None:
            dropped = blocks[held]
            others = [b for i, b in enumerate(blocks) if i != held]
            x, y, _ = dropped.position
            blocks[held] = dropped.moved_to((x, y, _rest_height(dropped, others)))
            held = None
        width = config.gripper_max_width

    return WorldState(
        ee=new_ee, gripper_width=width, held=held, blocks=tuple(blocks), rng_tag=state.rng_tag
    )


def _attach_candidate(
    blocks: Sequence[Block], ee_pos: Tuple[float, float, float], config: SimConfig
) -> Optional[int]:
    best, best_dist = None, math.inf
    for i, block in enumerate(blocks):
        lateral = lateral_distance(block.position, ee_pos)
        vertical = abs(ee_pos[2] - block.position[2])
        if lateral <= config.attach_radius and vertical <= config.attach_radius:
            dist = math.hypot(lateral, vertical)
            if dist < best_dist:
                best, best_dist = i, dist
    return best


def axis_angle(phi: float, theta: float, psi: float) -> np.ndarray:
    """Rotation vector of R = Rz(psi) Ry(theta) Rx(phi)."""
    return Rotation.from_euler("ZYX", [psi, theta, phi]).as_rotvec()


def proprio(state: WorldState) -> np.ndarray:
    """8-dim proprioceptive state: position, axis-angle, two symmetric finger openings."""
    ee = state.ee
    finger = state.gripper_width / 2.0
    return np.concatenate(
        [
            np.array([ee.x, ee.y, ee.z], dtype=np.float64),
            axis_angle(ee.phi, ee.theta, ee.psi),
            np.array([finger, finger], dtype=np.float64),
        ]
    )


def place_target_reached(block: Block, direction: str, config: SimConfig) -> bool:
    x, y, _ = block.position
    margin = config.place_margin
    return {
        "left": x <= margin,
        "right": x >= 1.0 - margin,
        "front": y <= margin,
        "back": y >= 1.0 - margin,
    }[direction]


def is_success(state: WorldState, instr: Instruction, config: SimConfig = DEFAULT_SIM) -> bool:
    """Template-specific goal predicate."""
    src = state.block_index(instr.color)
    if src is None:
        return False
    block = state.blocks[src]

    if instr.template == "pick":
        return state.held == src and state.ee.z >= config.pick_height

    if instr.template == "stack":
        dst = state.block_index(instr.target_color)
        if dst is None or state.held == src:
            return False
        target = state.blocks[dst]
        aligned = lateral_distance(block.position, target.position) <= config.stack_tolerance
        resting = abs(block.position[2] - (target.top + block.edge / 2.0)) <= _REST_TOLERANCE
        return aligned and resting

    if instr.template == "place":
        if state.held == src:
            return False
        resting = abs(block.position[2] - block.edge / 2.0) <= _REST_TOLERANCE
        return resting and place_target_reached(block, instr.direction, config)

    if instr.template == "reach":
        if state.held is not None:
            return False
        low, high = config.reach_band
        above = state.ee.z - block.top
        near = lateral_distance(block.position, (state.ee.x, state.ee.y)) <= config.stack_tolerance
        return near and low <= above <= high

    return False
