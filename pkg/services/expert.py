#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Scripted phase controller used as the demonstration source.

The controller is stateless: the phase is read off the WorldState on every
call (approach above the block, descend, close, lift, transport, descend,
open). Motion offsets are clipped per component to the step cap and rounded to
float32 so a stored action reproduces the simulated motion exactly.
"""

import logging
from typing import Optional, Tuple

import numpy as np

from config import SimConfig
from exceptions import TaskInfeasibleError
from models import Action, Block, Instruction, WorldState
from services.simulator import DEFAULT_SIM, is_success, lateral_distance, step

logger = logging.getLogger(__name__)

ALIGN_TOLERANCE = 1e-3
REACH_CLEARANCE = 0.04

_PLACE_TARGETS = {
    "left": (0.15, None),
    "right": (0.85, None),
    "front": (None, 0.15),
    "back": (None, 0.85),
}


def quantize_offset(value: float, cap: float) -> float:
    """Clip to [-cap, cap] and round to a float32 value whose magnitude stays within the cap."""
    clipped = min(max(value, -cap), cap)
    q = np.float32(clipped)
    if abs(float(q)) > cap:
        q = np.nextafter(q, np.float32(0.0))
    return float(q)


def _move_toward(
    state: WorldState,
    target: Tuple[float, float, float],
    g: int,
    config: SimConfig,
    target_psi: Optional[float] = None,
) -> Action:
    ee = state.ee
    cap = config.max_step
    d_pos = tuple(
        quantize_offset(t - c, cap) for t, c in zip(target, (ee.x, ee.y, ee.z))
    )
    d_psi = 0.0 if target_psi is None else quantize_offset(target_psi - ee.psi, cap)
    return Action(d_pos, (0.0, 0.0, d_psi), g)


def _aligned_over(state: WorldState, xy: Tuple[float, float], check_psi: bool = True) -> bool:
    ee = state.ee
    if lateral_distance((ee.x, ee.y), xy) > ALIGN_TOLERANCE:
        return False
    return not check_psi or abs(ee.psi) <= ALIGN_TOLERANCE


def _grasp(state: WorldState, block: Block, config: SimConfig) -> Action:
    """Approach above the block, descend to its center and close."""
    bx, by, bz = block.position
    ee = state.ee
    if not _aligned_over(state, (bx, by)):
        return _move_toward(state, (bx, by, config.hover_z), 0, config, target_psi=0.0)
    if abs(ee.z - bz) > ALIGN_TOLERANCE:
        return _move_toward(state, (bx, by, bz), 0, config, target_psi=0.0)
    return Action.hold(1)


def _carry_to(
    state: WorldState, xy: Tuple[float, float], drop_z: float, config: SimConfig
) -> Action:
    """Lift, transport above xy, descend to drop_z and open."""
    ee = state.ee
    if not _aligned_over(state, xy, check_psi=False):
        if ee.z < config.lift_z - ALIGN_TOLERANCE:
            return _move_toward(state, (ee.x, ee.y, config.lift_z), 1, config)
        return _move_toward(state, (xy[0], xy[1], config.lift_z), 1, config)
    if abs(ee.z - drop_z) > ALIGN_TOLERANCE:
        return _move_toward(state, (xy[0], xy[1], drop_z), 1, config)
    return Action.hold(0)


def _check_feasible(state: WorldState, instr: Instruction, config: SimConfig) -> Block:
    src = state.block_index(instr.color)
    if src is None:
        raise TaskInfeasibleError(instr.key, f"no {instr.color} block in the scene")
    block = state.blocks[src]
    if instr.template == "stack":
        if instr.target_color == instr.color:
            raise TaskInfeasibleError(instr.key, "cannot stack a block on itself")
        dst = state.block_index(instr.target_color)
        if dst is None:
            raise TaskInfeasibleError(instr.key, f"no {instr.target_color} block in the scene")
        if state.blocks[dst].top + block.edge / 2.0 > config.z_max:
            raise TaskInfeasibleError(instr.key, "stack target is above the workspace ceiling")
    if instr.template == "reach" and state.held != src and block.top + REACH_CLEARANCE > config.z_max:
        raise TaskInfeasibleError(instr.key, "reach target is above the workspace ceiling")
    return block


def expert_action(
    state: WorldState, instr: Instruction, config: SimConfig = DEFAULT_SIM
) -> Action:
    """
    Next action of the scripted expert.

    Args:
        state: current world state
        instr: instruction to accomplish

    Returns:
        Action with float32-representable motion offsets within the step cap

    Raises:
        TaskInfeasibleError: the instructed block or target cannot be reached
    """
    block = _check_feasible(state, instr, config)
    src = state.block_index(instr.color)

    if is_success(state, instr, config):
        return Action.hold(1 if state.held is not None else 0)

    if state.held is not None and state.held != src:
        return Action.hold(0)

    if instr.template == "reach":
        bx, by, _ = block.position
        return _move_toward(state, (bx, by, block.top + REACH_CLEARANCE), 0, config, target_psi=0.0)

    if state.held != src:
        return _grasp(state, block, config)

    ee = state.ee
    if instr.template == "pick":
        return _move_toward(state, (ee.x, ee.y, config.lift_z), 1, config)

    if instr.template == "stack":
        target = state.blocks[state.block_index(instr.target_color)]
        tx, ty, _ = target.position
        return _carry_to(state, (tx, ty), target.top + block.edge / 2.0, config)

    px, py = _PLACE_TARGETS[instr.direction]
    xy = (ee.x if px is None else px, ee.y if py is None else py)
    return _carry_to(state, xy, block.edge / 2.0, config)


def run_expert_episode(
    state: WorldState, instr: Instruction, max_steps: int, config: SimConfig = DEFAULT_SIM
):
    """
    Roll the expert out until success or the step cap.

    Returns:
        (states, actions, success) where states has one more entry than actions
    """
    states = [state]
    actions = []
    for _ in range(max_steps):
        if is_success(state, instr, config):
            return states, actions, True
        action = expert_action(state, instr, config)
        state = step(state, action, config)
        states.append(state)
        actions.append(action)
    success = is_success(state, instr, config)
    if not success:
        logger.debug(f"Expert did not finish '{instr.key}' within {max_steps} steps")
    return states, actions, success


__all__ = ["ALIGN_TOLERANCE", "expert_action", "quantize_offset", "run_expert_episode"]
