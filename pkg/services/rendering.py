#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Deterministic rasterizer for the two camera views.

The static view is a top-down image of the whole workspace. The end-effector is
drawn as a wedge whose size grows with height and whose tip points along psi;
its shade encodes the gripper opening. Block brightness grows with height so a
lifted block is distinguishable from a resting one. The wrist view is a crop
centered on the end-effector, rotated with psi, whose field of view widens with
height.
"""

import math
from functools import lru_cache
from typing import Dict, Iterable, Tuple

import numpy as np

from config import VIEW_NAMES, SimConfig
from models import Observation, WorldState
from validators import validate_view

COLOR_RGB: Dict[str, Tuple[int, int, int]] = {
    "red": (200, 40, 40),
    "green": (40, 170, 60),
    "blue": (40, 70, 210),
    "yellow": (215, 195, 40),
}
TABLE_RGB = np.array([120, 110, 100], dtype=np.float64)
OFF_TABLE_RGB = np.array([30, 30, 30], dtype=np.float64)
FINGER_RGB = np.array([235, 235, 235], dtype=np.float64)

_WEDGE_BASE_PX = 3.0
_WEDGE_Z_PX = 9.0
_WRIST_BASE_HALF = 0.1
_WRIST_Z_GAIN = 0.5

_DEFAULT_SIM = SimConfig()


@lru_cache(maxsize=8)
def _pixel_grid(size: int) -> Tuple[np.ndarray, np.ndarray]:
    """Pixel-center coordinates in [0, 1] (u = column, v = row)."""
    centers = (np.arange(size, dtype=np.float64) + 0.5) / size
    v, u = np.meshgrid(centers, centers, indexing="ij")
    return u, v


def _block_shade(rgb: Tuple[int, int, int], bottom_z: float, z_max: float) -> np.ndarray:
    gain = 0.6 + 0.8 * min(max(bottom_z / z_max, 0.0), 1.0)
    return np.clip(np.array(rgb, dtype=np.float64) * gain, 0, 255)


def _blocks_by_height(state: WorldState) -> Iterable:
    return sorted(state.blocks, key=lambda b: (b.position[2], b.color))


def _inside_triangle(px: np.ndarray, py: np.ndarray, tri: np.ndarray) -> np.ndarray:
    def edge(a, b):
        return (px - a[0]) * (b[1] - a[1]) - (py - a[1]) * (b[0] - a[0])

    e0 = edge(tri[0], tri[1])
    e1 = edge(tri[1], tri[2])
    e2 = edge(tri[2], tri[0])
    return ((e0 >= 0) & (e1 >= 0) & (e2 >= 0)) | ((e0 <= 0) & (e1 <= 0) & (e2 <= 0))


def _wedge_color(state: WorldState, config: SimConfig) -> np.ndarray:
    level = 60.0 + 195.0 * state.gripper_width / config.gripper_max_width
    tilt = (abs(state.ee.phi) + abs(state.ee.theta)) / math.pi
    return np.clip(np.array([level, level, level * (1.0 - tilt)]), 0, 255)


def render_static(state: WorldState, config: SimConfig) -> np.ndarray:
    size = config.image_size
    u, v = _pixel_grid(size)
    image = np.empty((size, size, 3), dtype=np.float64)
    image[:] = TABLE_RGB

    for block in _blocks_by_height(state):
        x, y, z = block.position
        half = block.edge / 2.0
        mask = (np.abs(u - x) <= half) & (np.abs(v - y) <= half)
        image[mask] = _block_shade(COLOR_RGB[block.color], z - half, config.z_max)

    ee = state.ee
    radius = (_WEDGE_BASE_PX + _WEDGE_Z_PX * ee.z / config.z_max) / size
    tip = (ee.x + radius * math.cos(ee.psi), ee.y + radius * math.sin(ee.psi))
    left = (ee.x + 0.7 * radius * math.cos(ee.psi + 2.5), ee.y + 0.7 * radius * math.sin(ee.psi + 2.5))
    right = (ee.x + 0.7 * radius * math.cos(ee.psi - 2.5), ee.y + 0.7 * radius * math.sin(ee.psi - 2.5))
    wedge = _inside_triangle(u, v, np.array([tip, left, right]))
    image[wedge] = _wedge_color(state, config)
    return np.rint(image).astype(np.uint8)


def render_wrist(state: WorldState, config: SimConfig) -> np.ndarray:
    size = config.image_size
    u, v = _pixel_grid(size)
    ee = state.ee
    half_view = _WRIST_BASE_HALF + _WRIST_Z_GAIN * ee.z
    # local frame [-1, 1]^2 rotated by psi
    lu, lv = 2.0 * u - 1.0, 2.0 * v - 1.0
    c, s = math.cos(ee.psi), math.sin(ee.psi)
    wx = ee.x + half_view * (c * lu - s * lv)
    wy = ee.y + half_view * (s * lu + c * lv)

    image = np.empty((size, size, 3), dtype=np.float64)
    image[:] = TABLE_RGB
    off_table = (wx < 0.0) | (wx > 1.0) | (wy < 0.0) | (wy > 1.0)
    image[off_table] = OFF_TABLE_RGB

    for block in _blocks_by_height(state):
        x, y, z = block.position
        half = block.edge / 2.0
        mask = (np.abs(wx - x) <= half) & (np.abs(wy - y) <= half)
        image[mask] = _block_shade(COLOR_RGB[block.color], z - half, config.z_max)

    # finger bars at the current opening
    opening = 0.15 + 0.6 * state.gripper_width / config.gripper_max_width
    bar = (np.abs(np.abs(lu) - opening) <= 0.06) & (np.abs(lv) <= 0.25)
    image[bar] = FINGER_RGB
    return np.rint(image).astype(np.uint8)


_RENDERERS = {"static": render_static, "wrist": render_wrist}


def render(state: WorldState, view: str, config: SimConfig = _DEFAULT_SIM) -> np.ndarray:
    """Rasterize one view as an H x W x 3 uint8 image."""
    validate_view(view)
    return _RENDERERS[view](state, config)


def observe(state: WorldState, config: SimConfig = _DEFAULT_SIM, views: Iterable[str] = VIEW_NAMES) -> Observation:
    return Observation({view: render(state, view, config) for view in views})
