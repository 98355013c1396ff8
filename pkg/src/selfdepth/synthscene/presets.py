"""Ready-made scenes and trajectories for tests and the CLI.

The default desk resolution is 96x64 (the 1.5:1-ish aspect keeps runtimes
small); the camera flies laterally with a downward-style pitch so depth
varies smoothly across the image.
"""
from __future__ import annotations

import numpy as np

from ..geometry import CameraIntrinsics
from .scene import HeightField, SceneSpec, TextureSpec, Trajectory, make_linear_trajectory

DEFAULT_WIDTH = 96
DEFAULT_HEIGHT = 64

SCENE_NAMES = ("plane", "plane_box", "hills")


def default_intrinsics(width: int = DEFAULT_WIDTH,
                       height: int = DEFAULT_HEIGHT) -> CameraIntrinsics:
    focal = width * 5.0 / 6.0
    return CameraIntrinsics(focal, focal, (width - 1) / 2.0, (height - 1) / 2.0,
                            width, height)


def preset_scene(name: str, seed: int = 0) -> SceneSpec:
    texture = TextureSpec(seed=seed)
    if name == "plane":
        return SceneSpec(plane_z=8.0, texture=texture)
    if name == "plane_box":
        return SceneSpec(plane_z=8.0,
                         boxes=(((-1.2, 0.2, 5.8), (1.2, 2.2, 8.0)),),
                         texture=texture)
    if name == "hills":
        rng = np.random.default_rng(seed + 101)
        grid = 1.5 * rng.uniform(size=(9, 9))
        grid[0, :] = grid[-1, :] = grid[:, 0] = grid[:, -1] = 0.0
        hf = HeightField(origin=(-8.0, -2.0), cell=2.0,
                         values=tuple(tuple(row) for row in grid), base_z=8.0)
        return SceneSpec(height_field=hf, texture=texture)
    raise ValueError(f"unknown scene {name!r}, expected one of {SCENE_NAMES}")


def preset_trajectory(num_frames: int,
                      intrinsics: CameraIntrinsics | None = None,
                      step_x: float = 0.16,
                      pitch_deg: float = 35.0) -> Trajectory:
    intrinsics = intrinsics or default_intrinsics()
    return make_linear_trajectory(num_frames, intrinsics,
                                  start=(0.0, -1.0, 0.0),
                                  step=(step_x, 0.0, 0.0),
                                  pitch_deg=pitch_deg)
