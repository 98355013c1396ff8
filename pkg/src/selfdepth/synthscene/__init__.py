"""Synthetic ground-truth scenes: ray-cast frames, exact depths and poses."""
from .io import (SequenceData, export_dataset, load_dataset, load_depth_bin,
                 load_frame_png, save_depth_bin, save_frame_png)
from .presets import preset_scene, preset_trajectory
from .scene import (SKY_COLOR, HeightField, SceneSpec, TextureSpec, Trajectory,
                    cast_scene, inject_dynamic_patch, make_linear_trajectory,
                    render_sequence)

__all__ = [
    "HeightField", "SKY_COLOR", "SceneSpec", "SequenceData", "TextureSpec",
    "Trajectory", "cast_scene", "export_dataset", "inject_dynamic_patch",
    "load_dataset", "load_depth_bin", "load_frame_png",
    "make_linear_trajectory", "preset_scene", "preset_trajectory",
    "render_sequence", "save_depth_bin", "save_frame_png",
]
