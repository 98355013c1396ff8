"""Depth and pose networks plus parameter/checkpoint handling."""
from .depthnet import DepthNetConfig, DepthOutputs, depth_forward, init_depth_params
from .params import (ModelParameters, count_parameters, load_checkpoint,
                     save_checkpoint)
from .posenet import PoseNetConfig, init_pose_params, pose_forward

__all__ = [
    "DepthNetConfig", "DepthOutputs", "ModelParameters", "PoseNetConfig",
    "count_parameters", "depth_forward", "init_depth_params",
    "init_pose_params", "load_checkpoint", "pose_forward", "save_checkpoint",
]
