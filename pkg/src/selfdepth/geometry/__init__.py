"""Camera geometry: pinhole model, SE(3) poses, warping, depth maps."""
from .camera import Z_MIN, CameraIntrinsics, backproject, project
from .depthmaps import (DepthMap, DisparityMap, disparity_to_depth,
                        pointcloud_to_depth, scale_to_reference)
from .pose import (RigidPose, axis_angle_to_matrix, load_poses, relative_pose,
                   save_poses)
from .sampling import grid_sample_bilinear, synthesize_view

__all__ = [
    "CameraIntrinsics", "DepthMap", "DisparityMap", "RigidPose", "Z_MIN",
    "axis_angle_to_matrix", "backproject", "disparity_to_depth",
    "grid_sample_bilinear", "load_poses", "pointcloud_to_depth", "project",
    "relative_pose", "save_poses", "scale_to_reference", "synthesize_view",
]
