"""Pinhole camera model: intrinsics, backprojection, projection."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..autodiff import Tensor, as_tensor, clamp_min, reshape, stack
from .pose import RigidPose

# below this camera-frame depth a projected point counts as invalid
Z_MIN = 1e-3


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole parameters in pixels plus the image extents they apply to."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError(f"principal point ({self.cx}, {self.cy}) outside "
                             f"image {self.width}x{self.height}")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx],
                         [0.0, self.fy, self.cy],
                         [0.0, 0.0, 1.0]])

    def pixel_grid(self) -> tuple[np.ndarray, np.ndarray]:
        """(u, v) pixel-center coordinates, each of shape [H, W]."""
        us, vs = np.meshgrid(np.arange(self.width, dtype=np.float64),
                             np.arange(self.height, dtype=np.float64))
        return us, vs

    def scaled(self, width: int, height: int) -> "CameraIntrinsics":
        """Intrinsics for the same camera at a resized image."""
        sx, sy = width / self.width, height / self.height
        return CameraIntrinsics(self.fx * sx, self.fy * sy,
                                self.cx * sx, self.cy * sy, width, height)

    def projection_matrix(self, pose: RigidPose) -> np.ndarray:
        """3x4 world-to-pixel matrix K [R|t] (constant)."""
        return self.matrix @ pose.matrix()[:3, :]

    def save(self, path) -> None:
        Path(path).write_text(
            f"{self.fx:.12g} {self.fy:.12g} {self.cx:.12g} {self.cy:.12g} "
            f"{self.width} {self.height}\n")

    @classmethod
    def load(cls, path) -> "CameraIntrinsics":
        parts = Path(path).read_text().split()
        if len(parts) != 6:
            raise ValueError(f"{path}: expected 'fx fy cx cy width height', "
                             f"got {len(parts)} fields")
        return cls(float(parts[0]), float(parts[1]), float(parts[2]),
                   float(parts[3]), int(parts[4]), int(parts[5]))


def backproject(depth, intrinsics: CameraIntrinsics) -> Tensor:
    """Lift a depth map [H, W] to camera-frame points [3, H, W].

    X = (u - cx)/fx * Z, Y = (v - cy)/fy * Z, Z = depth; differentiable in
    the depth values.
    """
    z = as_tensor(depth)
    if z.shape != (intrinsics.height, intrinsics.width):
        raise ValueError(f"depth shape {z.shape} does not match intrinsics "
                         f"{intrinsics.height}x{intrinsics.width}")
    us, vs = intrinsics.pixel_grid()
    ray_x = (us - intrinsics.cx) / intrinsics.fx
    ray_y = (vs - intrinsics.cy) / intrinsics.fy
    return stack([z * ray_x, z * ray_y, z * np.ones_like(ray_x)])


def project(points: Tensor, pose: RigidPose, intrinsics: CameraIntrinsics,
            z_min: float = Z_MIN) -> tuple[Tensor, Tensor, np.ndarray]:
    """Transform camera points [3, H, W] by ``pose`` and project to pixels.

    Returns (coords [2, H, W] in pixel units, depth-in-target [H, W],
    validity mask). Points landing at target depth <= z_min are invalid;
    their coordinates are computed against a clamped depth so values stay
    finite.
    """
    points = as_tensor(points)
    if points.ndim != 3 or points.shape[0] != 3:
        raise ValueError(f"points must be [3, H, W], got {points.shape}")
    _, h, w = points.shape
    cam = pose.transform(reshape(points, (3, h * w)))
    x, y, z = cam[0], cam[1], cam[2]
    z_safe = clamp_min(z, z_min)
    u = intrinsics.fx * (x / z_safe) + intrinsics.cx
    v = intrinsics.fy * (y / z_safe) + intrinsics.cy
    coords = reshape(stack([u, v]), (2, h, w))
    depth_in_target = reshape(z, (h, w))
    valid = depth_in_target.data > z_min
    return coords, depth_in_target, valid
