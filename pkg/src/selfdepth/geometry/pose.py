"""Rigid camera poses: axis-angle rotations, SE(3) transforms, pose files."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from ..autodiff import Tensor, as_tensor, make_op, matmul, reduce_sum, reshape, stack


def _sin_coeff(x: Tensor) -> Tensor:
    """sin(sqrt(x))/sqrt(x), smooth in x = angle^2 (series near zero)."""
    x = as_tensor(x)
    d = x.data
    small = d < 1e-6
    s = np.sqrt(np.where(small, 1.0, d))
    val = np.where(small, 1.0 - d / 6.0 + d * d / 120.0, np.sin(s) / s)
    deriv = np.where(small, -1.0 / 6.0 + d / 60.0,
                     (s * np.cos(s) - np.sin(s)) / (2.0 * s ** 3))
    return make_op(val, (x,), lambda g: (g * deriv,), "sin_coeff")


def _cos_coeff(x: Tensor) -> Tensor:
    """(1 - cos(sqrt(x)))/x, smooth in x = angle^2 (series near zero)."""
    x = as_tensor(x)
    d = x.data
    small = d < 1e-6
    safe = np.where(small, 1.0, d)
    s = np.sqrt(safe)
    val = np.where(small, 0.5 - d / 24.0 + d * d / 720.0, (1.0 - np.cos(s)) / safe)
    deriv = np.where(small, -1.0 / 24.0 + d / 360.0,
                     (s * np.sin(s) - 2.0 * (1.0 - np.cos(s))) / (2.0 * s ** 4))
    return make_op(val, (x,), lambda g: (g * deriv,), "cos_coeff")


def axis_angle_to_matrix(axis_angle) -> Tensor:
    """Rodrigues rotation from a 3-vector (angle in radians times unit axis).

    Differentiable everywhere including the zero vector, where the result
    is exactly the identity.
    """
    w = as_tensor(axis_angle)
    if w.shape != (3,):
        raise ValueError(f"axis_angle must be a 3-vector, got shape {w.shape}")
    zero = w[0] * 0.0
    k = stack([
        stack([zero, -w[2], w[1]]),
        stack([w[2], zero, -w[0]]),
        stack([-w[1], w[0], zero]),
    ])
    theta_sq = reduce_sum(w * w)
    a = _sin_coeff(theta_sq)
    b = _cos_coeff(theta_sq)
    eye = as_tensor(np.eye(3, dtype=w.dtype))
    return eye + a * k + b * matmul(k, k)


def _log_rotation(r: np.ndarray) -> np.ndarray:
    """Axis-angle from a rotation matrix (numeric inverse of Rodrigues)."""
    trace = np.clip((np.trace(r) - 1.0) / 2.0, -1.0, 1.0)
    theta = np.arccos(trace)
    vee = 0.5 * np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    if theta < 1e-10:
        return vee
    if np.pi - theta < 1e-6:
        # near half-turn the vee part vanishes; recover the axis from R + I
        m = (r + np.eye(3)) / 2.0
        axis = np.sqrt(np.maximum(np.diag(m), 0.0))
        i = int(np.argmax(axis))
        axis = m[:, i] / max(axis[i], 1e-12)
        axis = axis / np.linalg.norm(axis)
        # fix the sign using the off-diagonal antisymmetric part
        if np.dot(axis, vee) < 0:
            axis = -axis
        return theta * axis
    return theta / np.sin(theta) * vee


class RigidPose:
    """SE(3) transform stored as axis-angle rotation plus translation.

    Both fields are tensors so network-predicted poses stay differentiable;
    ground-truth poses simply carry constant tensors.
    """

    axis_angle: Tensor
    translation: Tensor

    def __init__(self, axis_angle, translation):
        self.axis_angle = as_tensor(axis_angle)
        self.translation = as_tensor(translation)
        if self.axis_angle.shape != (3,) or self.translation.shape != (3,):
            raise ValueError(
                f"pose needs two 3-vectors, got {self.axis_angle.shape} "
                f"and {self.translation.shape}")

    @classmethod
    def identity(cls) -> "RigidPose":
        return cls(np.zeros(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, m) -> "RigidPose":
        m = np.asarray(m, dtype=np.float64)
        if m.shape == (4, 4):
            m = m[:3, :]
        if m.shape != (3, 4):
            raise ValueError(f"pose matrix must be 3x4 or 4x4, got {m.shape}")
        return cls(_log_rotation(m[:, :3]), m[:, 3])

    def rotation(self) -> Tensor:
        return axis_angle_to_matrix(self.axis_angle)

    def matrix(self) -> np.ndarray:
        """Constant 4x4 [R|t; 0 0 0 1] (detached from the graph)."""
        out = np.eye(4)
        out[:3, :3] = self.rotation().data
        out[:3, 3] = self.translation.data
        return out

    def transform(self, points: Tensor) -> Tensor:
        """Apply [R|t] to points of shape [3, N]; differentiable throughout."""
        points = as_tensor(points)
        if points.ndim != 2 or points.shape[0] != 3:
            raise ValueError(f"points must be [3, N], got {points.shape}")
        rotated = matmul(self.rotation(), points)
        return rotated + reshape(self.translation, (3, 1))

    def inverse(self) -> "RigidPose":
        inv_rot = axis_angle_to_matrix(-1.0 * self.axis_angle)
        t = matmul(inv_rot, reshape(self.translation, (3, 1)))
        return RigidPose(-1.0 * self.axis_angle, reshape(-1.0 * t, (3,)))

    def compose(self, other: "RigidPose") -> "RigidPose":
        """self after other, i.e. x -> self(other(x)). Constant result."""
        return RigidPose.from_matrix(self.matrix() @ other.matrix())


def relative_pose(pose_from: RigidPose, pose_to: RigidPose) -> RigidPose:
    """Transform taking camera-frame points of ``pose_from`` into ``pose_to``.

    Both arguments are world-to-camera poses; the result is
    pose_to o pose_from^-1 (constant, for ground-truth bookkeeping).
    """
    return pose_to.compose(pose_from.inverse())


def save_poses(path, poses: list[RigidPose]) -> None:
    """One line per pose: 12 numbers, row-major 3x4 [R|t]."""
    lines = []
    for pose in poses:
        m = pose.matrix()[:3, :]
        lines.append(" ".join(f"{v:.12g}" for v in m.reshape(-1)))
    Path(path).write_text("\n".join(lines) + "\n")


def load_poses(path) -> list[RigidPose]:
    poses = []
    for ln, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        vals = [float(v) for v in line.split()]
        if len(vals) != 12:
            raise ValueError(f"{path}:{ln}: expected 12 numbers per pose line, got {len(vals)}")
        poses.append(RigidPose.from_matrix(np.array(vals).reshape(3, 4)))
    return poses
