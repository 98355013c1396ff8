"""Input validation helpers for the estimator and CLI surfaces."""
from __future__ import annotations

import numpy as np

from .geometry import CameraIntrinsics


def validate_frames(X, name: str = "X") -> np.ndarray:
    """Coerce a frame sequence to [N, 3, H, W] float64 in [0, 1].

    Accepts an array or list shaped [N, H, W, 3] (channels last) or
    [N, 3, H, W] (channels first); single frames may omit the leading axis.
    """
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 3:
        arr = arr[None]
    if arr.ndim != 4:
        raise ValueError(f"{name} must be a sequence of images, got ndim={arr.ndim}")
    if arr.shape[-1] == 3 and arr.shape[1] != 3:
        arr = np.moveaxis(arr, -1, 1)
    if arr.shape[1] != 3:
        raise ValueError(f"{name} must carry 3 color channels, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    lo, hi = float(arr.min()), float(arr.max())
    if lo < -1e-9 or hi > 1.0 + 1e-9:
        raise ValueError(f"{name} values must lie in [0, 1], got range [{lo}, {hi}]")
    return np.clip(arr, 0.0, 1.0)


def validate_reference_depths(y, num_frames: int, shape: tuple[int, int],
                              name: str = "y") -> list[np.ndarray]:
    """Coerce reference depths to a list of [H, W] maps; non-positive or
    non-finite entries count as invalid pixels."""
    arr = np.asarray(y, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise ValueError(f"{name} must be depth maps [N, H, W], got ndim={arr.ndim}")
    if arr.shape[0] != num_frames:
        raise ValueError(f"{name} has {arr.shape[0]} maps for {num_frames} frames")
    if arr.shape[1:] != shape:
        raise ValueError(f"{name} maps are {arr.shape[1:]}, expected {shape}")
    return [arr[i] for i in range(arr.shape[0])]


def resolve_intrinsics(intrinsics, width: int, height: int) -> CameraIntrinsics:
    """Accept CameraIntrinsics, an (fx, fy, cx, cy) tuple, or None
    (a plausible default focal of 5/6 of the width, centered)."""
    if intrinsics is None:
        focal = width * 5.0 / 6.0
        return CameraIntrinsics(focal, focal, (width - 1) / 2.0,
                                (height - 1) / 2.0, width, height)
    if isinstance(intrinsics, CameraIntrinsics):
        if (intrinsics.width, intrinsics.height) != (width, height):
            raise ValueError(f"intrinsics are for {intrinsics.width}x{intrinsics.height} "
                             f"but frames are {width}x{height}")
        return intrinsics
    try:
        fx, fy, cx, cy = (float(v) for v in intrinsics)
    except (TypeError, ValueError):
        raise ValueError("intrinsics must be CameraIntrinsics, (fx, fy, cx, cy), "
                         "or None") from None
    return CameraIntrinsics(fx, fy, cx, cy, width, height)
