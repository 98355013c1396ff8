"""On-disk dataset format: PNG frames, binary depths, pose/intrinsics text."""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from ..geometry import CameraIntrinsics, DepthMap, RigidPose, load_poses, save_poses

FRAME_PATTERN = "frame_{:06d}.png"
DEPTH_PATTERN = "depth_{:06d}.bin"


@dataclass
class SequenceData:
    """A loaded frame sequence plus whatever ground truth came with it."""

    frames: list[np.ndarray]              # [3, H, W] float64 in [0, 1]
    intrinsics: CameraIntrinsics
    depths: list[DepthMap] | None = None  # exact reference depths, if exported
    poses: list[RigidPose] | None = None  # world-to-camera, one per frame

    def __len__(self) -> int:
        return len(self.frames)


def save_depth_bin(path, depth: DepthMap) -> None:
    """Header line "H W\\n" then H*W little-endian float32, row-major;
    invalid pixels are NaN."""
    values = depth.values.data.astype("<f4")
    values = np.where(depth.valid, values, np.float32(np.nan))
    h, w = values.shape
    with open(path, "wb") as fh:
        fh.write(f"{h} {w}\n".encode("ascii"))
        fh.write(values.tobytes())


def load_depth_bin(path) -> DepthMap:
    raw = Path(path).read_bytes()
    nl = raw.index(b"\n")
    header = raw[:nl].decode("ascii")
    m = re.fullmatch(r"(\d+) (\d+)", header)
    if not m:
        raise ValueError(f"{path}: bad depth header {header!r}")
    h, w = int(m.group(1)), int(m.group(2))
    values = np.frombuffer(raw, dtype="<f4", count=h * w, offset=nl + 1)
    values = values.reshape(h, w).astype(np.float64)
    valid = np.isfinite(values) & (values > 0)
    return DepthMap(np.where(valid, values, 0.0), valid)


def save_frame_png(path, frame) -> None:
    img = np.asarray(frame if isinstance(frame, np.ndarray) else frame.data)
    data = np.clip(np.round(img * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(np.moveaxis(data, 0, 2), mode="RGB").save(path)


def load_frame_png(path) -> np.ndarray:
    with Image.open(path) as img:
        data = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
    return np.moveaxis(data, 2, 0)


def export_dataset(directory, frames, depths, poses: list[RigidPose],
                   intrinsics: CameraIntrinsics) -> Path:
    """Write a rendered sequence so it can be re-imported losslessly
    (images within 8-bit quantization, depths within float32)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if not (len(frames) == len(depths) == len(poses)):
        raise ValueError(f"inconsistent sequence lengths: {len(frames)} frames, "
                         f"{len(depths)} depths, {len(poses)} poses")
    for i, frame in enumerate(frames):
        save_frame_png(directory / FRAME_PATTERN.format(i), frame)
    for i, depth in enumerate(depths):
        save_depth_bin(directory / DEPTH_PATTERN.format(i), depth)
    save_poses(directory / "poses.txt", poses)
    intrinsics.save(directory / "intrinsics.txt")
    return directory


def load_dataset(directory) -> SequenceData:
    """Read a dataset directory; depths and poses are optional on disk."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"dataset directory {directory} does not exist")
    frame_paths = sorted(directory.glob("frame_*.png"))
    if not frame_paths:
        raise FileNotFoundError(f"no frame_*.png files under {directory}")
    intrinsics_path = directory / "intrinsics.txt"
    if not intrinsics_path.exists():
        raise FileNotFoundError(f"missing {intrinsics_path}")
    frames = [load_frame_png(p) for p in frame_paths]
    intrinsics = CameraIntrinsics.load(intrinsics_path)
    depth_paths = sorted(directory.glob("depth_*.bin"))
    depths = [load_depth_bin(p) for p in depth_paths] if depth_paths else None
    poses_path = directory / "poses.txt"
    poses = load_poses(poses_path) if poses_path.exists() else None
    return SequenceData(frames=frames, intrinsics=intrinsics,
                        depths=depths, poses=poses)
