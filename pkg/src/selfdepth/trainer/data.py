"""Frame sequences to training triplets, plus exact-factor resampling."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..geometry import CameraIntrinsics, DepthMap
from ..synthscene import SequenceData


@dataclass
class FrameTriplet:
    """One training sample: images at T-stride, T, T+stride with shared
    intrinsics. Pixel values live in [0, 1], layout [3, H, W]."""

    prev: np.ndarray
    center: np.ndarray
    next: np.ndarray
    intrinsics: CameraIntrinsics
    sequence_id: str = ""
    center_index: int = 0

    def __post_init__(self):
        if not (self.prev.shape == self.center.shape == self.next.shape):
            raise ValueError(f"triplet frames disagree in shape: "
                             f"{self.prev.shape}, {self.center.shape}, {self.next.shape}")
        if self.center.ndim != 3 or self.center.shape[0] != 3:
            raise ValueError(f"frames must be [3, H, W], got {self.center.shape}")
        h, w = self.center.shape[1:]
        if (self.intrinsics.height, self.intrinsics.width) != (h, w):
            raise ValueError(f"intrinsics {self.intrinsics.width}x{self.intrinsics.height} "
                             f"do not match frames {w}x{h}")


def build_triplets(sequence, stride: int = 1,
                   intrinsics: CameraIntrinsics | None = None,
                   sequence_id: str = "") -> list[FrameTriplet]:
    """One triplet per center index t with neighbours at t +/- stride.

    ``sequence`` is either a SequenceData or an ordered list of [3, H, W]
    frames (then ``intrinsics`` is required). Too-short sequences yield an
    empty list with a warning.
    """
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    if isinstance(sequence, SequenceData):
        frames = sequence.frames
        intrinsics = sequence.intrinsics
    else:
        frames = list(sequence)
        if intrinsics is None:
            raise ValueError("intrinsics required when passing a bare frame list")
    if len(frames) < 2 * stride + 1:
        warnings.warn(f"sequence of {len(frames)} frames too short for "
                      f"stride {stride}; no triplets built")
        return []
    triplets = []
    for t in range(stride, len(frames) - stride):
        triplets.append(FrameTriplet(
            prev=np.asarray(frames[t - stride]),
            center=np.asarray(frames[t]),
            next=np.asarray(frames[t + stride]),
            intrinsics=intrinsics,
            sequence_id=sequence_id,
            center_index=t))
    return triplets


def _block_mean(img: np.ndarray, fy: int, fx: int) -> np.ndarray:
    c, h, w = img.shape
    return img.reshape(c, h // fy, fy, w // fx, fx).mean(axis=(2, 4))


def resample_sequence(seq: SequenceData, width: int, height: int) -> SequenceData:
    """Downscale a sequence by exact integer factors (block averaging).

    Depth maps average only their valid pixels per block; blocks with no
    valid pixel stay invalid. Intrinsics are rescaled accordingly.
    """
    h0, w0 = seq.frames[0].shape[1:]
    if (w0, h0) == (width, height):
        return seq
    if w0 % width or h0 % height:
        raise ValueError(f"resampling {w0}x{h0} to {width}x{height} requires "
                         f"integer factors")
    fx, fy = w0 // width, h0 // height
    frames = [_block_mean(f, fy, fx) for f in seq.frames]
    depths = None
    if seq.depths is not None:
        depths = []
        for d in seq.depths:
            vals = np.where(d.valid, d.values.data, 0.0)
            vals = vals.reshape(height, fy, width, fx)
            count = d.valid.reshape(height, fy, width, fx).sum(axis=(1, 3))
            total = vals.sum(axis=(1, 3))
            valid = count > 0
            depths.append(DepthMap(np.where(valid, total / np.maximum(count, 1), 0.0), valid))
    return SequenceData(frames=frames,
                        intrinsics=seq.intrinsics.scaled(width, height),
                        depths=depths,
                        poses=seq.poses)
