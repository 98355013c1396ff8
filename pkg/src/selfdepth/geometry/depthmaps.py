"""Depth and disparity maps, conversions, alignment, point-cloud rendering."""
from __future__ import annotations

import numpy as np

from ..autodiff import Tensor, as_tensor


class DepthMap:
    """Per-pixel camera-frame Z in scene units plus a validity mask."""

    def __init__(self, values, valid: np.ndarray | None = None):
        self.values = as_tensor(values)
        if self.values.ndim != 2:
            raise ValueError(f"depth map must be 2-d, got shape {self.values.shape}")
        if valid is None:
            valid = np.isfinite(self.values.data) & (self.values.data > 0)
        self.valid = np.asarray(valid, dtype=bool)
        if self.valid.shape != self.values.shape:
            raise ValueError(f"validity mask shape {self.valid.shape} does not "
                             f"match values {self.values.shape}")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    def valid_values(self) -> np.ndarray:
        return self.values.data[self.valid]

    def to_disparity(self) -> "DisparityMap":
        disp = np.zeros_like(self.values.data)
        disp[self.valid] = 1.0 / self.values.data[self.valid]
        return DisparityMap(disp, self.valid.copy())


class DisparityMap:
    """Per-pixel inverse depth plus a validity mask."""

    def __init__(self, values, valid: np.ndarray | None = None):
        self.values = as_tensor(values)
        if self.values.ndim != 2:
            raise ValueError(f"disparity map must be 2-d, got shape {self.values.shape}")
        if valid is None:
            valid = np.isfinite(self.values.data) & (self.values.data > 0)
        self.valid = np.asarray(valid, dtype=bool)
        if self.valid.shape != self.values.shape:
            raise ValueError(f"validity mask shape {self.valid.shape} does not "
                             f"match values {self.values.shape}")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    def to_depth(self) -> DepthMap:
        depth = np.zeros_like(self.values.data)
        depth[self.valid] = 1.0 / self.values.data[self.valid]
        return DepthMap(depth, self.valid.copy())


def disparity_to_depth(sigmoid_output, d_min: float, d_max: float) -> DepthMap:
    """Map network outputs in (0, 1) onto depths in [d_min, d_max].

    disp = 1/d_max + s * (1/d_min - 1/d_max); depth = 1/disp, so the map is
    strictly monotone decreasing in s and differentiable.
    """
    if not 0 < d_min < d_max:
        raise ValueError(f"need 0 < d_min < d_max, got {d_min}, {d_max}")
    s = as_tensor(sigmoid_output)
    lo = s.data.min(initial=np.inf)
    hi = s.data.max(initial=-np.inf)
    if s.size and not (0.0 < lo and hi < 1.0):
        raise ValueError(f"sigmoid output must lie in (0, 1), got range [{lo}, {hi}]")
    disp = (1.0 / d_max) + s * (1.0 / d_min - 1.0 / d_max)
    depth = 1.0 / disp
    return DepthMap(depth, np.ones(s.shape, dtype=bool))


def scale_to_reference(pred: DepthMap, ref: DepthMap, mode: str = "median") -> DepthMap:
    """Rescale predicted depths so they are metrically comparable to ``ref``.

    median: multiply by median(ref)/median(pred) over the valid overlap.
    minmax: affinely map the prediction's valid range onto the reference's.
    """
    overlap = pred.valid & ref.valid
    if not overlap.any():
        raise ValueError("no valid pixel overlap between prediction and reference")
    p = pred.values.data[overlap]
    r = ref.values.data[overlap]
    if mode == "median":
        pm = float(np.median(p))
        if pm <= 0:
            raise ValueError(f"median of predicted depths is {pm}, cannot scale")
        scale = float(np.median(r)) / pm
        return DepthMap(pred.values * scale, pred.valid.copy())
    if mode == "minmax":
        p_span = float(p.max() - p.min())
        r_lo, r_hi = float(r.min()), float(r.max())
        if p_span <= 0:
            return DepthMap(as_tensor(np.full(pred.shape, r_lo)), pred.valid.copy())
        gain = (r_hi - r_lo) / p_span
        return DepthMap((pred.values - float(p.min())) * gain + r_lo, pred.valid.copy())
    raise ValueError(f"unknown alignment mode {mode!r}, expected 'median' or 'minmax'")


_FILL_OFFSETS = sorted(
    ((di, dj) for di in range(-3, 4) for dj in range(-3, 4)
     if 0 < di * di + dj * dj <= 9),
    key=lambda o: o[0] * o[0] + o[1] * o[1])


def pointcloud_to_depth(points, projection, size: tuple[int, int],
                        fill_holes: bool = False) -> DepthMap:
    """Z-buffered splat of 3-d points through a 3x4 projection matrix.

    Each point lands on its nearest pixel; the smallest camera depth wins.
    Pixels no point hits stay invalid unless ``fill_holes`` copies the
    nearest valid neighbour within a 3-pixel radius.
    """
    proj = np.asarray(projection, dtype=np.float64)
    if proj.shape != (3, 4):
        raise ValueError(f"projection must be 3x4, got {proj.shape}")
    if abs(np.linalg.det(proj[:, :3])) < 1e-12:
        raise ValueError("projection matrix left 3x3 block is singular")
    h, w = size
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    homo = proj[:, :3] @ pts.T + proj[:, 3:4]
    z = homo[2]
    front = z > 0
    u = np.round(homo[0, front] / z[front]).astype(np.intp)
    v = np.round(homo[1, front] / z[front]).astype(np.intp)
    z = z[front]
    inside = (u >= 0) & (u < w) & (v >= 0) & (v < h)
    buf = np.full(h * w, np.inf)
    np.minimum.at(buf, v[inside] * w + u[inside], z[inside])
    depth = buf.reshape(h, w)
    valid = np.isfinite(depth)
    depth = np.where(valid, depth, 0.0)
    if fill_holes:
        src = np.where(valid, depth, np.nan)  # only splatted pixels may donate
        for di, dj in _FILL_OFFSETS:
            hole = ~valid
            if not hole.any():
                break
            shifted = np.full_like(depth, np.nan)
            shifted[max(0, di):h + min(0, di), max(0, dj):w + min(0, dj)] = \
                src[max(0, -di):h + min(0, -di), max(0, -dj):w + min(0, -dj)]
            take = hole & np.isfinite(shifted)
            depth[take] = shifted[take]
            valid |= take
    return DepthMap(depth, valid)
