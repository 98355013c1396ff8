"""Differentiable bilinear sampling and the full view-synthesis composite."""
from __future__ import annotations

import numpy as np

from ..autodiff import Tensor, as_tensor, make_op
from .camera import Z_MIN, CameraIntrinsics, backproject, project
from .depthmaps import DepthMap
from .pose import RigidPose


def grid_sample_bilinear(image, coords) -> tuple[Tensor, np.ndarray]:
    """Sample ``image`` [C, H, W] at continuous pixel ``coords`` [2, H', W'].

    Bilinear interpolation with clamp-to-edge values; the returned mask
    marks samples whose coordinates fall inside [0, W-1] x [0, H-1].
    Differentiable with respect to both the image and the coordinates
    (coordinate gradients vanish in the clamped region).
    """
    image = as_tensor(image)
    coords = as_tensor(coords)
    if image.ndim != 3:
        raise ValueError(f"image must be [C, H, W], got {image.shape}")
    if coords.ndim != 3 or coords.shape[0] != 2:
        raise ValueError(f"coords must be [2, H, W], got {coords.shape}")
    c, h, w = image.shape
    out_hw = coords.shape[1:]

    u = coords.data[0]
    v = coords.data[1]
    in_u = (u >= 0) & (u <= w - 1)
    in_v = (v >= 0) & (v <= h - 1)
    valid = in_u & in_v

    uc = np.clip(u, 0, w - 1)
    vc = np.clip(v, 0, h - 1)
    x0 = np.clip(np.floor(uc).astype(np.intp), 0, max(w - 2, 0))
    y0 = np.clip(np.floor(vc).astype(np.intp), 0, max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fu = (uc - x0).astype(image.dtype)
    fv = (vc - y0).astype(image.dtype)

    i00 = image.data[:, y0, x0]
    i01 = image.data[:, y0, x1]
    i10 = image.data[:, y1, x0]
    i11 = image.data[:, y1, x1]
    top = i00 + fu * (i01 - i00)
    bottom = i10 + fu * (i11 - i10)
    out = top + fv * (bottom - top)

    corners = ((y0, x0, (1 - fv) * (1 - fu)), (y0, x1, (1 - fv) * fu),
               (y1, x0, fv * (1 - fu)), (y1, x1, fv * fu))

    def backward(g):
        d_image = np.zeros_like(image.data)
        flat = d_image.reshape(c, h * w)
        for ys, xs, wgt in corners:
            idx = (ys * w + xs).ravel()
            contrib = (g * wgt).reshape(c, -1)
            for ch in range(c):
                flat[ch] += np.bincount(idx, weights=contrib[ch], minlength=h * w)
        # d/du is the horizontal finite difference of the interpolant
        du = ((1 - fv) * (i01 - i00) + fv * (i11 - i10)) * g
        dv = ((1 - fu) * (i10 - i00) + fu * (i11 - i01)) * g
        d_coords = np.stack([du.sum(axis=0) * in_u, dv.sum(axis=0) * in_v])
        return (d_image, d_coords)

    out_t = make_op(out.reshape((c,) + out_hw), (image, coords), backward, "grid_sample")
    return out_t, valid


def synthesize_view(source, depth_ref: DepthMap, pose_ref_to_src: RigidPose,
                    intrinsics: CameraIntrinsics,
                    z_min: float = Z_MIN) -> tuple[Tensor, np.ndarray]:
    """Reconstruct the reference view by warping ``source`` through the
    reference depth and the relative pose (backproject, transform, project,
    bilinear sample). Differentiable in depth, pose and source.
    """
    source = as_tensor(source)
    points = backproject(depth_ref.values, intrinsics)
    coords, _, proj_valid = project(points, pose_ref_to_src, intrinsics, z_min)
    sampled, sample_valid = grid_sample_bilinear(source, coords)
    valid = depth_ref.valid & proj_valid & sample_valid
    return sampled, valid
