"""Full forward pass for one training triplet: depth and pose prediction,
view synthesis from both sources, and the combined loss."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import (Tensor, backward, getitem, masked_fill, reduce_sum,
                       reshape, sqrt)
from .geometry import DepthMap, RigidPose, disparity_to_depth, synthesize_view
from .losses import (LossBreakdown, LossWeights, contrastive_loss,
                     min_reprojection, reprojection_loss, smoothness_loss,
                     total_loss)
from .networks import (DepthNetConfig, ModelParameters, PoseNetConfig,
                       depth_forward, init_depth_params, init_pose_params,
                       pose_forward)
from .networks.blocks import encoder_forward

_INVALID_FILL = 1e6
_NORM_EPS = 1e-12


@dataclass
class TripletForward:
    """Everything computed for one triplet, for logging and tests."""

    breakdown: LossBreakdown
    disparity: Tensor              # [H, W] sigmoid output
    depth: DepthMap
    pose_to_prev: RigidPose
    pose_to_next: RigidPose
    reconstructions: dict[str, Tensor]
    valid: np.ndarray


def init_model(config, rng: np.random.Generator | None = None,
               dtype=np.float32) -> ModelParameters:
    """Fresh depth+pose parameters for a TrainConfig-like object."""
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    params = init_depth_params(config.depth_net_config(), rng, dtype)
    init_pose_params(config.pose_net_config(), rng, dtype, params=params)
    return params


def _unit_columns(features: Tensor) -> Tensor:
    flat = reshape(features, (features.shape[0], -1))
    norms = sqrt(reduce_sum(flat * flat, axes=0, keepdims=True) + _NORM_EPS)
    return flat / norms


def _contrastive_pairs(count: int, rng: np.random.Generator):
    """All matching locations as positives plus as many shuffled negatives."""
    pairs = [(1, i, i) for i in range(count)]
    offsets = rng.integers(1, count, size=count)
    pairs += [(0, i, int((i + offsets[i]) % count)) for i in range(count)]
    return pairs


def compute_triplet_loss(triplet, params: ModelParameters,
                         depth_cfg: DepthNetConfig, pose_cfg: PoseNetConfig,
                         weights: LossWeights, d_min: float, d_max: float,
                         pair_seed: int = 0) -> TripletForward:
    """Evaluate the combined training objective on one frame triplet.

    Depth comes from the (center, next) pair; poses are predicted from the
    center to each source; both sources are warped into the center view.
    Loss terms whose weight is exactly zero are skipped entirely, so they
    contribute no gradient.
    """
    dtype = params.tensors()[0].dtype
    prev = Tensor(np.ascontiguousarray(triplet.prev, dtype=dtype))
    ref = Tensor(np.ascontiguousarray(triplet.center, dtype=dtype))
    nxt = Tensor(np.ascontiguousarray(triplet.next, dtype=dtype))
    ref_b = reshape(ref, (1,) + ref.shape)
    prev_b = reshape(prev, (1,) + prev.shape)
    nxt_b = reshape(nxt, (1,) + nxt.shape)
    intr = triplet.intrinsics

    outputs = depth_forward(ref_b, nxt_b, params, depth_cfg)
    disparity = getitem(outputs.primary, (0, 0))
    depth = disparity_to_depth(disparity, d_min, d_max)

    pose_to_prev = pose_forward(ref_b, prev_b, params, pose_cfg)[0]
    pose_to_next = pose_forward(ref_b, nxt_b, params, pose_cfg)[0]

    recon_maps = []
    identity_maps = []
    valid_any = np.zeros(depth.shape, dtype=bool)
    recons = {}
    for name, source, pose in (("prev", prev, pose_to_prev),
                               ("next", nxt, pose_to_next)):
        recon, valid = synthesize_view(source, depth, pose, intr)
        recons[name] = recon
        valid_any |= valid
        per_pixel = reprojection_loss(ref, recon, weights.alpha)
        recon_maps.append(masked_fill(per_pixel, valid, _INVALID_FILL))
        identity_maps.append(reprojection_loss(ref, source, weights.alpha))
    min_recon = min_reprojection(recon_maps)
    min_identity = min_reprojection(identity_maps)

    smooth = smoothness_loss(disparity, ref) if weights.lambda2 != 0.0 else None

    contrast = None
    if weights.lambda4 != 0.0:
        enc = depth_cfg.encoder_channels
        feats_ref = _unit_columns(encoder_forward(
            ref_b, params, "depth.enc0", enc,
            depth_cfg.first_kernel, depth_cfg.inner_kernel)[-1])
        rng = np.random.default_rng(pair_seed)
        pairs = _contrastive_pairs(feats_ref.shape[1], rng)
        terms = []
        for name in ("prev", "next"):
            recon_b = reshape(recons[name], (1,) + recons[name].shape)
            feats_rec = _unit_columns(encoder_forward(
                recon_b, params, "depth.enc0", enc,
                depth_cfg.first_kernel, depth_cfg.inner_kernel)[-1])
            terms.append(contrastive_loss(feats_ref, feats_rec, pairs,
                                          weights.margin_m))
        contrast = (terms[0] + terms[1]) * 0.5

    breakdown = total_loss(min_recon, min_identity, valid_any, weights,
                           smoothness=smooth, contrastive=contrast)
    return TripletForward(breakdown=breakdown, disparity=disparity, depth=depth,
                          pose_to_prev=pose_to_prev, pose_to_next=pose_to_next,
                          reconstructions=recons, valid=valid_any)


def predict_disparity(frame: np.ndarray, params: ModelParameters,
                      depth_cfg: DepthNetConfig) -> np.ndarray:
    """Single-image inference: the frame feeds both encoders (the minimal
    consistent reading of two-frame training vs one-frame testing).
    Returns the raw sigmoid disparity map [H, W]."""
    dtype = params.tensors()[0].dtype
    x = Tensor(np.ascontiguousarray(frame, dtype=dtype)[None])
    out = depth_forward(x, x, params, depth_cfg)
    return out.primary.data[0, 0].copy()


def predict_depth(frame: np.ndarray, params: ModelParameters,
                  depth_cfg: DepthNetConfig, d_min: float, d_max: float) -> DepthMap:
    """Single-image inference straight to a depth map."""
    sig = predict_disparity(frame, params, depth_cfg)
    return disparity_to_depth(Tensor(sig.astype(np.float64)), d_min, d_max)
