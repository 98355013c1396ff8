"""Training losses: photometric reprojection (SSIM + L1), edge-aware
smoothness, auto-masking of pixels warping cannot explain, and a contrastive
feature term, combined as a weighted sum."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import (ShapeError, Tensor, absolute, as_tensor,
                       avg_pool3x3_reflect, elementwise_min, exp, getitem,
                       reduce_mean, reduce_sum, relu, reshape, sqrt)

SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2
_NORM_EPS = 1e-12


@dataclass(frozen=True)
class LossWeights:
    """Weights of the four loss terms plus the SSIM mix and hinge margin.

    ``lambda3`` is an on/off toggle: the masking term is a boolean predicate
    per pixel, applied as a multiplicative mask on the reprojection mean.
    """

    lambda1: float = 1.0      # photometric reprojection
    lambda2: float = 0.001    # edge-aware smoothness
    lambda3: float = 1.0      # auto-masking toggle, 0 or 1
    lambda4: float = 0.5      # contrastive feature matching
    alpha: float = 0.85       # SSIM share of the photometric mix
    margin_m: float = 1.0     # contrastive hinge margin

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.margin_m <= 0:
            raise ValueError(f"margin must be positive, got {self.margin_m}")
        if self.lambda3 not in (0.0, 1.0, 0, 1):
            raise ValueError(f"lambda3 is an on/off toggle, got {self.lambda3}")


@dataclass
class LossBreakdown:
    """Total loss tensor plus detached per-term values for logging."""

    total: Tensor
    reprojection: float
    smoothness: float
    contrastive: float
    mask_fraction: float


def ssim(a, b) -> Tensor:
    """Per-pixel structural similarity over 3x3 mirror-padded windows."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"ssim requires equal shapes, got {a.shape} vs {b.shape}")
    mu_a = avg_pool3x3_reflect(a)
    mu_b = avg_pool3x3_reflect(b)
    var_a = avg_pool3x3_reflect(a * a) - mu_a * mu_a
    var_b = avg_pool3x3_reflect(b * b) - mu_b * mu_b
    cov = avg_pool3x3_reflect(a * b) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2)
    den = (mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return num / den


def reprojection_loss(ref, recon, alpha: float = 0.85) -> Tensor:
    """Per-pixel photometric error alpha * (1 - SSIM)/2 + (1 - alpha) * L1,
    averaged over channels. Inputs are [C, H, W] in [0, 1]."""
    ref, recon = as_tensor(ref), as_tensor(recon)
    if ref.shape != recon.shape:
        raise ShapeError(f"image shapes differ: {ref.shape} vs {recon.shape}")
    per_channel = alpha * (1.0 - ssim(ref, recon)) * 0.5 \
        + (1.0 - alpha) * absolute(ref - recon)
    return reduce_mean(per_channel, axes=0)


def min_reprojection(per_source_losses: list[Tensor]) -> Tensor:
    """Per-pixel minimum over the source reconstructions."""
    if not per_source_losses:
        raise ValueError("need at least one per-source loss map")
    out = per_source_losses[0]
    for other in per_source_losses[1:]:
        out = elementwise_min(out, other)
    return out


def smoothness_loss(disparity, image) -> Tensor:
    """Mean-normalized disparity gradients, attenuated at image edges.

    Forward differences in x and y; the image gradient magnitude (averaged
    over channels) sits inside the exponential down-weighting. Constant
    disparity gives exactly zero.
    """
    d = as_tensor(disparity)
    img = as_tensor(image)
    if d.ndim != 2 or img.ndim != 3 or img.shape[1:] != d.shape:
        raise ShapeError(f"expected disparity [H, W] and image [C, H, W], "
                         f"got {d.shape} and {img.shape}")
    mean_d = reduce_mean(d)
    if mean_d.item() <= 0:
        raise ValueError(f"mean disparity must be positive, got {mean_d.item()}")
    dn = d / mean_d
    total = None
    h, w = d.shape
    if w > 1:
        grad_x = absolute(dn[:, 1:] - dn[:, :-1])
        img_gx = reduce_mean(absolute(img[:, :, 1:] - img[:, :, :-1]), axes=0)
        total = reduce_mean(grad_x * exp(-1.0 * img_gx))
    if h > 1:
        grad_y = absolute(dn[1:, :] - dn[:-1, :])
        img_gy = reduce_mean(absolute(img[:, 1:, :] - img[:, :-1, :]), axes=0)
        term_y = reduce_mean(grad_y * exp(-1.0 * img_gy))
        total = term_y if total is None else total + term_y
    if total is None:
        raise ShapeError(f"disparity {d.shape} has no gradient positions")
    return total


def auto_mask(per_pixel_recon_loss, per_pixel_identity_loss) -> np.ndarray:
    """Keep pixels where warping strictly beats copying the raw source.

    The comparison is made on detached values: the mask is a constant
    during backward.
    """
    recon = as_tensor(per_pixel_recon_loss).data
    ident = as_tensor(per_pixel_identity_loss).data
    if recon.shape != ident.shape:
        raise ShapeError(f"loss map shapes differ: {recon.shape} vs {ident.shape}")
    return recon < ident


def contrastive_loss(features_ref, features_recon, pairs,
                     margin_m: float) -> Tensor:
    """Hinge loss on Euclidean feature distances, summed per pair.

    ``pairs`` holds (y, index_a, index_b) triples indexing flattened feature
    locations; y=1 pulls the pair together (d^2/2), y=0 pushes it beyond the
    margin (max(0, m - d)^2 / 2), any other y contributes nothing. The sum
    is divided by the pair count.
    """
    if margin_m <= 0:
        raise ValueError(f"margin must be positive, got {margin_m}")
    if not pairs:
        raise ValueError("contrastive loss needs at least one pair")
    ref = as_tensor(features_ref)
    rec = as_tensor(features_recon)
    ref = reshape(ref, (ref.shape[0], -1))
    rec = reshape(rec, (rec.shape[0], -1))
    pos = [(ia, ib) for y, ia, ib in pairs if y == 1]
    neg = [(ia, ib) for y, ia, ib in pairs if y == 0]
    total = None
    if pos:
        ia = np.array([p[0] for p in pos])
        ib = np.array([p[1] for p in pos])
        diff = getitem(ref, (slice(None), ia)) - getitem(rec, (slice(None), ib))
        term = 0.5 * reduce_sum(diff * diff)
        total = term
    if neg:
        ia = np.array([p[0] for p in neg])
        ib = np.array([p[1] for p in neg])
        diff = getitem(ref, (slice(None), ia)) - getitem(rec, (slice(None), ib))
        dist = sqrt(reduce_sum(diff * diff, axes=0) + _NORM_EPS)
        hinge = relu(margin_m - dist)
        term = 0.5 * reduce_sum(hinge * hinge)
        total = term if total is None else total + term
    if total is None:
        total = as_tensor(0.0)
    return total * (1.0 / len(pairs))


def total_loss(min_recon_map: Tensor,
               min_identity_map,
               valid: np.ndarray,
               weights: LossWeights,
               smoothness: Tensor | None = None,
               contrastive: Tensor | None = None) -> LossBreakdown:
    """Assemble the weighted sum of the active loss terms.

    The reprojection term is the mean of ``min_recon_map`` over valid pixels,
    restricted by the auto-mask when ``lambda3`` is 1. Raises if the mask
    leaves no pixel to average over.
    """
    valid = np.asarray(valid, dtype=bool)
    if valid.shape != min_recon_map.shape:
        raise ShapeError(f"validity mask {valid.shape} does not match loss map "
                         f"{min_recon_map.shape}")
    n_valid = int(valid.sum())
    if weights.lambda3:
        keep = auto_mask(min_recon_map, min_identity_map) & valid
        mask_fraction = float(keep.sum()) / max(n_valid, 1)
    else:
        keep = valid
        mask_fraction = 1.0
    n_keep = int(keep.sum())
    if n_keep == 0:
        raise ValueError(
            "no pixels survive masking: "
            f"{n_valid} valid of {valid.size}, auto-mask kept 0 "
            f"(recon err mean {float(np.mean(min_recon_map.data)):.4g})")
    reproj = reduce_sum(min_recon_map * keep.astype(min_recon_map.dtype)) * (1.0 / n_keep)

    total = weights.lambda1 * reproj
    smooth_val = 0.0
    if smoothness is not None:
        total = total + weights.lambda2 * smoothness
        smooth_val = smoothness.item()
    contr_val = 0.0
    if contrastive is not None:
        total = total + weights.lambda4 * contrastive
        contr_val = contrastive.item()
    return LossBreakdown(total=total,
                         reprojection=reproj.item(),
                         smoothness=smooth_val,
                         contrastive=contr_val,
                         mask_fraction=mask_fraction)
