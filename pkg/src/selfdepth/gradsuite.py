"""Finite-difference sweep over every differentiable operation and the full
training loss on a tiny synthetic triplet. Shared by the CLI and the tests."""
from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import GradCheckReport, Tensor, grad_check
from .geometry import (DepthMap, RigidPose, axis_angle_to_matrix, backproject,
                       disparity_to_depth, grid_sample_bilinear, project,
                       synthesize_view)
from .losses import (LossWeights, contrastive_loss, reprojection_loss, smoothness_loss,
                     ssim)
from .pipeline import compute_triplet_loss, init_model
from .synthscene import preset_scene, preset_trajectory, render_sequence
from .synthscene.presets import default_intrinsics
from .trainer import FrameTriplet, TrainConfig
from .validation import resolve_intrinsics


def _op_checks(size: int, rng: np.random.Generator, eps: float, rel_tol: float):
    """One gradient check per core operation, on random small inputs."""
    n = size
    checks: list[tuple[str, GradCheckReport]] = []

    def run(name, fn, x):
        checks.append((name, grad_check(fn, Tensor(x), eps=eps, rel_tol=rel_tol)))

    def msq(t):
        return ad.reduce_mean(t * t)

    k2 = Tensor(rng.normal(size=(2, 3, 3, 3)))
    b2 = Tensor(rng.normal(size=(2,)))
    x2 = rng.normal(size=(1, 3, n, n))
    run("conv2d/input", lambda t: msq(ad.conv2d(t, k2, b2, stride=2, padding=1)), x2)
    run("conv2d/kernel", lambda t: msq(ad.conv2d(Tensor(x2), t, b2, stride=1, padding=1)),
        rng.normal(size=(2, 3, 3, 3)))
    run("conv2d/bias", lambda t: msq(ad.conv2d(Tensor(x2), k2, t, stride=1, padding=1)),
        rng.normal(size=(2,)))

    k3 = Tensor(rng.normal(size=(2, 2, 2, 3, 3)))
    x3 = rng.normal(size=(1, 2, 2, n // 2, n // 2))
    run("conv3d/input",
        lambda t: msq(ad.conv3d(t, k3, stride=1, padding=1, padding_depth=0)), x3)
    run("conv3d/kernel",
        lambda t: msq(ad.conv3d(Tensor(x3), t, stride=1, padding=1, padding_depth=0)),
        rng.normal(size=(2, 2, 2, 3, 3)))

    for mode in ("relu", "elu", "sigmoid"):
        run(f"activation/{mode}", lambda t, m=mode: msq(ad.activation(t, m)),
            rng.normal(size=(n, n)) + 0.1)
    run("upsample2x", lambda t: msq(ad.upsample2x(t)), rng.normal(size=(1, 2, n, n)))
    run("avg_pool3x3_reflect", lambda t: msq(ad.avg_pool3x3_reflect(t)),
        rng.normal(size=(3, n, n)))
    other = Tensor(rng.normal(size=(n, n)))
    run("elementwise_min", lambda t: msq(ad.elementwise_min(t, other)),
        rng.normal(size=(n, n)))
    run("concat", lambda t: msq(ad.concat([t, t * 2.0], axis=0)[1:3]),
        rng.normal(size=(4, 3)))
    run("stack", lambda t: msq(ad.stack([t, t * t], axis=1)), rng.normal(size=(3, 2)))
    run("reduce_mean", lambda t: ad.reduce_mean(t * t, axes=(0, 1)),
        rng.normal(size=(n, n)))
    mm = Tensor(rng.normal(size=(4, 3)))
    run("matmul", lambda t: msq(ad.matmul(t, mm)), rng.normal(size=(3, 4)))
    run("scalar_chain", lambda t: ad.reduce_mean(
        ad.sqrt(ad.absolute(t) + 1.0) / (t * t + 2.0) * ad.exp(t * 0.3)),
        rng.normal(size=(n,)))

    img = Tensor(rng.uniform(size=(3, n, n)))
    coords_data = np.stack([rng.uniform(0.3, n - 1.3, size=(n, n)),
                            rng.uniform(0.3, n - 1.3, size=(n, n))])
    coords = Tensor(coords_data)
    run("grid_sample/image", lambda t: msq(grid_sample_bilinear(t, coords)[0]),
        rng.uniform(size=(3, n, n)))
    run("grid_sample/coords", lambda t: msq(grid_sample_bilinear(img, t)[0]),
        coords_data)
    return checks


def _kink_margin(coords: np.ndarray) -> float:
    """Distance of warp coordinates to the nearest bilinear kink (integer
    pixel lattice, which includes the image borders)."""
    return float(np.abs(coords - np.round(coords)).min())


def _kink_free_pose(depth_data: np.ndarray, intr, axis: np.ndarray,
                    trans: np.ndarray, margin: float = 0.02) -> RigidPose:
    """Nudge the translation until no warped coordinate sits near a kink,
    so central differences see a smooth function."""
    step = np.array([0.0031, 0.0017, 0.0011])
    for bump in range(200):
        pose = RigidPose(axis, trans + bump * step)
        pts = backproject(Tensor(depth_data), intr)
        coords, _, _ = project(pts, pose, intr)
        if _kink_margin(coords.data) > margin:
            return pose
    raise RuntimeError("could not find a kink-free evaluation pose")


def _geometry_checks(size: int, rng: np.random.Generator, eps: float, rel_tol: float):
    n = size
    intr = resolve_intrinsics(None, n, n)
    checks = []

    def run(name, fn, x):
        checks.append((name, grad_check(fn, Tensor(x), eps=eps, rel_tol=rel_tol)))

    weight = Tensor(rng.normal(size=(3, 3)))
    run("axis_angle_to_matrix",
        lambda t: ad.reduce_mean(axis_angle_to_matrix(t) * weight),
        rng.normal(size=3) * 0.5)

    depth_data = rng.uniform(2.0, 4.0, size=(n, n))
    pose = _kink_free_pose(depth_data, intr,
                           np.array([0.02, -0.03, 0.01]),
                           np.array([0.1, -0.05, 0.02]))
    src = Tensor(rng.uniform(size=(3, n, n)))

    run("backproject", lambda t: ad.reduce_mean(backproject(t, intr) ** 2.0), depth_data)
    pts = backproject(Tensor(depth_data), intr)
    run("project/points",
        lambda t: ad.reduce_mean(project(t, pose, intr)[0] ** 2.0), pts.data)
    run("synthesize_view/depth",
        lambda t: ad.reduce_mean(synthesize_view(src, DepthMap(t), pose, intr)[0] ** 2.0),
        depth_data)
    run("synthesize_view/axis_angle",
        lambda t: ad.reduce_mean(synthesize_view(
            src, DepthMap(Tensor(depth_data)),
            RigidPose(t, pose.translation), intr)[0] ** 2.0),
        np.array([0.02, -0.03, 0.01]))
    run("synthesize_view/translation",
        lambda t: ad.reduce_mean(synthesize_view(
            src, DepthMap(Tensor(depth_data)),
            RigidPose(pose.axis_angle, t), intr)[0] ** 2.0),
        np.array([0.1, -0.05, 0.02]))
    run("disparity_to_depth",
        lambda t: ad.reduce_mean(disparity_to_depth(t, 0.1, 100.0).values),
        rng.uniform(0.2, 0.8, size=(n, n)))
    return checks


def _loss_checks(size: int, rng: np.random.Generator, eps: float, rel_tol: float):
    n = size
    checks = []

    def run(name, fn, x):
        checks.append((name, grad_check(fn, Tensor(x), eps=eps, rel_tol=rel_tol)))

    ref = Tensor(rng.uniform(0.1, 0.9, size=(3, n, n)))
    run("ssim", lambda t: ad.reduce_mean(ssim(t, ref)),
        rng.uniform(0.1, 0.9, size=(3, n, n)))
    run("reprojection_loss",
        lambda t: ad.reduce_mean(reprojection_loss(ref, t, 0.85)),
        rng.uniform(0.1, 0.9, size=(3, n, n)))
    run("smoothness_loss", lambda t: smoothness_loss(t, ref),
        rng.uniform(0.3, 0.8, size=(n, n)))
    feats = Tensor(rng.normal(size=(4, 6)))
    pairs = [(1, i, i) for i in range(6)] + [(0, i, (i + 2) % 6) for i in range(6)]
    run("contrastive_loss",
        lambda t: contrastive_loss(t, feats, pairs, margin_m=1.0),
        rng.normal(size=(4, 6)))
    return checks


def micro_train_config(size: int = 8, seed: int = 0) -> TrainConfig:
    """Smallest architecture-complete configuration: every weight of the
    depth and pose networks can be swept by finite differences quickly."""
    return TrainConfig(width=size, height=size, seed=seed,
                       encoder_channels=(2, 3), pose_decoder_channels=4,
                       epochs=1, batch_size=1)


def make_micro_triplet(size: int = 8, seed: int = 0) -> FrameTriplet:
    """A real rendered triplet at ``size`` x ``size``."""
    intr = default_intrinsics(size, size)
    scene = preset_scene("plane_box", seed=seed)
    traj = preset_trajectory(3, intr, step_x=0.3)
    frames, _, _ = render_sequence(scene, traj)
    return FrameTriplet(prev=frames[0].data, center=frames[1].data,
                        next=frames[2].data, intrinsics=intr,
                        sequence_id="gradcheck", center_index=1)


def _loss_kink_margins(triplet, params, depth_cfg, pose_cfg, weights,
                       d_min: float, d_max: float) -> tuple[float, float]:
    """(warp-coordinate margin, min/mask decision gap) at the current
    parameters, for verifying the evaluation point is away from kinks."""
    from .autodiff import Tensor as T
    from .networks import depth_forward, pose_forward
    from .losses import reprojection_loss as rpl

    ref = T(triplet.center)
    ref_b = ad.reshape(ref, (1,) + ref.shape)
    sources = {"prev": T(triplet.prev), "next": T(triplet.next)}
    nxt_b = ad.reshape(sources["next"], (1, 3) + triplet.center.shape[1:])
    disparity = depth_forward(ref_b, nxt_b, params, depth_cfg).primary.data[0, 0]
    depth = disparity_to_depth(T(disparity), d_min, d_max)
    coord_margin = np.inf
    recon_maps = []
    ident_maps = []
    for name, src in sources.items():
        src_b = ad.reshape(src, (1,) + src.shape)
        pose = pose_forward(ref_b, src_b, params, pose_cfg)[0]
        pts = backproject(depth.values, triplet.intrinsics)
        coords, _, _ = project(pts, pose, triplet.intrinsics)
        coord_margin = min(coord_margin, _kink_margin(coords.data))
        recon, _ = synthesize_view(src, depth, pose, triplet.intrinsics)
        recon_maps.append(rpl(ref, recon, weights.alpha).data)
        ident_maps.append(rpl(ref, src, weights.alpha).data)
    source_gap = float(np.abs(recon_maps[0] - recon_maps[1]).min())
    mask_gap = float(np.abs(np.minimum(*recon_maps) - np.minimum(*ident_maps)).min())
    return coord_margin, min(source_gap, mask_gap)


def full_loss_checks(size: int, rel_tol: float, eps: float, seed: int):
    """Check the complete four-term objective against finite differences
    for every parameter tensor of a micro model (float64).

    The evaluation point is nudged away from the non-smooth spots first:
    biases get a positive shift so no relu sits at its kink, and the pose
    head bias is raised until the warp is a genuine off-grid resampling
    with clear min/mask decision gaps.
    """
    config = micro_train_config(size, seed)
    params = init_model(config, np.random.default_rng(seed), dtype=np.float64)
    triplet = make_micro_triplet(size, seed)
    weights = LossWeights()
    depth_cfg = config.depth_net_config()
    pose_cfg = config.pose_net_config()

    for name in params.names():
        if name.endswith(".b"):
            params[name].data += 0.05
    head = params["pose.dec.head.b"]
    base = np.array([2.1, -1.7, 1.3, 9.0, -6.0, 4.0])
    step = np.array([0.0, 0.0, 0.0, 0.31, 0.17, 0.11])
    for bump in range(200):
        head.data = base + bump * step
        coord_margin, gap = _loss_kink_margins(triplet, params, depth_cfg,
                                               pose_cfg, weights,
                                               config.d_min, config.d_max)
        if coord_margin > 0.02 and gap > 1e-6:
            break
    else:
        raise RuntimeError("could not find a kink-free full-loss evaluation point")

    def loss_fn(_t):
        fwd = compute_triplet_loss(triplet, params, depth_cfg, pose_cfg,
                                   weights, config.d_min, config.d_max,
                                   pair_seed=seed + 7)
        return fwd.breakdown.total

    checks = []
    for name in params.names():
        checks.append((f"full_loss/{name}",
                       grad_check(loss_fn, params[name], eps=eps, rel_tol=rel_tol)))
    return checks


def run_gradient_suite(size: int = 8, rel_tol: float = 1e-3,
                       eps: float = 1e-4, seed: int = 0):
    """All operation-level checks plus the full-loss parameter sweep."""
    rng = np.random.default_rng(seed)
    checks = []
    checks += _op_checks(size, rng, eps, rel_tol)
    checks += _geometry_checks(size, rng, eps, rel_tol)
    checks += _loss_checks(size, rng, eps, rel_tol)
    checks += full_loss_checks(size, rel_tol, eps, seed)
    return checks
