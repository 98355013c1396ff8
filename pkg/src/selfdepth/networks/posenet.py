"""Pose network: shared encoder over both frames, four 3x3 conv layers,
spatial mean, and a 6-DoF split into axis-angle plus translation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import Tensor, concat, reduce_mean, relu, reshape
from ..geometry import RigidPose
from .blocks import add_conv2d, add_encoder, conv_block, encoder_forward
from .params import ModelParameters


@dataclass(frozen=True)
class PoseNetConfig:
    """Pose estimator with a fixed 4-layer, 3x3 decoder.

    ``decoder_channels`` defaults to the reference width of 256; smaller
    widths exist so finite-difference sweeps over every weight stay cheap.
    """

    encoder_channels: tuple[int, ...] = (16, 32, 64, 128)
    decoder_channels: int = 256
    num_decoder_layers: int = 4
    dof: int = 6
    first_kernel: int = 7
    inner_kernel: int = 3
    output_scale_factor: float = 0.01

    def __post_init__(self):
        if self.num_decoder_layers != 4:
            raise ValueError(f"pose decoder is fixed at 4 conv layers, "
                             f"got {self.num_decoder_layers}")
        if self.dof != 6:
            raise ValueError(f"pose output is fixed at 6 degrees of freedom, got {self.dof}")
        if self.first_kernel != 7 or self.inner_kernel != 3:
            raise ValueError("encoder kernels are fixed at 7 (stem) and 3 (inner)")
        if self.decoder_channels < 1:
            raise ValueError(f"decoder_channels must be positive, got {self.decoder_channels}")


def init_pose_params(config: PoseNetConfig, rng: np.random.Generator,
                     dtype=np.float32,
                     params: ModelParameters | None = None) -> ModelParameters:
    """Create pose-network weights under the "pose." prefix."""
    params = params if params is not None else ModelParameters()
    ch = config.encoder_channels
    add_encoder(params, rng, "pose.enc", ch,
                config.first_kernel, config.inner_kernel, dtype)
    width = config.decoder_channels
    c_in = 2 * ch[-1]
    for i in range(config.num_decoder_layers):
        add_conv2d(params, rng, f"pose.dec.conv{i}", c_in, width, 3, dtype)
        c_in = width
    add_conv2d(params, rng, "pose.dec.head", width, config.dof, 3, dtype)
    return params


def pose_forward(frame_ref: Tensor, frame_src: Tensor,
                 params: ModelParameters, config: PoseNetConfig) -> list[RigidPose]:
    """Estimate the transform taking reference-frame points into the source
    frame, one RigidPose per batch element.

    Deepest encoder features of the two frames are concatenated, passed
    through four 3x3 conv + ReLU layers and a linear 6-channel head, spatially
    averaged, and scaled by ``output_scale_factor`` so training starts near
    the identity transform.
    """
    if frame_ref.shape != frame_src.shape:
        raise ValueError(f"frame shapes differ: {frame_ref.shape} vs {frame_src.shape}")
    if frame_ref.ndim != 4 or frame_ref.shape[1] != 3:
        raise ValueError(f"frames must be [B, 3, H, W], got {frame_ref.shape}")
    ch = config.encoder_channels
    f_ref = encoder_forward(frame_ref, params, "pose.enc", ch,
                            config.first_kernel, config.inner_kernel)[-1]
    f_src = encoder_forward(frame_src, params, "pose.enc", ch,
                            config.first_kernel, config.inner_kernel)[-1]
    h = concat([f_ref, f_src], axis=1)
    for i in range(config.num_decoder_layers):
        h = relu(conv_block(h, params, f"pose.dec.conv{i}", padding=1))
    h = conv_block(h, params, "pose.dec.head", padding=1)
    pooled = reduce_mean(h, axes=(2, 3)) * config.output_scale_factor  # [B, 6]
    poses = []
    for b in range(pooled.shape[0]):
        row = pooled[b]
        poses.append(RigidPose(row[0:3], row[3:6]))
    return poses
