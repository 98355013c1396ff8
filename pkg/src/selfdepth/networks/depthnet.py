"""Depth network: two weight-independent 2-d encoders over consecutive
frames feeding a 3-d decoder that collapses the temporal pair, with skip
connections, multi-level heads, and sigmoid output."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..autodiff import (Tensor, concat, conv3d, elu, reshape, sigmoid, stack,
                        upsample2x)
from .blocks import add_conv2d, add_conv3d, add_encoder, conv_block, encoder_forward
from .params import ModelParameters


@dataclass(frozen=True)
class DepthNetConfig:
    """Size-configurable depth network; kernels are fixed by design
    (7x7 stem, 3x3 inner layers)."""

    encoder_channels: tuple[int, ...] = (16, 32, 64, 128)
    decoder_3d_channels: tuple[int, ...] | None = None
    first_kernel: int = 7
    inner_kernel: int = 3
    output_scales: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.first_kernel != 7:
            raise ValueError(f"first encoder kernel is fixed at 7, got {self.first_kernel}")
        if self.inner_kernel != 3:
            raise ValueError(f"inner kernels are fixed at 3, got {self.inner_kernel}")
        if self.num_stages < 2:
            raise ValueError(f"need at least 2 encoder stages, got {self.num_stages}")
        if self.decoder_3d_channels is not None and \
                len(self.decoder_3d_channels) != self.num_stages:
            raise ValueError("decoder_3d_channels must have one entry per encoder stage")
        for s in self.scales:
            if not 0 <= s < self.num_stages:
                raise ValueError(f"output scale {s} outside decoder levels "
                                 f"0..{self.num_stages - 1}")

    @property
    def num_stages(self) -> int:
        return len(self.encoder_channels)

    @property
    def decoder_channels(self) -> tuple[int, ...]:
        return self.decoder_3d_channels or self.encoder_channels

    @property
    def scales(self) -> tuple[int, ...]:
        return self.output_scales if self.output_scales is not None \
            else tuple(range(self.num_stages))

    def check_resolution(self, height: int, width: int) -> None:
        div = 2 ** self.num_stages
        if height % div or width % div:
            raise ValueError(f"input resolution {width}x{height} not divisible "
                             f"by 2^{self.num_stages} = {div}")


@dataclass
class DepthOutputs:
    """Sigmoid disparity maps: one per configured decoder level plus the
    full-resolution primary (average of all level heads, then sigmoid)."""

    primary: Tensor
    scales: dict[int, Tensor] = field(default_factory=dict)


def init_depth_params(config: DepthNetConfig, rng: np.random.Generator,
                      dtype=np.float32,
                      params: ModelParameters | None = None) -> ModelParameters:
    """Create depth-network weights under the "depth." prefix."""
    params = params if params is not None else ModelParameters()
    ch = config.encoder_channels
    for enc in ("enc0", "enc1"):
        add_encoder(params, rng, f"depth.{enc}", ch,
                    config.first_kernel, config.inner_kernel, dtype)
    dch = config.decoder_channels
    n = config.num_stages
    for level in range(n):
        add_conv3d(params, rng, f"depth.dec.d{level}.collapse",
                   ch[level], dch[level], 2, 3, dtype)
    for level in range(n - 2, -1, -1):
        add_conv2d(params, rng, f"depth.dec.d{level}.fuse",
                   dch[level + 1] + dch[level], dch[level], 3, dtype)
    for level in config.scales:
        add_conv2d(params, rng, f"depth.dec.d{level}.head", dch[level], 1, 3, dtype)
    return params


def depth_forward(frame_ref: Tensor, frame_next: Tensor,
                  params: ModelParameters, config: DepthNetConfig) -> DepthOutputs:
    """Predict disparity for the reference frame from the (ref, next) pair.

    The two frames run through independent encoders; per-stage features are
    stacked on a new temporal axis of extent 2 and collapsed by kd=2 3-d
    convolutions inside the decoder. Level heads are upsampled to full
    resolution and averaged before the final sigmoid, so every output lies
    strictly in (0, 1).
    """
    if frame_ref.shape != frame_next.shape:
        raise ValueError(f"frame shapes differ: {frame_ref.shape} vs {frame_next.shape}")
    if frame_ref.ndim != 4 or frame_ref.shape[1] != 3:
        raise ValueError(f"frames must be [B, 3, H, W], got {frame_ref.shape}")
    _, _, height, width = frame_ref.shape
    config.check_resolution(height, width)

    ch = config.encoder_channels
    feats_ref = encoder_forward(frame_ref, params, "depth.enc0", ch,
                                config.first_kernel, config.inner_kernel)
    feats_next = encoder_forward(frame_next, params, "depth.enc1", ch,
                                 config.first_kernel, config.inner_kernel)

    def collapse(level: int) -> Tensor:
        volume = stack([feats_ref[level], feats_next[level]], axis=2)
        out = conv3d(volume, params[f"depth.dec.d{level}.collapse.w"],
                     params[f"depth.dec.d{level}.collapse.b"],
                     stride=1, padding=1, padding_depth=0)
        b, f, _, h, w = out.shape
        return elu(reshape(out, (b, f, h, w)))

    n = config.num_stages
    x = collapse(n - 1)
    level_maps = {n - 1: x}
    for level in range(n - 2, -1, -1):
        fused = concat([upsample2x(x), collapse(level)], axis=1)
        x = elu(conv_block(fused, params, f"depth.dec.d{level}.fuse", padding=1))
        level_maps[level] = x

    logits: dict[int, Tensor] = {}
    for level in config.scales:
        logits[level] = conv_block(level_maps[level], params,
                                   f"depth.dec.d{level}.head", padding=1)

    scale_outputs = {level: sigmoid(t) for level, t in logits.items()}
    full = []
    for level in sorted(logits):
        t = logits[level]
        for _ in range(level + 1):
            t = upsample2x(t)
        full.append(t)
    mean_logits = full[0] if len(full) == 1 else \
        sum(full[1:], start=full[0]) * (1.0 / len(full))
    return DepthOutputs(primary=sigmoid(mean_logits), scales=scale_outputs)
