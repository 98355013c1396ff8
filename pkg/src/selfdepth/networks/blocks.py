"""Shared building blocks: the residual 2-d encoder ladder and weight init."""
from __future__ import annotations

import numpy as np

from ..autodiff import Tensor, conv2d, relu
from .params import ModelParameters


def conv_init(rng: np.random.Generator, shape: tuple[int, ...],
              dtype=np.float32) -> np.ndarray:
    """Fan-in-scaled uniform weights: U(-1/sqrt(fan_in), 1/sqrt(fan_in))."""
    fan_in = int(np.prod(shape[1:]))
    limit = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def add_conv2d(params: ModelParameters, rng, name: str,
               c_in: int, c_out: int, k: int, dtype=np.float32) -> None:
    params.add(name + ".w", conv_init(rng, (c_out, c_in, k, k), dtype))
    params.add(name + ".b", np.zeros(c_out, dtype=dtype))


def add_conv3d(params: ModelParameters, rng, name: str,
               c_in: int, c_out: int, kd: int, k: int, dtype=np.float32) -> None:
    params.add(name + ".w", conv_init(rng, (c_out, c_in, kd, k, k), dtype))
    params.add(name + ".b", np.zeros(c_out, dtype=dtype))


def conv_block(x: Tensor, params: ModelParameters, name: str,
               stride: int = 1, padding: int = 0) -> Tensor:
    return conv2d(x, params[name + ".w"], params[name + ".b"],
                  stride=stride, padding=padding)


def add_encoder(params: ModelParameters, rng, prefix: str,
                channels: tuple[int, ...], first_kernel: int,
                inner_kernel: int, dtype=np.float32) -> None:
    """Register the ladder weights: a 7x7 stem then residual stages."""
    add_conv2d(params, rng, f"{prefix}.s0.conv", 3, channels[0], first_kernel, dtype)
    for i in range(1, len(channels)):
        c_in, c_out = channels[i - 1], channels[i]
        add_conv2d(params, rng, f"{prefix}.s{i}.conv1", c_in, c_out, inner_kernel, dtype)
        add_conv2d(params, rng, f"{prefix}.s{i}.conv2", c_out, c_out, inner_kernel, dtype)
        add_conv2d(params, rng, f"{prefix}.s{i}.proj", c_in, c_out, 1, dtype)


def encoder_forward(x: Tensor, params: ModelParameters, prefix: str,
                    channels: tuple[int, ...], first_kernel: int,
                    inner_kernel: int) -> list[Tensor]:
    """Run the ladder on [B, 3, H, W]; one feature map per stage.

    Each stage halves the resolution, so stage i has shape
    [B, channels[i], H / 2^(i+1), W / 2^(i+1)].
    """
    feats = []
    h = relu(conv_block(x, params, f"{prefix}.s0.conv",
                        stride=2, padding=first_kernel // 2))
    feats.append(h)
    for i in range(1, len(channels)):
        main = relu(conv_block(h, params, f"{prefix}.s{i}.conv1",
                               stride=2, padding=inner_kernel // 2))
        main = conv_block(main, params, f"{prefix}.s{i}.conv2",
                          stride=1, padding=inner_kernel // 2)
        skip = conv_block(h, params, f"{prefix}.s{i}.proj", stride=2, padding=0)
        h = relu(main + skip)
        feats.append(h)
    return feats
