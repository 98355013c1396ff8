"""Adaptive-moment optimizer and the two-level learning-rate schedule."""
from __future__ import annotations

import math

import numpy as np

from ..networks import ModelParameters


def lr_at(epoch: int, config) -> float:
    """Step schedule: base rate for the first lr_switch_fraction of the
    epochs, the late rate afterwards (switch at floor(fraction * epochs))."""
    if not 0 <= epoch < config.epochs:
        raise ValueError(f"epoch {epoch} outside [0, {config.epochs})")
    switch = math.floor(config.lr_switch_fraction * config.epochs)
    return config.base_lr if epoch < switch else config.late_lr


class Adam:
    """Standard Adam with bias correction; moments follow parameter dtype
    so checkpoints round-trip exactly in float32 training."""

    def __init__(self, params: ModelParameters, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {name: np.zeros_like(t.data) for name, t in params.items()}
        self.v = {name: np.zeros_like(t.data) for name, t in params.items()}

    def step(self, lr: float) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        corr1 = 1.0 - b1 ** self.t
        corr2 = 1.0 - b2 ** self.t
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            g = g.astype(p.dtype, copy=False)
            m = self.m[name]
            v = self.v[name]
            m += (1.0 - b1) * (g - m)
            v += (1.0 - b2) * (g * g - v)
            p.data = p.data - lr * (m / corr1) / (np.sqrt(v / corr2) + self.eps)

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {"opt.t": np.array([self.t], dtype=np.float32)}
        for name in self.params.names():
            out[f"opt.m.{name}"] = self.m[name]
            out[f"opt.v.{name}"] = self.v[name]
        return out

    def load_state(self, arrays: dict[str, np.ndarray]) -> None:
        self.t = int(arrays["opt.t"][0])
        for name in self.params.names():
            self.m[name] = np.asarray(arrays[f"opt.m.{name}"],
                                      dtype=self.m[name].dtype).reshape(self.m[name].shape)
            self.v[name] = np.asarray(arrays[f"opt.v.{name}"],
                                      dtype=self.v[name].dtype).reshape(self.v[name].shape)
