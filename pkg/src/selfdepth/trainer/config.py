"""Training configuration and its plain-text key=value file format."""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from ..losses import LossWeights
from ..networks import DepthNetConfig, PoseNetConfig

LOSS_NAMES = ("reproj", "smooth", "mask", "contrast")


@dataclass(frozen=True)
class TrainConfig:
    """Everything a training run needs, reproducible from one seed."""

    epochs: int = 20
    batch_size: int = 12
    base_lr: float = 1e-4
    late_lr: float = 1e-5
    lr_switch_fraction: float = 0.75
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    frame_stride: int = 1
    width: int = 96
    height: int = 64
    weights: LossWeights = field(default_factory=LossWeights)
    enabled_losses: tuple[str, ...] = LOSS_NAMES
    pretrained_load_path: str | None = None
    d_min: float = 0.1
    d_max: float = 100.0
    checkpoint_every: int = 0  # 0: final checkpoint only
    encoder_channels: tuple[int, ...] = (16, 32, 64, 128)
    decoder_3d_channels: tuple[int, ...] | None = None
    pose_decoder_channels: int = 256

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 < self.lr_switch_fraction < 1.0:
            raise ValueError(f"lr_switch_fraction must lie in (0, 1), "
                             f"got {self.lr_switch_fraction}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.frame_stride < 1:
            raise ValueError(f"frame_stride must be >= 1, got {self.frame_stride}")
        unknown = set(self.enabled_losses) - set(LOSS_NAMES)
        if unknown:
            raise ValueError(f"unknown loss names {sorted(unknown)}, "
                             f"expected subset of {LOSS_NAMES}")
        if "reproj" not in self.enabled_losses:
            raise ValueError("the reprojection loss cannot be disabled")
        self.depth_net_config().check_resolution(self.height, self.width)

    def depth_net_config(self) -> DepthNetConfig:
        return DepthNetConfig(encoder_channels=self.encoder_channels,
                              decoder_3d_channels=self.decoder_3d_channels)

    def pose_net_config(self) -> PoseNetConfig:
        return PoseNetConfig(encoder_channels=self.encoder_channels,
                             decoder_channels=self.pose_decoder_channels)

    def effective_weights(self) -> LossWeights:
        """Loss weights after applying the ablation toggles."""
        w = self.weights
        return LossWeights(
            lambda1=w.lambda1,
            lambda2=w.lambda2 if "smooth" in self.enabled_losses else 0.0,
            lambda3=w.lambda3 if "mask" in self.enabled_losses else 0.0,
            lambda4=w.lambda4 if "contrast" in self.enabled_losses else 0.0,
            alpha=w.alpha, margin_m=w.margin_m)

    # -- key=value config file -------------------------------------------------

    def to_lines(self) -> list[str]:
        w = self.weights
        items = {
            "epochs": self.epochs, "batch_size": self.batch_size,
            "base_lr": self.base_lr, "late_lr": self.late_lr,
            "lr_switch_fraction": self.lr_switch_fraction,
            "beta1": self.beta1, "beta2": self.beta2, "adam_eps": self.adam_eps,
            "seed": self.seed, "frame_stride": self.frame_stride,
            "resolution": f"{self.width}x{self.height}",
            "lambda1": w.lambda1, "lambda2": w.lambda2,
            "lambda3": w.lambda3, "lambda4": w.lambda4,
            "alpha": w.alpha, "margin_m": w.margin_m,
            "enabled_losses": ",".join(self.enabled_losses),
            "pretrained_load_path": self.pretrained_load_path or "",
            "d_min": self.d_min, "d_max": self.d_max,
            "checkpoint_every": self.checkpoint_every,
            "encoder_channels": ",".join(str(c) for c in self.encoder_channels),
            "decoder_3d_channels": ",".join(str(c) for c in self.decoder_3d_channels or ()),
            "pose_decoder_channels": self.pose_decoder_channels,
        }
        return [f"{k}={v}" for k, v in sorted(items.items())]

    def save(self, path) -> None:
        Path(path).write_text("\n".join(self.to_lines()) + "\n")

    @classmethod
    def from_file(cls, path) -> "TrainConfig":
        pairs = {}
        for ln, line in enumerate(Path(path).read_text().splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{ln}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            pairs[key.strip()] = value.strip()
        return cls.from_pairs(pairs, source=str(path))

    @classmethod
    def from_pairs(cls, pairs: dict[str, str], source: str = "config") -> "TrainConfig":
        known = {
            "epochs": int, "batch_size": int, "base_lr": float, "late_lr": float,
            "lr_switch_fraction": float, "beta1": float, "beta2": float,
            "adam_eps": float, "seed": int, "frame_stride": int,
            "resolution": str, "lambda1": float, "lambda2": float,
            "lambda3": float, "lambda4": float, "alpha": float, "margin_m": float,
            "enabled_losses": str, "pretrained_load_path": str,
            "d_min": float, "d_max": float, "checkpoint_every": int,
            "encoder_channels": str, "decoder_3d_channels": str,
            "pose_decoder_channels": int,
        }
        unknown = set(pairs) - set(known)
        if unknown:
            raise ValueError(f"{source}: unknown config keys {sorted(unknown)}")
        base = cls()
        kwargs = {}
        weights = {}
        for key, raw in pairs.items():
            value = known[key](raw)
            if key == "resolution":
                kwargs["width"], kwargs["height"] = parse_resolution(raw)
            elif key in ("lambda1", "lambda2", "lambda3", "lambda4", "alpha", "margin_m"):
                weights[key] = value
            elif key == "enabled_losses":
                kwargs[key] = tuple(v for v in raw.split(",") if v)
            elif key == "pretrained_load_path":
                kwargs[key] = raw or None
            elif key == "encoder_channels":
                kwargs[key] = tuple(int(v) for v in raw.split(",") if v)
            elif key == "decoder_3d_channels":
                kwargs[key] = tuple(int(v) for v in raw.split(",") if v) or None
            else:
                kwargs[key] = value
        if weights:
            kwargs["weights"] = replace(base.weights, **weights)
        return replace(base, **kwargs)


def parse_resolution(text: str) -> tuple[int, int]:
    """'WxH' -> (width, height)."""
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise ValueError(f"resolution must look like 96x64, got {text!r}")
    return int(parts[0]), int(parts[1])
