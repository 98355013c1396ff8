"""Scikit-learn style front end: fit on a monocular video sequence, predict
per-pixel depth from single images."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .evalmetrics import EvalConfig, aggregate_reports, evaluate
from .geometry import DepthMap
from .losses import LossWeights
from .pipeline import predict_depth, predict_disparity
from .synthscene import SequenceData
from .trainer import TrainConfig, run_training
from .validation import resolve_intrinsics, validate_frames, validate_reference_depths


class DepthEstimator(BaseEstimator):
    """Self-supervised single-image depth estimator.

    ``fit`` consumes an ordered video sequence shaped [N, H, W, 3] (or
    [N, 3, H, W]) with values in [0, 1] and trains the depth and pose
    networks jointly from photometric supervision alone; no targets are
    needed. ``predict`` maps single images to depth in scene units (up to
    the usual global-scale ambiguity), ``transform`` returns the raw
    disparity in (0, 1).

    Examples
    --------
    >>> est = DepthEstimator(epochs=2, batch_size=2, seed=0)
    >>> est.fit(frames)           # frames: [N, H, W, 3] video, doctest: +SKIP
    >>> depth = est.predict(frames[:1])  # doctest: +SKIP
    """

    def __init__(self, epochs: int = 20, batch_size: int = 4,
                 base_lr: float = 1e-4, late_lr: float = 1e-5,
                 lr_switch_fraction: float = 0.75, seed: int = 0,
                 frame_stride: int = 1, intrinsics=None,
                 d_min: float = 0.1, d_max: float = 100.0,
                 encoder_channels: tuple[int, ...] = (16, 32, 64, 128),
                 pose_decoder_channels: int = 256,
                 enabled_losses: tuple[str, ...] = ("reproj", "smooth", "mask", "contrast"),
                 loss_weights: LossWeights | None = None,
                 verbose: bool = False):
        self.epochs = epochs
        self.batch_size = batch_size
        self.base_lr = base_lr
        self.late_lr = late_lr
        self.lr_switch_fraction = lr_switch_fraction
        self.seed = seed
        self.frame_stride = frame_stride
        self.intrinsics = intrinsics
        self.d_min = d_min
        self.d_max = d_max
        self.encoder_channels = encoder_channels
        self.pose_decoder_channels = pose_decoder_channels
        self.enabled_losses = enabled_losses
        self.loss_weights = loss_weights
        self.verbose = verbose

    def _build_config(self, width: int, height: int) -> TrainConfig:
        kwargs = dict(
            epochs=self.epochs, batch_size=self.batch_size,
            base_lr=self.base_lr, late_lr=self.late_lr,
            lr_switch_fraction=self.lr_switch_fraction, seed=self.seed,
            frame_stride=self.frame_stride, width=width, height=height,
            d_min=self.d_min, d_max=self.d_max,
            encoder_channels=tuple(self.encoder_channels),
            pose_decoder_channels=self.pose_decoder_channels,
            enabled_losses=tuple(self.enabled_losses))
        if self.loss_weights is not None:
            kwargs["weights"] = self.loss_weights
        return TrainConfig(**kwargs)

    def fit(self, X, y=None) -> "DepthEstimator":
        """Train on an ordered monocular video; ``y`` is ignored."""
        frames = validate_frames(X)
        n, _, height, width = frames.shape
        config = self._build_config(width, height)
        intr = resolve_intrinsics(self.intrinsics, width, height)
        seq = SequenceData(frames=[frames[i] for i in range(n)], intrinsics=intr)
        result = run_training(seq, config, out_dir=None, verbose=self.verbose)
        self.config_ = config
        self.intrinsics_ = intr
        self.params_ = result.params
        self.n_features_in_ = 3 * height * width
        return self

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise RuntimeError("this DepthEstimator is not fitted yet; call fit first")

    def predict(self, X) -> np.ndarray:
        """Depth maps [N, H, W] in scene units for single images."""
        self._check_fitted()
        frames = validate_frames(X)
        depth_cfg = self.config_.depth_net_config()
        out = [predict_depth(f, self.params_, depth_cfg,
                             self.config_.d_min, self.config_.d_max).values.data
               for f in frames]
        return np.stack(out)

    def transform(self, X) -> np.ndarray:
        """Raw sigmoid disparity maps [N, H, W], values in (0, 1)."""
        self._check_fitted()
        frames = validate_frames(X)
        depth_cfg = self.config_.depth_net_config()
        return np.stack([predict_disparity(f, self.params_, depth_cfg)
                         for f in frames])

    def fit_transform(self, X, y=None) -> np.ndarray:
        return self.fit(X, y).transform(X)

    def score(self, X, y) -> float:
        """Negative mean Abs Rel against reference depths (median-aligned),
        so larger is better as scikit-learn expects."""
        self._check_fitted()
        frames = validate_frames(X)
        h, w = frames.shape[2:]
        refs = validate_reference_depths(y, frames.shape[0], (h, w))
        depth_cfg = self.config_.depth_net_config()
        reports = []
        for frame, ref in zip(frames, refs):
            pred = predict_depth(frame, self.params_, depth_cfg,
                                 self.config_.d_min, self.config_.d_max)
            reports.append(evaluate(pred, DepthMap(ref), EvalConfig()))
        return -aggregate_reports(reports).abs_rel
