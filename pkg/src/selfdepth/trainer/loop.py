"""Optimization loop: deterministic batching, step updates, checkpoints,
and the structured training log."""
from __future__ import annotations

import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..autodiff import backward
from ..networks import ModelParameters, load_checkpoint, save_checkpoint
from ..losses import LossBreakdown
from ..pipeline import compute_triplet_loss, init_model
from .config import TrainConfig
from .data import FrameTriplet, build_triplets, resample_sequence
from .optim import Adam, lr_at

LOG_NAME = "train_log.tsv"
LOG_HEADER = "epoch\tstep\treprojection\tsmoothness\tcontrastive\tmask_fraction\ttotal\tlr"
FINAL_CHECKPOINT = "checkpoint_final.bin"


@dataclass
class TrainResult:
    params: ModelParameters
    optimizer: Adam
    log_path: Path | None
    checkpoint_path: Path | None
    last_breakdown: LossBreakdown | None


def _pair_seed(config: TrainConfig, epoch: int, step: int, element: int) -> int:
    return (config.seed * 1000003 + epoch * 10007 + step * 101 + element) % (2 ** 31)


def train_step(batch: list[FrameTriplet], params: ModelParameters,
               optimizer: Adam, config: TrainConfig, epoch: int,
               step: int) -> LossBreakdown:
    """One optimizer update on a batch; gradients accumulate over batch
    elements in index order so results are reproducible."""
    if not batch:
        raise ValueError("empty batch")
    params.zero_grads()
    weights = config.effective_weights()
    depth_cfg = config.depth_net_config()
    pose_cfg = config.pose_net_config()
    scale = 1.0 / len(batch)
    agg = {"total": 0.0, "reprojection": 0.0, "smoothness": 0.0,
           "contrastive": 0.0, "mask_fraction": 0.0}
    total_tensor = None
    for i, triplet in enumerate(batch):
        fwd = compute_triplet_loss(triplet, params, depth_cfg, pose_cfg,
                                   weights, config.d_min, config.d_max,
                                   pair_seed=_pair_seed(config, epoch, step, i))
        b = fwd.breakdown
        value = b.total.item()
        if not np.isfinite(value):
            raise RuntimeError(
                f"non-finite loss at epoch {epoch} step {step} element {i}: "
                f"total={value}, reprojection={b.reprojection}, "
                f"smoothness={b.smoothness}, contrastive={b.contrastive}, "
                f"mask_fraction={b.mask_fraction}")
        backward(b.total * scale)
        total_tensor = b.total
        agg["total"] += value * scale
        agg["reprojection"] += b.reprojection * scale
        agg["smoothness"] += b.smoothness * scale
        agg["contrastive"] += b.contrastive * scale
        agg["mask_fraction"] += b.mask_fraction * scale
    optimizer.step(lr_at(epoch, config))
    return LossBreakdown(total=total_tensor, reprojection=agg["reprojection"],
                         smoothness=agg["smoothness"],
                         contrastive=agg["contrastive"],
                         mask_fraction=agg["mask_fraction"])


def _batches(num_items: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(num_items)
    for start in range(0, num_items, batch_size):
        yield order[start:start + batch_size]


def _checkpoint_arrays(params: ModelParameters, optimizer: Adam) -> dict:
    arrays = {name: t.data for name, t in params.items()}
    arrays.update(optimizer.state_arrays())
    return arrays


def save_training_checkpoint(path, params: ModelParameters, optimizer: Adam,
                             next_epoch: int, global_step: int,
                             config: TrainConfig) -> None:
    meta = {"next_epoch": next_epoch, "global_step": global_step,
            "config": config.to_lines()}
    save_checkpoint(path, _checkpoint_arrays(params, optimizer), meta)


def load_training_checkpoint(path, params: ModelParameters,
                             optimizer: Adam) -> dict:
    """Restore parameters and optimizer state in place; returns the meta."""
    arrays, meta = load_checkpoint(path)
    param_arrays = {k: v for k, v in arrays.items() if not k.startswith("opt.")}
    opt_arrays = {k: v for k, v in arrays.items() if k.startswith("opt.")}
    params.load_arrays(param_arrays)
    optimizer.load_state(opt_arrays)
    return meta


def run_training(dataset, config: TrainConfig, out_dir=None,
                 resume_from=None, verbose: bool = False) -> TrainResult:
    """Train on a frame sequence (or prebuilt triplets) and leave a
    checkpoint plus a tab-separated per-step log in ``out_dir``
    (no files are written when ``out_dir`` is None).

    Per-epoch shuffling, contrastive sampling and initialization all derive
    from config.seed, so identical runs produce identical logs and
    checkpoints. Wall-clock timing goes to stderr only, keeping artifacts
    byte-stable.
    """
    if isinstance(dataset, list):
        triplets = dataset
    else:
        seq = resample_sequence(dataset, config.width, config.height)
        triplets = build_triplets(seq, config.frame_stride)
    if not triplets:
        raise ValueError("no training triplets; sequence too short for the stride")

    params = init_model(config)
    optimizer = Adam(params, config.beta1, config.beta2, config.adam_eps)
    start_epoch = 0
    global_step = 0
    if resume_from is not None:
        meta = load_training_checkpoint(resume_from, params, optimizer)
        start_epoch = int(meta["next_epoch"])
        global_step = int(meta["global_step"])
    elif config.pretrained_load_path:
        arrays, _ = load_checkpoint(config.pretrained_load_path)
        params.load_arrays({k: v for k, v in arrays.items()
                            if not k.startswith("opt.")})

    log_path = None
    log = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        log_path = out_dir / LOG_NAME
        mode = "a" if resume_from is not None and log_path.exists() else "w"
        log = open(log_path, mode)
        if mode == "w":
            log.write(LOG_HEADER + "\n")
    last = None
    try:
        for epoch in range(start_epoch, config.epochs):
            rng = np.random.default_rng([config.seed, epoch])
            t0 = time.perf_counter()
            for batch_idx in _batches(len(triplets), config.batch_size, rng):
                batch = [triplets[i] for i in batch_idx]
                last = train_step(batch, params, optimizer, config, epoch, global_step)
                if log is not None:
                    lr = lr_at(epoch, config)
                    log.write(f"{epoch}\t{global_step}\t{last.reprojection:.9g}\t"
                              f"{last.smoothness:.9g}\t{last.contrastive:.9g}\t"
                              f"{last.mask_fraction:.9g}\t{last.total.item():.9g}\t{lr:.9g}\n")
                global_step += 1
            if log is not None:
                log.flush()
            if verbose:
                print(f"epoch {epoch}: loss {last.total.item():.6f} "
                      f"({time.perf_counter() - t0:.1f}s)", file=sys.stderr)
            if out_dir is not None and config.checkpoint_every \
                    and (epoch + 1) % config.checkpoint_every == 0:
                save_training_checkpoint(out_dir / f"checkpoint_epoch_{epoch:04d}.bin",
                                         params, optimizer, epoch + 1, global_step, config)
    finally:
        if log is not None:
            log.close()
    final_path = None
    if out_dir is not None:
        final_path = out_dir / FINAL_CHECKPOINT
        save_training_checkpoint(final_path, params, optimizer,
                                 config.epochs, global_step, config)
    return TrainResult(params=params, optimizer=optimizer, log_path=log_path,
                       checkpoint_path=final_path, last_breakdown=last)
