"""Command-line entry point: dataset synthesis, training, inference,
evaluation, gradient checking, and the ablation grid.

Exit codes: 0 success, 1 usage error (bad flags, missing files, malformed
configs), 2 runtime failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .evalmetrics import EvalConfig, aggregate_reports, evaluate, report_csv, report_table
from .geometry import DepthMap, disparity_to_depth
from .networks import load_checkpoint
from .pipeline import init_model, predict_disparity
from .synthscene import (export_dataset, inject_dynamic_patch, load_dataset,
                         load_depth_bin, preset_scene, preset_trajectory,
                         render_sequence, save_depth_bin)
from .synthscene.presets import SCENE_NAMES, default_intrinsics
from .trainer import TrainConfig, parse_resolution, run_ablation, run_training
from .trainer.config import LOSS_NAMES


class UsageError(Exception):
    """Bad flags, missing files, or malformed configs; exits with code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="master random seed")
    p.add_argument("--threads", type=int, default=1,
                   help="internal parallelism (BLAS thread cap)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="selfdepth",
                     description="Self-supervised monocular depth estimation "
                                 "on synthetic video sequences.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("synth", help="render a synthetic dataset",
                       formatter_class=fmt)
    p.add_argument("--scene", choices=SCENE_NAMES, default="plane_box",
                   help="scene preset")
    p.add_argument("--frames", type=int, default=12, help="frames to render")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--resolution", default="96x64", help="image size WxH")
    p.add_argument("--inject-patch", action="store_true",
                   help="paste a camera-tracking textured patch (breaks the "
                        "static-scene assumption on purpose)")
    _add_common(p)

    p = sub.add_parser("train", help="train depth and pose networks",
                       formatter_class=fmt)
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="run directory for logs/checkpoints")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--resume", help="checkpoint to resume from")
    p.add_argument("--epochs", type=int, help="override: training epochs")
    p.add_argument("--batch", type=int, help="override: batch size")
    p.add_argument("--stride", type=int, help="override: frame stride")
    p.add_argument("--dmin", type=float, help="override: minimum depth")
    p.add_argument("--dmax", type=float, help="override: maximum depth")
    p.add_argument("--losses", help=f"override: comma list of {LOSS_NAMES}")
    p.add_argument("--resolution", help="override: input size WxH")
    p.add_argument("--verbose", action="store_true", help="per-epoch timing to stderr")
    _add_common(p)

    p = sub.add_parser("infer", help="predict disparity and depth from a checkpoint",
                       formatter_class=fmt)
    p.add_argument("--checkpoint", required=True, help="trained checkpoint file")
    p.add_argument("--data", required=True, help="dataset directory with frames")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--dmin", type=float, help="depth range minimum")
    p.add_argument("--dmax", type=float, help="depth range maximum")
    p.add_argument("--ref", help="reference dataset directory to derive the "
                                 "depth range from (alternative to --dmin/--dmax)")
    _add_common(p)

    p = sub.add_parser("eval", help="evaluate predicted depths against references",
                       formatter_class=fmt)
    p.add_argument("--pred", required=True,
                   help="directory with predicted depth_*.bin files")
    p.add_argument("--ref", required=True,
                   help="reference dataset directory with depth_*.bin files")
    p.add_argument("--out", help="directory for report.txt / report.csv")
    p.add_argument("--threshold", type=float, action="append",
                   help="delta threshold, repeatable (default 1.25 1.15 1.05)")
    p.add_argument("--depth-cap", type=float,
                   help="evaluate only pixels with reference depth below this")
    p.add_argument("--align", choices=("median", "minmax"), default="median",
                   help="scale alignment mode")
    _add_common(p)

    p = sub.add_parser("gradcheck", help="finite-difference check of all "
                                         "differentiable operations",
                       formatter_class=fmt)
    p.add_argument("--size", type=int, default=8, help="test image side length")
    p.add_argument("--rel-tol", type=float, default=1e-3, help="pass tolerance")
    p.add_argument("--eps", type=float, default=1e-4, help="perturbation step")
    _add_common(p)

    p = sub.add_parser("ablate", help="run the loss/resolution/init grid",
                       formatter_class=fmt)
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--epochs", type=int, help="override: training epochs")
    p.add_argument("--batch", type=int, help="override: batch size")
    p.add_argument("--resolution", help="override: input size WxH")
    p.add_argument("--depth-cap", type=float, help="evaluation depth cap")
    p.add_argument("--align", choices=("median", "minmax"), default="median")
    p.add_argument("--verbose", action="store_true")
    _add_common(p)
    return parser


def _print_config(pairs: dict) -> None:
    print("resolved configuration:")
    for key in sorted(pairs):
        print(f"  {key}={pairs[key]}")


def _train_config_from_args(args) -> TrainConfig:
    if args.config:
        if not Path(args.config).is_file():
            raise UsageError(f"--config: file {args.config} does not exist")
        config = TrainConfig.from_file(args.config)
    else:
        config = TrainConfig()
    updates = {"seed": args.seed}
    if args.epochs is not None:
        updates["epochs"] = args.epochs
    if getattr(args, "batch", None) is not None:
        updates["batch_size"] = args.batch
    if getattr(args, "stride", None) is not None:
        updates["frame_stride"] = args.stride
    if getattr(args, "dmin", None) is not None:
        updates["d_min"] = args.dmin
    if getattr(args, "dmax", None) is not None:
        updates["d_max"] = args.dmax
    if getattr(args, "losses", None):
        losses = tuple(v for v in args.losses.split(",") if v)
        unknown = set(losses) - set(LOSS_NAMES)
        if unknown:
            raise UsageError(f"--losses: unknown names {sorted(unknown)}")
        updates["enabled_losses"] = losses
    if getattr(args, "resolution", None):
        try:
            updates["width"], updates["height"] = parse_resolution(args.resolution)
        except ValueError as exc:
            raise UsageError(f"--resolution: {exc}") from None
    try:
        return dataclasses.replace(config, **updates)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load_dataset_or_usage(path, flag: str):
    try:
        return load_dataset(path)
    except FileNotFoundError as exc:
        raise UsageError(f"{flag}: {exc}") from None


def cmd_synth(args) -> int:
    try:
        width, height = parse_resolution(args.resolution)
    except ValueError as exc:
        raise UsageError(f"--resolution: {exc}") from None
    _print_config({"scene": args.scene, "frames": args.frames, "out": args.out,
                   "resolution": f"{width}x{height}", "seed": args.seed,
                   "inject_patch": args.inject_patch, "threads": args.threads})
    intr = default_intrinsics(width, height)
    scene = preset_scene(args.scene, seed=args.seed)
    traj = preset_trajectory(args.frames, intr)
    frames, depths, _ = render_sequence(scene, traj)
    if args.inject_patch:
        frames = inject_dynamic_patch(frames, size=max(8, height // 4), seed=args.seed + 99)
    export_dataset(args.out, frames, depths, traj.poses, intr)
    print(f"wrote {len(frames)} frames to {args.out}")
    return 0


def cmd_train(args) -> int:
    config = _train_config_from_args(args)
    _print_config(dict(pair.split("=", 1) for pair in config.to_lines())
                  | {"data": args.data, "out": args.out,
                     "resume": args.resume or "", "threads": args.threads})
    seq = _load_dataset_or_usage(args.data, "--data")
    if args.resume and not Path(args.resume).is_file():
        raise UsageError(f"--resume: file {args.resume} does not exist")
    result = run_training(seq, config, args.out, resume_from=args.resume,
                          verbose=args.verbose)
    print(f"final loss {result.last_breakdown.total.item():.6f}; "
          f"checkpoint at {result.checkpoint_path}")
    return 0


def _depth_range(args, seq) -> tuple[float, float]:
    if args.dmin is not None and args.dmax is not None:
        return args.dmin, args.dmax
    if args.ref:
        ref_seq = _load_dataset_or_usage(args.ref, "--ref")
        if ref_seq.depths is None:
            raise UsageError(f"--ref: {args.ref} has no depth_*.bin references")
        values = np.concatenate([d.valid_values() for d in ref_seq.depths])
        return float(values.min()), float(values.max())
    if seq.depths is not None:
        values = np.concatenate([d.valid_values() for d in seq.depths])
        return float(values.min()), float(values.max())
    raise UsageError("--dmin/--dmax (or --ref with reference depths) required "
                     "to convert disparities to depths")


def cmd_infer(args) -> int:
    if not Path(args.checkpoint).is_file():
        raise UsageError(f"--checkpoint: file {args.checkpoint} does not exist")
    seq = _load_dataset_or_usage(args.data, "--data")
    d_min, d_max = _depth_range(args, seq)
    _print_config({"checkpoint": args.checkpoint, "data": args.data,
                   "out": args.out, "dmin": d_min, "dmax": d_max,
                   "seed": args.seed, "threads": args.threads})
    arrays, meta = load_checkpoint(args.checkpoint)
    config_lines = meta.get("config")
    if not config_lines:
        raise UsageError(f"--checkpoint: {args.checkpoint} carries no training config")
    config = TrainConfig.from_pairs(
        dict(line.split("=", 1) for line in config_lines), source=args.checkpoint)
    params = init_model(config)
    params.load_arrays({k: v for k, v in arrays.items() if not k.startswith("opt.")})
    depth_cfg = config.depth_net_config()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(seq.frames):
        if frame.shape[1:] != (config.height, config.width):
            raise UsageError(f"--data: frame {i} is {frame.shape[2]}x{frame.shape[1]} "
                             f"but the checkpoint was trained at "
                             f"{config.width}x{config.height}")
        sig = predict_disparity(frame, params, depth_cfg)
        save_depth_bin(out / f"disp_{i:06d}.bin",
                       DepthMap(sig.astype(np.float64), np.ones_like(sig, dtype=bool)))
        depth = disparity_to_depth(sig.astype(np.float64), d_min, d_max)
        save_depth_bin(out / f"depth_{i:06d}.bin", depth)
    print(f"wrote {len(seq.frames)} disparity/depth pairs to {out}")
    return 0


def cmd_eval(args) -> int:
    pred_dir = Path(args.pred)
    if not pred_dir.is_dir():
        raise UsageError(f"--pred: directory {args.pred} does not exist")
    pred_paths = sorted(pred_dir.glob("depth_*.bin"))
    if not pred_paths:
        raise UsageError(f"--pred: no depth_*.bin files under {args.pred}")
    ref_seq = _load_dataset_or_usage(args.ref, "--ref")
    if ref_seq.depths is None:
        raise UsageError(f"--ref: {args.ref} has no depth_*.bin references")
    if len(pred_paths) != len(ref_seq.depths):
        raise UsageError(f"--pred has {len(pred_paths)} maps but --ref has "
                         f"{len(ref_seq.depths)}")
    thresholds = tuple(args.threshold) if args.threshold else EvalConfig().thresholds
    try:
        eval_config = EvalConfig(thresholds=thresholds, depth_cap=args.depth_cap,
                                 alignment_mode=args.align)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _print_config({"pred": args.pred, "ref": args.ref, "out": args.out or "",
                   "thresholds": ",".join(str(t) for t in thresholds),
                   "depth_cap": args.depth_cap, "align": args.align,
                   "seed": args.seed, "threads": args.threads})
    reports = [evaluate(load_depth_bin(p), ref, eval_config)
               for p, ref in zip(pred_paths, ref_seq.depths)]
    rows = [("prediction", aggregate_reports(reports))]
    table = report_table(rows)
    print(table)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(table + "\n")
        (out / "report.csv").write_text(report_csv(rows))
        print(f"wrote report.txt and report.csv to {out}")
    return 0


def cmd_gradcheck(args) -> int:
    from .gradsuite import run_gradient_suite
    _print_config({"size": args.size, "rel_tol": args.rel_tol, "eps": args.eps,
                   "seed": args.seed, "threads": args.threads})
    results = run_gradient_suite(size=args.size, rel_tol=args.rel_tol,
                                 eps=args.eps, seed=args.seed)
    worst = 0.0
    all_passed = True
    for name, report in results:
        print(f"{name:40s} {report}")
        worst = max(worst, report.max_rel_err)
        all_passed &= report.passed
    print(f"max relative discrepancy over all checks: {worst:.3e}")
    if not all_passed:
        print("gradient check FAILED", file=sys.stderr)
        return 2
    return 0


def cmd_ablate(args) -> int:
    config = _train_config_from_args(args)
    seq = _load_dataset_or_usage(args.data, "--data")
    try:
        eval_config = EvalConfig(depth_cap=args.depth_cap, alignment_mode=args.align)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _print_config(dict(pair.split("=", 1) for pair in config.to_lines())
                  | {"data": args.data, "out": args.out, "threads": args.threads})
    result = run_ablation(seq, config, args.out, eval_config=eval_config,
                          verbose=args.verbose)
    print(result.table)
    print("final-step auto-mask keep fractions:")
    for label, frac in result.mask_fractions.items():
        print(f"  {label}: {frac:.4f}")
    return 0


_COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "infer": cmd_infer,
    "eval": cmd_eval,
    "gradcheck": cmd_gradcheck,
    "ablate": cmd_ablate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if getattr(args, "threads", 1) != 1:
        try:
            from threadpoolctl import threadpool_limits
            threadpool_limits(limits=args.threads)
        except ImportError:
            print("threadpoolctl not available; --threads ignored", file=sys.stderr)
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
