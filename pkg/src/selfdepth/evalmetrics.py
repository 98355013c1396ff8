"""Depth evaluation: Abs Rel, Sq Rel, RMSE, threshold accuracies, scale
alignment, depth capping, and report tables."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import DepthMap, DisparityMap, scale_to_reference

DEFAULT_THRESHOLDS = (1.25, 1.15, 1.05)


@dataclass(frozen=True)
class EvalConfig:
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    depth_cap: float | None = None
    alignment_mode: str = "median"

    def __post_init__(self):
        if any(t <= 1 for t in self.thresholds):
            raise ValueError(f"thresholds must exceed 1, got {self.thresholds}")
        if self.depth_cap is not None and self.depth_cap <= 0:
            raise ValueError(f"depth_cap must be positive, got {self.depth_cap}")
        if self.alignment_mode not in ("median", "minmax"):
            raise ValueError(f"alignment_mode must be median or minmax, "
                             f"got {self.alignment_mode!r}")


@dataclass
class MetricReport:
    abs_rel: float
    sq_rel: float
    rmse: float
    delta: dict[float, float] = field(default_factory=dict)
    pixel_count: int = 0


def _overlap(pred: DepthMap, ref: DepthMap) -> tuple[np.ndarray, np.ndarray]:
    if pred.shape != ref.shape:
        raise ValueError(f"map shapes differ: {pred.shape} vs {ref.shape}")
    mask = pred.valid & ref.valid
    if not mask.any():
        raise ValueError("no valid pixel overlap between prediction and reference")
    return pred.values.data[mask], ref.values.data[mask]


def _sorted_mean(terms: np.ndarray) -> float:
    # sorting first makes the reduction independent of pixel storage order
    return float(np.sum(np.sort(terms)) / terms.size)


def abs_rel(pred: DepthMap, ref: DepthMap) -> float:
    """Mean of |d - d'| / d over the valid overlap (d is the reference)."""
    p, r = _overlap(pred, ref)
    return _sorted_mean(np.abs(r - p) / r)


def sq_rel(pred: DepthMap, ref: DepthMap) -> float:
    """Mean of |d - d'|^2 / d over the valid overlap."""
    p, r = _overlap(pred, ref)
    return _sorted_mean((r - p) ** 2 / r)


def rmse(pred: DepthMap, ref: DepthMap) -> float:
    p, r = _overlap(pred, ref)
    return float(np.sqrt(_sorted_mean((r - p) ** 2)))


def delta_accuracy(pred: DepthMap, ref: DepthMap, threshold: float) -> float:
    """Fraction of pixels with max(d/d', d'/d) below the threshold."""
    if threshold <= 1:
        raise ValueError(f"threshold must exceed 1, got {threshold}")
    p, r = _overlap(pred, ref)
    ratio = np.maximum(r / p, p / r)
    return float(np.count_nonzero(ratio < threshold)) / ratio.size


def evaluate(pred, ref: DepthMap, config: EvalConfig | None = None) -> MetricReport:
    """Align a prediction to the reference, apply the optional depth cap,
    and compute every metric over the surviving pixels."""
    config = config or EvalConfig()
    if isinstance(pred, DisparityMap):
        pred = pred.to_depth()
    aligned = scale_to_reference(pred, ref, config.alignment_mode)
    if config.depth_cap is not None:
        keep = ref.valid & (ref.values.data < config.depth_cap)
        ref = DepthMap(ref.values, keep)
    p, r = _overlap(aligned, ref)
    mask_map = DepthMap(aligned.values, aligned.valid & ref.valid)
    report = MetricReport(
        abs_rel=abs_rel(mask_map, ref),
        sq_rel=sq_rel(mask_map, ref),
        rmse=rmse(mask_map, ref),
        delta={t: delta_accuracy(mask_map, ref, t) for t in config.thresholds},
        pixel_count=int(p.size))
    return report


def aggregate_reports(reports: list[MetricReport]) -> MetricReport:
    """Uniform per-image mean of every metric (images weigh equally
    regardless of their pixel counts)."""
    if not reports:
        raise ValueError("no reports to aggregate")
    thresholds = tuple(reports[0].delta)
    for rep in reports:
        if tuple(rep.delta) != thresholds:
            raise ValueError("reports carry different threshold sets")
    n = len(reports)
    return MetricReport(
        abs_rel=sum(r.abs_rel for r in reports) / n,
        sq_rel=sum(r.sq_rel for r in reports) / n,
        rmse=sum(r.rmse for r in reports) / n,
        delta={t: sum(r.delta[t] for r in reports) / n for t in thresholds},
        pixel_count=sum(r.pixel_count for r in reports))


def _threshold_labels(report: MetricReport) -> list[float]:
    return list(report.delta)


def report_table(reports: list[tuple[str, MetricReport]]) -> str:
    """Aligned plain-text table, one row per label."""
    if not reports:
        return ""
    thresholds = _threshold_labels(reports[0][1])
    headers = ["Method", "Abs Rel", "Sq Rel", "RMSE"] + \
        [f"d{t:g}" for t in thresholds] + ["Pixels"]
    rows = []
    for label, rep in reports:
        rows.append([label, f"{rep.abs_rel:.4f}", f"{rep.sq_rel:.4f}",
                     f"{rep.rmse:.4f}"] +
                    [f"{rep.delta[t]:.4f}" for t in thresholds] +
                    [str(rep.pixel_count)])
    widths = [max(len(h), *(len(r[i]) for r in rows)) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths))]
    for row in rows:
        lines.append("  ".join(v.ljust(w) for v, w in zip(row, widths)))
    return "\n".join(lines)


def report_csv(reports: list[tuple[str, MetricReport]]) -> str:
    """Comma-separated report; with the default thresholds the header is
    exactly "method,abs_rel,sq_rel,rmse,d1.25,d1.15,d1.05,pixels"."""
    if not reports:
        return "method,abs_rel,sq_rel,rmse,pixels\n"
    thresholds = _threshold_labels(reports[0][1])
    header = "method,abs_rel,sq_rel,rmse," + \
        ",".join(f"d{t:g}" for t in thresholds) + ",pixels"
    lines = [header]
    for label, rep in reports:
        lines.append(",".join([label, f"{rep.abs_rel:.6g}", f"{rep.sq_rel:.6g}",
                               f"{rep.rmse:.6g}"] +
                              [f"{rep.delta[t]:.6g}" for t in thresholds] +
                              [str(rep.pixel_count)]))
    return "\n".join(lines) + "\n"
