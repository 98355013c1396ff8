"""Central finite-difference verification of analytic gradients."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .tensor import ShapeError, Tensor, backward


@dataclass
class GradCheckReport:
    """Outcome of comparing analytic gradients against finite differences."""

    passed: bool
    max_rel_err: float
    num_coords: int
    worst_coord: tuple[int, ...] | None = None
    analytic_at_worst: float = 0.0
    numeric_at_worst: float = 0.0
    failure_reason: str | None = None

    def __str__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        msg = (f"{status}: max relative gradient discrepancy {self.max_rel_err:.3e} "
               f"over {self.num_coords} coordinates")
        if self.failure_reason:
            msg += f" ({self.failure_reason})"
        return msg


def grad_check(f: Callable[[Tensor], Tensor],
               x: Tensor,
               eps: float = 1e-4,
               rel_tol: float = 1e-3,
               floor: float = 1e-8,
               max_coords: int | None = None,
               seed: int = 0) -> GradCheckReport:
    """Compare the analytic gradient of scalar-valued ``f`` at ``x`` with
    central finite differences (f(x+eps) - f(x-eps)) / (2 eps) per coordinate.

    Relative discrepancy uses max(|analytic|, |numeric|, floor) as the
    denominator. ``max_coords`` optionally limits the sweep to a seeded
    random subset of coordinates (useful for large tensors). Use float64
    tensors: float32 rounding swamps eps-sized differences.
    """
    x.requires_grad = True
    x.zero_grad()
    y = f(x)
    if y.size != 1:
        raise ShapeError(f"grad_check requires scalar-valued f, got shape {y.shape}")
    if not np.isfinite(y.data).all():
        return GradCheckReport(False, np.inf, 0, failure_reason="non-finite value of f at x")
    backward(y)
    analytic = x.grad if x.grad is not None else np.zeros_like(x.data)

    flat = x.data.reshape(-1)
    coords = np.arange(flat.size)
    if max_coords is not None and flat.size > max_coords:
        rng = np.random.default_rng(seed)
        coords = rng.choice(flat.size, size=max_coords, replace=False)
        coords.sort()

    worst = GradCheckReport(True, 0.0, len(coords))
    analytic_flat = analytic.reshape(-1)
    for idx in coords:
        original = flat[idx]
        flat[idx] = original + eps
        f_plus = f(x).item()
        flat[idx] = original - eps
        f_minus = f(x).item()
        flat[idx] = original
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            return GradCheckReport(False, np.inf, len(coords),
                                   worst_coord=np.unravel_index(idx, x.shape),
                                   failure_reason="non-finite value of f near x")
        numeric = (f_plus - f_minus) / (2.0 * eps)
        a = analytic_flat[idx]
        rel = abs(a - numeric) / max(abs(a), abs(numeric), floor)
        if rel > worst.max_rel_err:
            worst.max_rel_err = rel
            worst.worst_coord = tuple(int(v) for v in np.unravel_index(int(idx), x.shape))
            worst.analytic_at_worst = float(a)
            worst.numeric_at_worst = float(numeric)
    worst.passed = worst.max_rel_err <= rel_tol
    return worst
