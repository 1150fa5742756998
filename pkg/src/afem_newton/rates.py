"""Least-squares convergence-rate fits in log-log scale."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["RateFit", "fit_rate"]


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    window: tuple[int, int]  # [start, stop) into the input series


def fit_rate(x, y, window: float = 1.0, decades: float | None = None) -> RateFit:
    """Fit ``log y = slope * log x + intercept`` over the tail of a series.

    ``window`` keeps the last fraction of the points; ``decades`` instead
    keeps the points with ``x >= max(x) / 10**decades``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1D arrays of equal length")
    n = len(x)
    if decades is not None:
        start = int(np.argmax(x >= x.max() / 10.0 ** decades)) if n else 0
    else:
        if not 0 < window <= 1:
            raise ValueError("window must be a fraction in (0, 1]")
        start = n - int(np.ceil(window * n))
    xs, ys = x[start:], y[start:]
    if len(xs) < 4:
        raise ValueError(f"rate fit needs at least 4 points in the window, got {len(xs)}")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ValueError("rate fit needs positive values")
    lx, ly = np.log(xs), np.log(ys)
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else min(max(1.0 - ss_res / ss_tot, 0.0), 1.0)
    return RateFit(float(slope), float(intercept), r2, (start, n))
