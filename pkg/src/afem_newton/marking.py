"""Doerfler marking with minimal cardinality."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["MarkParams", "doerfler_mark"]


@dataclass(frozen=True)
class MarkParams:
    theta: float = 0.3
    cmark: float = 1.0  # the sorted greedy selection is exactly minimal

    def __post_init__(self):
        if not 0.0 < self.theta <= 1.0:
            raise ValueError(f"theta must lie in (0, 1], got {self.theta}")
        if self.cmark < 1.0:
            raise ValueError("cmark must be >= 1")


def doerfler_mark(eta_sq, params: MarkParams | float) -> np.ndarray:
    """Smallest set of triangles carrying a ``theta`` fraction of ``sum(eta_sq)``.

    Indicators are taken in descending order, ties by lower index.  Returns
    sorted triangle indices; empty when the estimator vanishes.
    """
    theta = params.theta if isinstance(params, MarkParams) else MarkParams(float(params)).theta
    eta_sq = np.asarray(getattr(eta_sq, "eta_sq", eta_sq), dtype=float)
    if eta_sq.size == 0:
        raise ValueError("no indicators to mark")
    if theta == 1.0:
        return np.flatnonzero(eta_sq > 0)
    order = np.argsort(-eta_sq, kind="stable")
    csum = np.cumsum(eta_sq[order])
    if csum[-1] <= 0.0:
        return np.empty(0, dtype=np.int64)
    n = int(np.searchsorted(csum, theta * csum[-1], side="left")) + 1
    return np.sort(order[:n])
