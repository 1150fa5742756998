"""Quadrature on the reference triangle and on edges.

Triangle rules are collapsed Gauss-Jacobi (Duffy) products: all weights are
positive and any exactness degree is available.  Points are barycentric
``(lambda_0, lambda_1, lambda_2)``; weights are normalised to sum to one, so
``sum(w * g) * area`` integrates ``g`` over a physical triangle.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


@dataclass(frozen=True)
class QuadRule:
    points: np.ndarray   # (nq, 3) barycentric, or (nq,) on [0, 1] for edges
    weights: np.ndarray  # (nq,), sum 1
    degree: int

    def __len__(self):
        return len(self.weights)


@functools.lru_cache(maxsize=None)
def triangle_rule(degree: int) -> QuadRule:
    """Positive-weight rule exact for polynomials of total degree ``degree``."""
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    n = degree // 2 + 1
    # s carries the Jacobian (1 - s) as Jacobi weight, t is plain Gauss-Legendre
    xs, ws = roots_jacobi(n, 1.0, 0.0)
    xt, wt = roots_legendre(n)
    s = 0.5 * (1.0 + xs)
    t = 0.5 * (1.0 + xt)
    ws = ws / 4.0
    wt = wt / 2.0
    S, T = np.meshgrid(s, t, indexing="ij")
    x = S.ravel()
    y = ((1.0 - S) * T).ravel()
    w = np.outer(ws, wt).ravel() * 2.0  # reference area 1/2 -> weights sum to 1
    points = np.stack([1.0 - x - y, x, y], axis=1)
    return QuadRule(points, w, degree)


@functools.lru_cache(maxsize=None)
def edge_rule(degree: int) -> QuadRule:
    """Gauss-Legendre on [0, 1], symmetric under s -> 1 - s."""
    n = degree // 2 + 1
    x, w = roots_legendre(n)
    return QuadRule(0.5 * (1.0 + x), w / 2.0, degree)
