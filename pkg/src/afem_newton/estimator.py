"""Residual-based a posteriori error estimator.

For each triangle T,

    eta(T)^2 = h_T^2 ||f + div(A grad v - fvec) - b . grad v - c(v)||_T^2
               + h_T ||[(A grad v - fvec) . n]||_{dT interior}^2

with h_T the longest edge.  Each interior edge contributes its full squared
jump to both neighbors; boundary edges contribute nothing.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fespace import FESpace
from .problem import SemilinearProblem, _apply_diffusion, _gradient

__all__ = ["LocalEstimators", "local_estimators", "restricted_total"]


@dataclass(frozen=True)
class LocalEstimators:
    eta_sq: np.ndarray

    @property
    def total(self) -> float:
        return float(np.sqrt(np.sum(self.eta_sq)))

    def __len__(self):
        return len(self.eta_sq)


def _interior_residual(prob, space, U, degree):
    q = space.quadrature(degree)
    mesh = space.mesh
    nt = mesh.n_triangles
    u = U @ q.values
    grad = _gradient(U, q)
    x, y = q.points[..., 0], q.points[..., 1]
    r = prob.load(x, y) - grad @ prob.convection - prob.reaction(u)
    if space.order > 1:
        href = space.basis.hessians(q.rule.points)          # (nb, nq, 3, 3)
        gl = mesh.barycentric_gradients[:, None]             # (nt, 1, 3, 2)
        w = (U @ href.reshape(len(href), -1)).reshape(nt, -1, 3, 3)
        hess = gl.transpose(0, 1, 3, 2) @ w @ gl             # (nt, nq, 2, 2)
        A = prob.element_diffusion(space)
        r = r + np.einsum("tde,tqde->tq", A, hess)
    if prob.flux_divergence is not None:
        r = r - prob.flux_divergence(x, y)
    return np.sum(q.weights * r * r, axis=1)


def _jump_terms(prob, space, U, degree):
    mesh = space.mesh
    rule, dtab = space.edge_quadrature(degree)
    nt = mesh.n_triangles
    nqe = len(rule)
    # flux[t, i, q] = (A grad v - fvec) . n_i at point q of local edge i
    w = (U @ dtab.transpose(1, 0, 2, 3).reshape(dtab.shape[1], -1)).reshape(nt, 3, nqe, 3)
    grad = w @ mesh.barycentric_gradients[:, None]
    flux_vec = _apply_diffusion(prob, space, grad)
    if prob.flux is not None:
        x = mesh.vertices[mesh.triangles]
        start = x[:, [1, 2, 0]]
        end = x[:, [2, 0, 1]]
        pts = start[:, :, None, :] + rule.points[None, None, :, None] * (end - start)[:, :, None, :]
        flux_vec = flux_vec - prob.flux(pts[..., 0], pts[..., 1])
    flux = np.sum(flux_vec * mesh.normals[:, :, None, :], axis=-1)

    nb = mesh.neighbors
    interior = nb >= 0
    t, i = np.nonzero(interior)
    # the neighbor traverses the shared edge in the opposite direction
    other = flux[nb[t, i], mesh.neighbor_local[t, i], ::-1]
    jump = flux[t, i] + other
    sq = mesh.edge_lengths[t, i] * ((jump * jump) @ rule.weights)
    return np.bincount(t, weights=sq, minlength=mesh.n_triangles)


def local_estimators(prob: SemilinearProblem, space: FESpace, v, degree: int | None = None) -> LocalEstimators:
    """Squared local contributions eta(T, v)^2 for every triangle."""
    U = space.local_coefficients(v)
    h = space.mesh.diameters
    vol = _interior_residual(prob, space, U, degree)
    edge = _jump_terms(prob, space, U, None)
    return LocalEstimators(h * h * vol + h * edge)


def restricted_total(est: LocalEstimators, subset) -> float:
    """Estimator restricted to a subset of triangles."""
    idx = np.asarray(list(subset) if not isinstance(subset, np.ndarray) else subset, dtype=np.int64)
    return float(np.sqrt(np.sum(est.eta_sq[np.unique(idx)])))
