"""Conforming Lagrange spaces S^p_0 on triangulations.

Degrees of freedom are numbered vertices first, then ``p - 1`` equispaced
nodes per edge (ordered from the lower to the higher global vertex index),
then interior nodes.  Coefficient vectors passed around the solver hold the
free (interior) dofs only; :meth:`FESpace.extend` pads boundary zeros.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .mesh import Triangulation
from .quadrature import QuadRule, edge_rule, triangle_rule

__all__ = ["LagrangeBasis", "FESpace", "build_space", "prolongation_matrix", "prolongate", "evaluate"]

SUPPORTED_DEGREES = (1, 2, 3, 4)


def _lattice(p):
    """Barycentric multi-indices in local node order."""
    nodes = [(p, 0, 0), (0, p, 0), (0, 0, p)]
    for i in range(3):
        a, b = (i + 1) % 3, (i + 2) % 3
        for j in range(1, p):
            idx = [0, 0, 0]
            idx[a] = p - j
            idx[b] = j
            nodes.append(tuple(idx))
    for i in range(1, p):
        for j in range(1, p - i):
            nodes.append((i, j, p - i - j))
    return nodes


class LagrangeBasis:
    """Nodal basis of degree ``p`` on the reference triangle.

    Each basis function is ``P_i(l0) P_j(l1) P_k(l2)`` with
    ``P_n(s) = prod_{m<n} (p s - m) / (m + 1)``, which is one at its own
    lattice node and zero at all others.
    """

    def __init__(self, p: int):
        if p not in SUPPORTED_DEGREES:
            raise ValueError(f"unsupported polynomial degree p={p}; expected one of {SUPPORTED_DEGREES}")
        self.p = p
        self.multi_indices = np.array(_lattice(p))
        self.nodes = self.multi_indices / p
        P = np.polynomial.Polynomial
        self._factors = []
        for n in range(p + 1):
            poly = P([1.0])
            for m in range(n):
                poly = poly * P([-m / (m + 1), p / (m + 1)])
            self._factors.append((poly, poly.deriv(1), poly.deriv(2)))

    def __len__(self):
        return len(self.multi_indices)

    def _tables(self, bary, order):
        bary = np.atleast_2d(bary)
        # tab[n, d, a, q] = (d-th derivative of P_n)(lambda_a at point q)
        tab = np.empty((self.p + 1, order + 1, 3, len(bary)))
        for n, polys in enumerate(self._factors):
            for d in range(order + 1):
                tab[n, d] = polys[d](bary.T)
        return tab

    def values(self, bary) -> np.ndarray:
        """(nb, nq) basis values at barycentric points."""
        t = self._tables(bary, 0)
        mi = self.multi_indices
        return t[mi[:, 0], 0, 0] * t[mi[:, 1], 0, 1] * t[mi[:, 2], 0, 2]

    def derivatives(self, bary) -> np.ndarray:
        """(nb, nq, 3) derivatives with respect to each barycentric coordinate."""
        t = self._tables(bary, 1)
        mi = self.multi_indices
        out = np.empty((len(mi), t.shape[-1], 3))
        for a in range(3):
            f = [t[mi[:, c], int(c == a), c] for c in range(3)]
            out[..., a] = f[0] * f[1] * f[2]
        return out

    def hessians(self, bary) -> np.ndarray:
        """(nb, nq, 3, 3) second derivatives in barycentric coordinates."""
        t = self._tables(bary, 2)
        mi = self.multi_indices
        out = np.empty((len(mi), t.shape[-1], 3, 3))
        for a in range(3):
            for b in range(3):
                f = [t[mi[:, c], int(c == a) + int(c == b), c] for c in range(3)]
                out[..., a, b] = f[0] * f[1] * f[2]
        return out


class QuadData(NamedTuple):
    rule: QuadRule
    weights: np.ndarray    # (nt, nq) weights times element area
    points: np.ndarray     # (nt, nq, 2) physical points
    values: np.ndarray     # (nb, nq) basis values (same on every element)
    gradients: np.ndarray  # (nt, nb, nq, 2) physical basis gradients


@dataclass(frozen=True, eq=False)
class FESpace:
    mesh: Triangulation
    order: int
    basis: LagrangeBasis
    element_dofs: np.ndarray  # (nt, nb)
    dof_coords: np.ndarray    # (ndofs, 2)
    free_dofs: np.ndarray
    free_index: np.ndarray    # (ndofs,) position among free dofs, -1 on the boundary

    @property
    def n_dofs(self) -> int:
        return len(self.dof_coords)

    @property
    def n_free(self) -> int:
        return len(self.free_dofs)

    def extend(self, v) -> np.ndarray:
        """Full coefficient vector with zero boundary values.

        A vector that already has one entry per dof is returned as a copy.
        """
        v = np.asarray(v, dtype=float)
        if len(v) == self.n_dofs and self.n_dofs != self.n_free:
            return v.copy()
        full = np.zeros(self.n_dofs)
        full[self.free_dofs] = v
        return full

    def interpolate(self, g, boundary: bool = False) -> np.ndarray:
        """Nodal interpolant of ``g(x, y)``: free-dof coefficients, or all dofs with ``boundary``."""
        x = self.dof_coords if boundary else self.dof_coords[self.free_dofs]
        return np.asarray(g(x[:, 0], x[:, 1]), dtype=float) * np.ones(len(x))

    def local_coefficients(self, v) -> np.ndarray:
        return self.extend(v)[self.element_dofs]

    @functools.cached_property
    def _quad_cache(self) -> dict:
        return {}

    def quadrature(self, degree: int | None = None) -> QuadData:
        """Element quadrature data, exact to ``degree`` (default 2p + 2)."""
        degree = 2 * self.order + 2 if degree is None else degree
        if degree not in self._quad_cache:
            self._quad_cache[degree] = self._build_quadrature(degree)
        return self._quad_cache[degree]

    def _build_quadrature(self, degree):
        rule = triangle_rule(degree)
        x = self.mesh.vertices[self.mesh.triangles]
        points = np.einsum("qa,tad->tqd", rule.points, x)
        weights = self.mesh.areas[:, None] * rule.weights[None, :]
        dref = self.basis.derivatives(rule.points)
        grads = np.einsum("bqa,tad->tbqd", dref, self.mesh.barycentric_gradients)
        return QuadData(rule, weights, points, self.basis.values(rule.points), grads)

    @functools.cached_property
    def sparsity(self):
        """COO row/col indices (free numbering) for element matrices, plus the keep-mask."""
        fi = self.free_index[self.element_dofs]
        nb = fi.shape[1]
        rows = np.repeat(fi, nb, axis=1).ravel()
        cols = np.tile(fi, (1, nb)).ravel()
        keep = (rows >= 0) & (cols >= 0)
        return rows[keep], cols[keep], keep

    def assemble_matrix(self, local: np.ndarray) -> sp.csr_matrix:
        """Sum (nt, nb, nb) element matrices into a free-dof CSR matrix."""
        rows, cols, keep = self.sparsity
        n = self.n_free
        return sp.coo_matrix((local.reshape(-1)[keep], (rows, cols)), shape=(n, n)).tocsr()

    def assemble_vector(self, local: np.ndarray) -> np.ndarray:
        """Sum (nt, nb) element vectors; deterministic element-order accumulation."""
        full = np.bincount(self.element_dofs.ravel(), weights=local.ravel(), minlength=self.n_dofs)
        return full[self.free_dofs]

    def edge_quadrature(self, degree: int | None = None):
        """Edge rule plus, per local edge i, basis derivatives at the edge points.

        Points on local edge i run from local vertex i+1 (s = 0) to i+2 (s = 1).
        """
        rule = edge_rule(2 * self.order if degree is None else degree)
        tables = []
        for i in range(3):
            bary = np.zeros((len(rule), 3))
            bary[:, (i + 1) % 3] = 1.0 - rule.points
            bary[:, (i + 2) % 3] = rule.points
            tables.append(self.basis.derivatives(bary))
        return rule, np.stack(tables)  # (3, nb, nqe, 3)


def build_space(mesh: Triangulation, p: int) -> FESpace:
    """Lagrange space of degree ``p`` with homogeneous Dirichlet conditions."""
    basis = LagrangeBasis(p)
    nt, nv, ne = mesh.n_triangles, mesh.n_vertices, len(mesh.edges)
    per_edge = p - 1
    per_cell = (p - 1) * (p - 2) // 2
    t = mesh.triangles
    blocks = [t]
    if per_edge:
        j = np.arange(per_edge)
        for i in range(3):
            a = t[:, (i + 1) % 3]
            b = t[:, (i + 2) % 3]
            local = np.where((a < b)[:, None], j[None, :], per_edge - 1 - j[None, :])
            blocks.append(nv + mesh.element_edges[:, i][:, None] * per_edge + local)
    if per_cell:
        blocks.append(nv + ne * per_edge + np.arange(nt)[:, None] * per_cell + np.arange(per_cell)[None, :])
    element_dofs = np.hstack(blocks).astype(np.int64)
    n_dofs = nv + ne * per_edge + nt * per_cell

    x = mesh.vertices[t]
    node_coords = np.einsum("ba,tad->tbd", basis.nodes, x)
    dof_coords = np.empty((n_dofs, 2))
    dof_coords[element_dofs.ravel()] = node_coords.reshape(-1, 2)

    on_boundary = np.zeros(n_dofs, dtype=bool)
    on_boundary[mesh.boundary_vertices] = True
    if per_edge:
        bedges = np.flatnonzero(mesh.boundary_edge_mask)
        on_boundary[(nv + bedges[:, None] * per_edge + np.arange(per_edge)[None, :]).ravel()] = True
    free = np.flatnonzero(~on_boundary)
    free_index = -np.ones(n_dofs, dtype=np.int64)
    free_index[free] = np.arange(len(free))
    for arr in (element_dofs, dof_coords, free, free_index):
        arr.setflags(write=False)
    return FESpace(mesh, p, basis, element_dofs, dof_coords, free, free_index)


def _ancestors(coarse: Triangulation, fine: Triangulation) -> np.ndarray:
    anc = np.arange(fine.n_triangles)
    mesh = fine
    while mesh is not coarse:
        if mesh.coarse is None or mesh.parent is None:
            if (mesh.n_triangles == coarse.n_triangles and np.array_equal(mesh.triangles, coarse.triangles)
                    and np.array_equal(mesh.vertices, coarse.vertices)):
                return anc
            raise ValueError("meshes are not nested: fine mesh is not a refinement of the coarse mesh")
        anc = mesh.parent[anc]
        mesh = mesh.coarse
    return anc


def prolongation_matrix(coarse: FESpace, fine: FESpace) -> sp.csr_matrix:
    """Sparse (fine free) x (coarse free) matrix of the nested-space embedding."""
    if coarse.order != fine.order:
        raise ValueError("prolongation needs equal polynomial degrees")
    anc = _ancestors(coarse.mesh, fine.mesh)
    # fine dofs each need one representative element
    dofs, first = np.unique(fine.element_dofs.ravel(), return_index=True)
    elem = first // fine.element_dofs.shape[1]
    dofs_free = fine.free_index[dofs]
    sel = dofs_free >= 0
    dofs, elem, rows = dofs[sel], elem[sel], dofs_free[sel]

    cm = coarse.mesh
    T = anc[elem]
    X = cm.vertices[cm.triangles[T]]  # (n, 3, 2)
    J = np.stack([X[:, 1] - X[:, 0], X[:, 2] - X[:, 0]], axis=-1)  # columns = edge vectors
    rhs = fine.dof_coords[dofs] - X[:, 0]
    l12 = np.linalg.solve(J, rhs[..., None])[..., 0]
    bary = np.column_stack([1.0 - l12.sum(axis=1), l12])
    vals = coarse.basis.values(bary).T  # (n, nb)
    cols = coarse.free_index[coarse.element_dofs[T]]
    nb = vals.shape[1]
    r = np.repeat(rows, nb)
    c = cols.ravel()
    v = vals.ravel()
    keep = (c >= 0) & (np.abs(v) > 1e-13)
    return sp.csr_matrix((v[keep], (r[keep], c[keep])), shape=(fine.n_free, coarse.n_free))


def prolongate(coarse: FESpace, fine: FESpace, v) -> np.ndarray:
    """Represent the coarse function ``v`` in the fine space (nested iteration)."""
    if coarse is fine:
        return np.array(v, dtype=float)
    return prolongation_matrix(coarse, fine) @ np.asarray(v, dtype=float)


def evaluate(space: FESpace, v, t: int, rule: QuadRule):
    """Values and gradients of ``v`` on triangle ``t`` at the rule's points."""
    coef = space.extend(v)[space.element_dofs[t]]
    values = coef @ space.basis.values(rule.points)
    dref = space.basis.derivatives(rule.points)
    grads = np.einsum("b,bqa,ad->qd", coef, dref, space.mesh.barycentric_gradients[t])
    return values, grads
