"""Conforming triangulations with newest-vertex bisection (NVB).

A :class:`Triangulation` stores vertex coordinates, counter-clockwise
triangles, and one refinement edge per triangle (the local index ``r`` of the
vertex opposite that edge).  Meshes are immutable; :func:`refine` returns a
new mesh whose ``parent`` array points into the mesh it was refined from.

Example
-------
>>> mesh = initial_mesh("l_shape")
>>> fine = refine(mesh, [0, 3])
>>> fine.n_triangles > mesh.n_triangles
True
"""
from __future__ import annotations

import functools
import os
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

__all__ = [
    "MeshError",
    "Triangulation",
    "ElementGeometry",
    "from_arrays",
    "initial_mesh",
    "refine",
    "uniform_refine",
    "element_geometry",
    "read_mesh",
    "write_mesh",
    "is_conforming",
    "min_angles",
]

# relative tolerance used only to detect ties between edge lengths
_TIE_RTOL = 1e-12


class MeshError(ValueError):
    """Malformed or non-conforming mesh input."""


@dataclass(frozen=True, eq=False)
class Triangulation:
    """Conforming 2D triangulation.

    Attributes
    ----------
    vertices : (nv, 2) float array
    triangles : (nt, 3) int array, counter-clockwise
    refinement_edge : (nt,) int array
        Local index of the vertex opposite the refinement edge.
    generation : (nt,) int array
        Number of bisections separating a triangle from its initial ancestor.
    parent : (nt,) int array or None
        Index of the triangle in ``coarse`` this triangle came from.
    root : (nt,) int array
        Index of the initial-mesh ancestor (used for piecewise data).
    coarse : Triangulation or None
        The mesh this one was refined from.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    refinement_edge: np.ndarray
    generation: np.ndarray
    root: np.ndarray
    parent: Optional[np.ndarray] = None
    coarse: Optional["Triangulation"] = field(default=None, repr=False)

    def __post_init__(self):
        for name in ("vertices", "triangles", "refinement_edge", "generation", "root", "parent"):
            arr = getattr(self, name)
            if arr is not None:
                arr.setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def __len__(self):
        return self.n_triangles

    # --- topology -------------------------------------------------------

    @functools.cached_property
    def _topology(self):
        t = self.triangles
        # local edge i is opposite local vertex i
        a = t[:, [1, 2, 0]]
        b = t[:, [2, 0, 1]]
        pairs = np.stack([np.minimum(a, b), np.maximum(a, b)], axis=-1).reshape(-1, 2)
        edges, inverse, counts = np.unique(pairs, axis=0, return_inverse=True, return_counts=True)
        inverse = inverse.reshape(-1)
        if np.any(counts > 2):
            raise MeshError("an edge is shared by more than two triangles")
        element_edges = inverse.reshape(-1, 3)

        # edge -> (element, local edge) for both sides; -1 where absent
        edge_elements = -np.ones((len(edges), 2), dtype=np.int64)
        edge_local = -np.ones((len(edges), 2), dtype=np.int64)
        flat = np.arange(pairs.shape[0])
        order = np.argsort(inverse, kind="stable")
        sorted_edges = inverse[order]
        first = np.ones(len(order), dtype=bool)
        first[1:] = sorted_edges[1:] != sorted_edges[:-1]
        slot = np.where(first, 0, 1)
        edge_elements[sorted_edges, slot] = flat[order] // 3
        edge_local[sorted_edges, slot] = flat[order] % 3

        neighbors = -np.ones_like(element_edges)
        neighbor_local = -np.ones_like(element_edges)
        for s, o in ((0, 1), (1, 0)):
            has = (edge_elements[:, o] >= 0) & (edge_elements[:, s] >= 0)
            el = edge_elements[has, s]
            loc = edge_local[has, s]
            neighbors[el, loc] = edge_elements[has, o]
            neighbor_local[el, loc] = edge_local[has, o]
        return edges, element_edges, edge_elements, neighbors, neighbor_local, counts

    @property
    def edges(self) -> np.ndarray:
        """(ne, 2) sorted vertex pairs."""
        return self._topology[0]

    @property
    def element_edges(self) -> np.ndarray:
        """(nt, 3) edge index of the edge opposite each local vertex."""
        return self._topology[1]

    @property
    def edge_elements(self) -> np.ndarray:
        return self._topology[2]

    @property
    def neighbors(self) -> np.ndarray:
        """(nt, 3) triangle across each local edge, -1 on the boundary."""
        return self._topology[3]

    @property
    def neighbor_local(self) -> np.ndarray:
        """(nt, 3) local index of the shared edge inside the neighbor."""
        return self._topology[4]

    @functools.cached_property
    def boundary_edge_mask(self) -> np.ndarray:
        return self._topology[5] == 1

    @property
    def boundary_edges(self) -> np.ndarray:
        return self.edges[self.boundary_edge_mask]

    @functools.cached_property
    def boundary_vertices(self) -> np.ndarray:
        return np.unique(self.boundary_edges)

    # --- geometry -------------------------------------------------------

    @functools.cached_property
    def areas(self) -> np.ndarray:
        x = self.vertices[self.triangles]
        d1 = x[:, 1] - x[:, 0]
        d2 = x[:, 2] - x[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @functools.cached_property
    def edge_vectors(self) -> np.ndarray:
        """(nt, 3, 2): tangent of local edge i, from vertex i+1 to vertex i+2."""
        x = self.vertices[self.triangles]
        return x[:, [2, 0, 1]] - x[:, [1, 2, 0]]

    @functools.cached_property
    def edge_lengths(self) -> np.ndarray:
        return np.linalg.norm(self.edge_vectors, axis=-1)

    @functools.cached_property
    def diameters(self) -> np.ndarray:
        """Longest edge of each triangle (the mesh-size h_T)."""
        return self.edge_lengths.max(axis=1)

    @functools.cached_property
    def normals(self) -> np.ndarray:
        """(nt, 3, 2) outward unit normals of the local edges."""
        v = self.edge_vectors
        n = np.stack([v[..., 1], -v[..., 0]], axis=-1)
        return n / self.edge_lengths[..., None]

    @functools.cached_property
    def barycentric_gradients(self) -> np.ndarray:
        """(nt, 3, 2) constant gradients of the barycentric coordinates."""
        # grad(lambda_i) = rotated opposite edge / (2 area), pointing inward
        return -self.normals * (self.edge_lengths / (2.0 * self.areas[:, None]))[..., None]


def _assign_refinement_edges(vertices, triangles):
    """Longest edge; ties broken by the lowest opposite-vertex index."""
    x = vertices[triangles]
    lengths = np.linalg.norm(x[:, [2, 0, 1]] - x[:, [1, 2, 0]], axis=-1)
    longest = lengths.max(axis=1, keepdims=True)
    candidate = lengths >= longest * (1.0 - _TIE_RTOL)
    key = np.where(candidate, triangles, np.iinfo(np.int64).max)
    return np.argmin(key, axis=1)


def from_arrays(vertices, triangles, refinement_edge=None) -> Triangulation:
    """Build and validate an initial triangulation.

    Clockwise triangles are reoriented.  Missing refinement edges are
    assigned to the longest edge of each triangle.
    """
    vertices = np.array(vertices, dtype=float).reshape(-1, 2)
    triangles = np.array(triangles, dtype=np.int64).reshape(-1, 3)
    if len(triangles) == 0:
        raise MeshError("mesh has no triangles")
    if triangles.min() < 0 or triangles.max() >= len(vertices):
        raise MeshError("triangle references a vertex index out of range")
    if np.any(triangles[:, 0] == triangles[:, 1]) or np.any(triangles[:, 1] == triangles[:, 2]) \
            or np.any(triangles[:, 0] == triangles[:, 2]):
        raise MeshError("triangle with repeated vertex")

    x = vertices[triangles]
    d1 = x[:, 1] - x[:, 0]
    d2 = x[:, 2] - x[:, 0]
    signed = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    scale = np.max(np.abs(vertices)) if len(vertices) else 1.0
    bad = np.abs(signed) <= 1e-14 * max(scale, 1.0) ** 2
    if np.any(bad):
        raise MeshError(f"zero-area triangle at index {int(np.flatnonzero(bad)[0])}")
    flip = signed < 0
    if refinement_edge is not None:
        refinement_edge = np.array(refinement_edge, dtype=np.int64).reshape(-1)
        if refinement_edge.shape != (len(triangles),) or np.any((refinement_edge < 0) | (refinement_edge > 2)):
            raise MeshError("refinement edge indices must lie in {0, 1, 2}")
        # swapping local vertices 1 and 2 moves the opposite-vertex index accordingly
        refinement_edge = np.where(flip, np.array([0, 2, 1])[refinement_edge], refinement_edge)
    triangles = triangles.copy()
    triangles[flip] = triangles[flip][:, [0, 2, 1]]
    if refinement_edge is None:
        refinement_edge = _assign_refinement_edges(vertices, triangles)

    nt = len(triangles)
    mesh = Triangulation(
        vertices=vertices,
        triangles=triangles,
        refinement_edge=refinement_edge,
        generation=np.zeros(nt, dtype=np.int64),
        root=np.arange(nt, dtype=np.int64),
    )
    try:
        mesh._topology
    except MeshError as err:
        raise MeshError(f"non-conforming input: {err}") from None
    if not is_conforming(mesh):
        raise MeshError("non-conforming input: hanging node on an edge")
    return mesh


def _l_shape():
    # three unit squares of (-1,1)^2 \ [0,1)^2, each cut into four through its centre
    corners = {(-1, -1): 0, (0, -1): 1, (1, -1): 2, (-1, 0): 3, (0, 0): 4, (1, 0): 5,
               (-1, 1): 6, (0, 1): 7}
    vertices = [list(c) for c in corners]
    triangles = []
    for x0, y0 in [(-1, -1), (0, -1), (-1, 0)]:
        c = len(vertices)
        vertices.append([x0 + 0.5, y0 + 0.5])
        ring = [(x0, y0), (x0 + 1, y0), (x0 + 1, y0 + 1), (x0, y0 + 1)]
        for a, b in zip(ring, ring[1:] + ring[:1]):
            triangles.append([c, corners[a], corners[b]])
    return from_arrays(vertices, triangles)


def _unit_square():
    return from_arrays([[0, 0], [1, 0], [1, 1], [0, 1]], [[0, 1, 2], [0, 2, 3]])


def initial_mesh(domain: str | os.PathLike = "l_shape") -> Triangulation:
    """Coarse mesh for ``"l_shape"``, ``"unit_square"``, or a mesh file."""
    if domain == "l_shape":
        return _l_shape()
    if domain == "unit_square":
        return _unit_square()
    if os.path.exists(domain):
        return read_mesh(domain)
    raise MeshError(f"unknown domain {domain!r} (expected l_shape, unit_square, or an existing mesh file)")


def _bisect(tri, mid):
    """Children of (v0, v1, v2) with refinement edge (v1, v2) and midpoint ``mid``."""
    return (np.stack([mid, tri[:, 0], tri[:, 1]], axis=1),
            np.stack([mid, tri[:, 2], tri[:, 0]], axis=1))


def refine(mesh: Triangulation, marked: Iterable[int]) -> Triangulation:
    """Newest-vertex bisection of the marked triangles plus conforming closure.

    Every marked triangle is bisected at least once.  Closure is resolved on
    edges: a triangle with any edge to be split also splits its refinement
    edge, until nothing changes.  This gives the same mesh as recursively
    bisecting the neighbor across each hanging refinement edge.
    """
    marked = np.unique(np.asarray(list(marked) if not isinstance(marked, np.ndarray) else marked,
                                  dtype=np.int64))
    if marked.size and (marked[0] < 0 or marked[-1] >= mesh.n_triangles):
        raise IndexError("marked triangle index out of range")
    nt = mesh.n_triangles
    if marked.size == 0:
        return Triangulation(mesh.vertices, mesh.triangles, mesh.refinement_edge, mesh.generation,
                             mesh.root, parent=np.arange(nt), coarse=mesh)

    # rotate so that the refinement edge is opposite local vertex 0
    r = mesh.refinement_edge
    rot = (r[:, None] + np.arange(3)[None, :]) % 3
    tri = np.take_along_axis(mesh.triangles, rot, axis=1)
    ee = np.take_along_axis(mesh.element_edges, rot, axis=1)

    split = np.zeros(len(mesh.edges), dtype=bool)
    split[ee[marked, 0]] = True
    while True:
        need = split[ee].any(axis=1) & ~split[ee[:, 0]]
        if not need.any():
            break
        split[ee[need, 0]] = True

    # midpoints keyed by edge index, never by coordinates
    nv = mesh.n_vertices
    split_idx = np.flatnonzero(split)
    mid_of = -np.ones(len(mesh.edges), dtype=np.int64)
    mid_of[split_idx] = nv + np.arange(len(split_idx))
    e = mesh.edges[split_idx]
    vertices = np.vstack([mesh.vertices, 0.5 * (mesh.vertices[e[:, 0]] + mesh.vertices[e[:, 1]])])

    s = split[ee]
    keep = ~s[:, 0]
    only0 = s[:, 0] & ~s[:, 1] & ~s[:, 2]
    with1 = s[:, 0] & s[:, 1] & ~s[:, 2]
    with2 = s[:, 0] & ~s[:, 1] & s[:, 2]
    both = s[:, 0] & s[:, 1] & s[:, 2]

    new_tri, new_parent, new_gen, new_rank, new_ref = [], [], [], [], []

    idx = np.flatnonzero(keep)
    new_tri.append(mesh.triangles[idx])
    new_parent.append(idx)
    new_gen.append(mesh.generation[idx])
    new_rank.append(np.zeros(len(idx), dtype=np.int64))
    new_ref.append(mesh.refinement_edge[idx])

    for mask, depth_a, depth_b in ((only0, 1, 1), (with1, 1, 2), (with2, 2, 1), (both, 2, 2)):
        idx = np.flatnonzero(mask)
        if idx.size == 0:
            continue
        t = tri[idx]
        m0 = mid_of[ee[idx, 0]]
        child_a, child_b = _bisect(t, m0)
        out = []
        if depth_a == 2:  # edge opposite v2 = (v0, v1) is the refinement edge of child_a
            out.extend(_bisect(child_a, mid_of[ee[idx, 2]]))
        else:
            out.append(child_a)
        if depth_b == 2:  # edge opposite v1 = (v2, v0) is the refinement edge of child_b
            out.extend(_bisect(child_b, mid_of[ee[idx, 1]]))
        else:
            out.append(child_b)
        depths = ([2, 2] if depth_a == 2 else [1]) + ([2, 2] if depth_b == 2 else [1])
        for rank, (child, depth) in enumerate(zip(out, depths)):
            new_tri.append(child)
            new_parent.append(idx)
            new_gen.append(mesh.generation[idx] + depth)
            new_rank.append(np.full(len(idx), rank))
            new_ref.append(np.zeros(len(idx), dtype=np.int64))

    parent = np.concatenate(new_parent)
    rank = np.concatenate(new_rank)
    order = np.lexsort((rank, parent))
    parent = parent[order]
    return Triangulation(
        vertices=vertices,
        triangles=np.concatenate(new_tri)[order],
        refinement_edge=np.concatenate(new_ref)[order],
        generation=np.concatenate(new_gen)[order],
        root=mesh.root[parent],
        parent=parent,
        coarse=mesh,
    )


def uniform_refine(mesh: Triangulation) -> Triangulation:
    """Bisect every triangle once (closure adds nothing beyond that)."""
    return refine(mesh, np.arange(mesh.n_triangles))


@dataclass(frozen=True)
class ElementGeometry:
    h: float
    area: float
    edge_lengths: np.ndarray
    normals: np.ndarray
    neighbors: np.ndarray  # -1 marks a boundary edge


def element_geometry(mesh: Triangulation, t: int) -> ElementGeometry:
    """Size, area, and per-edge data of triangle ``t`` (edge i opposite vertex i)."""
    return ElementGeometry(
        h=float(mesh.diameters[t]),
        area=float(mesh.areas[t]),
        edge_lengths=mesh.edge_lengths[t].copy(),
        normals=mesh.normals[t].copy(),
        neighbors=mesh.neighbors[t].copy(),
    )


def is_conforming(mesh: Triangulation) -> bool:
    """Edge multiplicity, orientation, and hanging-node check.

    A hanging node would sit at the midpoint of a one-sided edge, so every
    one-sided edge's midpoint is looked up among the vertices.  The midpoint
    is computed exactly as :func:`refine` computes it.
    """
    try:
        mesh._topology
    except MeshError:
        return False
    if np.any(mesh.areas <= 0):
        return False
    b = mesh.boundary_edges
    mids = 0.5 * (mesh.vertices[b[:, 0]] + mesh.vertices[b[:, 1]])
    known = set(map(tuple, mesh.vertices.tolist()))
    return not any(tuple(m) in known for m in mids.tolist())


def min_angles(mesh: Triangulation) -> np.ndarray:
    """Smallest interior angle (radians) of each triangle."""
    v = mesh.edge_vectors
    ang = []
    for i in range(3):
        a = -v[:, (i + 1) % 3]
        b = v[:, (i + 2) % 3]
        cos = np.sum(a * b, axis=1) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
        ang.append(np.arccos(np.clip(cos, -1.0, 1.0)))
    return np.min(ang, axis=0)


def read_mesh(path: str | os.PathLike) -> Triangulation:
    """Parse the plain-text mesh format.

    ::

        vertices N
        x y            (N lines)
        triangles M
        i j k r        (M lines, r = local index opposite the refinement edge)
        boundary B     (optional)
        i j            (B lines)
    """
    with open(path) as fh:
        lines = [ln.split() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    pos = 0

    def header(name):
        nonlocal pos
        if pos >= len(lines) or len(lines[pos]) != 2 or lines[pos][0] != name:
            raise MeshError(f"{path}: expected '{name} <count>' at data line {pos + 1}")
        try:
            count = int(lines[pos][1])
        except ValueError:
            raise MeshError(f"{path}: bad count in '{' '.join(lines[pos])}'") from None
        if count < 0 or pos + 1 + count > len(lines):
            raise MeshError(f"{path}: section '{name}' declares {count} rows but the file is shorter")
        rows = lines[pos + 1:pos + 1 + count]
        pos += 1 + count
        return rows

    def table(rows, width, kind, name):
        if any(len(r) != width for r in rows):
            raise MeshError(f"{path}: every '{name}' row needs {width} entries")
        try:
            return np.array(rows, dtype=kind)
        except ValueError:
            raise MeshError(f"{path}: non-numeric entry in '{name}' section") from None

    verts = table(header("vertices"), 2, float, "vertices")
    tris = table(header("triangles"), 4, np.int64, "triangles")
    boundary = None
    if pos < len(lines):
        boundary = table(header("boundary"), 2, np.int64, "boundary")
    if pos != len(lines):
        raise MeshError(f"{path}: unexpected content after data line {pos}")

    mesh = from_arrays(verts, tris[:, :3], tris[:, 3])
    if boundary is not None:
        given = {tuple(sorted(e)) for e in boundary.tolist()}
        inferred = {tuple(e) for e in mesh.boundary_edges.tolist()}
        if given != inferred:
            raise MeshError(f"{path}: boundary section does not match the topological boundary")
    return mesh


def write_mesh(mesh: Triangulation, path: str | os.PathLike) -> None:
    """Write ``mesh`` in the plain-text format read by :func:`read_mesh`."""
    with open(path, "w") as fh:
        fh.write(f"vertices {mesh.n_vertices}\n")
        for x, y in mesh.vertices.tolist():
            fh.write(f"{x!r} {y!r}\n")
        fh.write(f"triangles {mesh.n_triangles}\n")
        for (i, j, k), r in zip(mesh.triangles.tolist(), mesh.refinement_edge.tolist()):
            fh.write(f"{i} {j} {k} {r}\n")
        b = mesh.boundary_edges
        fh.write(f"boundary {len(b)}\n")
        for i, j in b.tolist():
            fh.write(f"{i} {j}\n")
