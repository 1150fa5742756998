import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from afem_newton.mesh import (MeshError, element_geometry, from_arrays, initial_mesh, is_conforming, min_angles,
                              read_mesh, refine, uniform_refine, write_mesh)

from _support import angle_floor, nvb_violations, random_marking_sequence


def test_l_shape_counts(lshape):
    # three unit squares, each cut into four triangles through its centre
    assert lshape.n_triangles == 12
    assert lshape.n_vertices == 11
    assert lshape.areas.sum() == pytest.approx(3.0)
    assert is_conforming(lshape)
    assert len(lshape.boundary_edges) == 8 * 1 + 0  # each unit boundary edge is one mesh edge


def test_l_shape_excludes_quadrant(lshape):
    c = lshape.vertices[lshape.triangles].mean(axis=1)
    assert not np.any((c[:, 0] > 0) & (c[:, 1] > 0))
    assert np.all(np.abs(lshape.vertices) <= 1)


def test_unit_square_counts(square):
    assert (square.n_triangles, square.n_vertices) == (2, 4)
    # both refinement edges are the shared diagonal
    e = [tuple(sorted(np.delete(square.triangles[t], square.refinement_edge[t]))) for t in range(2)]
    assert e[0] == e[1]


def test_refinement_edge_is_longest(lshape):
    L = lshape.edge_lengths
    assert np.allclose(L[np.arange(12), lshape.refinement_edge], L.max(axis=1))


def test_file_round_trip(tmp_path, square):
    path = tmp_path / "square.txt"
    write_mesh(square, path)
    again = read_mesh(path)
    assert np.array_equal(again.vertices, square.vertices)
    assert np.array_equal(again.triangles, square.triangles)
    assert np.array_equal(again.refinement_edge, square.refinement_edge)
    assert np.array_equal(initial_mesh(path).triangles, square.triangles)


def test_round_trip_refined(tmp_path):
    meshes, _ = random_marking_sequence(3, depth=4)
    path = tmp_path / "m.txt"
    write_mesh(meshes[-1], path)
    again = read_mesh(path)
    assert np.array_equal(again.vertices, meshes[-1].vertices)
    assert np.array_equal(again.triangles, meshes[-1].triangles)
    assert np.array_equal(again.refinement_edge, meshes[-1].refinement_edge)


@pytest.mark.parametrize("text, match", [
    ("vertices 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 1 0\n", "repeated"),
    ("vertices 3\n0 0\n1 0\ntriangles 1\n0 1 2 0\n", "non-numeric"),
    ("vertices 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 5 0\n", "index"),
    ("vertices 3\n0 0\n1 0\n0 x\ntriangles 1\n0 1 2 0\n", "non-numeric"),
    ("vertices 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 2 3\n", "refinement"),
    ("vertices 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 2 0\nboundary 1\n0 1\n", "boundary"),
    ("points 3\n", "vertices"),
])
def test_read_mesh_errors(tmp_path, text, match):
    path = tmp_path / "bad.txt"
    path.write_text(text)
    with pytest.raises(MeshError, match=match):
        read_mesh(path)


def test_hanging_node_rejected():
    # the left triangle's long edge carries a vertex of the two right triangles
    v = [[0, 0], [1, 0], [1, 1], [1, 0.5], [2, 0.5]]
    t = [[0, 1, 2], [1, 4, 3], [3, 4, 2]]
    with pytest.raises(MeshError):
        from_arrays(np.array(v, float), t)


def test_edge_shared_by_three_rejected():
    v = [[0, 0], [1, 0], [0.5, 1], [0.5, -1], [0.5, 2]]
    t = [[0, 1, 2], [1, 0, 3], [0, 1, 4]]
    with pytest.raises(MeshError):
        from_arrays(np.array(v, float), t)


def test_clockwise_input_is_flipped():
    m = from_arrays([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]], [[0, 1, 2]])
    assert m.areas[0] == pytest.approx(0.5)
    # refinement edge still the hypotenuse, opposite the right angle at vertex 0
    assert m.triangles[0, m.refinement_edge[0]] == 0


def test_refine_empty_is_identity(lshape):
    same = refine(lshape, [])
    assert np.array_equal(same.triangles, lshape.triangles)
    assert np.array_equal(same.vertices, lshape.vertices)
    assert np.array_equal(same.refinement_edge, lshape.refinement_edge)


def test_refine_single_triangle(right_triangle):
    fine = refine(right_triangle, [0])
    assert fine.n_triangles == 2
    assert np.allclose(fine.vertices[3], [0.5, 0.5])
    assert all(3 in tri for tri in fine.triangles)
    assert np.array_equal(fine.generation, [1, 1])
    assert np.array_equal(fine.parent, [0, 0])
    # the new vertex is the newest vertex: opposite the children's refinement edges
    assert all(fine.triangles[t, fine.refinement_edge[t]] == 3 for t in range(2))


def test_refine_square_closure(square):
    fine = refine(square, [0])
    assert fine.n_triangles == 4
    assert fine.n_vertices == 5
    assert is_conforming(fine)


@pytest.mark.parametrize("name, counts", [("unit_square", [4]), ("single", [2, 4])])
def test_uniform_refine_counts(name, counts, right_triangle):
    T = initial_mesh(name) if name != "single" else right_triangle
    for n in counts:
        T = uniform_refine(T)
        assert T.n_triangles == n


def test_uniform_equals_mark_all(lshape):
    a = uniform_refine(lshape)
    b = refine(lshape, np.arange(lshape.n_triangles))
    assert np.array_equal(a.triangles, b.triangles)
    assert a.n_triangles == 24


def test_element_geometry_right_triangle(right_triangle):
    g = element_geometry(right_triangle, 0)
    assert g.h == pytest.approx(math.sqrt(2))
    assert g.area == pytest.approx(0.5)
    assert np.all(g.neighbors == -1)


def test_element_geometry_equilateral():
    m = from_arrays([[0, 0], [1, 0], [0.5, math.sqrt(3) / 2]], [[0, 1, 2]])
    g = element_geometry(m, 0)
    assert g.area == pytest.approx(math.sqrt(3) / 4)
    assert g.h == pytest.approx(1.0)


@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=6, max_size=6))
def test_normals_close_up(coords):
    X = np.array(coords).reshape(3, 2)
    d1, d2 = X[1] - X[0], X[2] - X[0]
    area = 0.5 * abs(d1[0] * d2[1] - d1[1] * d2[0])
    if area < 1e-3:
        return
    g = element_geometry(from_arrays(X, [[0, 1, 2]]), 0)
    assert np.allclose(np.linalg.norm(g.normals, axis=1), 1.0)
    assert np.allclose((g.edge_lengths[:, None] * g.normals).sum(axis=0), 0.0, atol=1e-9 * max(1.0, np.abs(X).max()))


def test_normals_point_outward(lshape):
    X = lshape.vertices[lshape.triangles]
    c = X.mean(axis=1)
    for i in range(3):
        mid = 0.5 * (X[:, (i + 1) % 3] + X[:, (i + 2) % 3])
        assert np.all(np.sum((mid - c) * lshape.normals[:, i], axis=1) > 0)


def test_neighbor_tables_are_consistent(lshape):
    T = uniform_refine(uniform_refine(lshape))
    nb, nl = T.neighbors, T.neighbor_local
    for t in range(T.n_triangles):
        for i in range(3):
            if nb[t, i] >= 0:
                assert nb[nb[t, i], nl[t, i]] == t


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_random_marking_keeps_nvb_properties(seed):
    meshes, n_marked = random_marking_sequence(seed, depth=6)
    floor = angle_floor()
    for coarse, fine in zip(meshes[:-1], meshes[1:]):
        assert fine.n_triangles > coarse.n_triangles
        assert nvb_violations(coarse, fine) == []
        assert min_angles(fine).min() >= floor - 1e-12
    growth = (meshes[-1].n_triangles - meshes[0].n_triangles) / sum(n_marked)
    assert growth <= 20


def test_marked_triangles_are_bisected():
    meshes, _ = random_marking_sequence(7, depth=1)
    coarse, fine = meshes
    rng = np.random.default_rng(11)
    marked = rng.choice(coarse.n_triangles, 3, replace=False)
    fine = refine(coarse, marked)
    for t in marked:
        assert np.count_nonzero(fine.parent == t) >= 2


def test_closure_on_skewed_mesh():
    # random unstructured input: jittered grid
    rng = np.random.default_rng(0)
    n = 5
    xs, ys = np.meshgrid(np.linspace(0, 1, n), np.linspace(0, 1, n))
    V = np.column_stack([xs.ravel(), ys.ravel()])
    inner = (V[:, 0] > 0) & (V[:, 0] < 1) & (V[:, 1] > 0) & (V[:, 1] < 1)
    V[inner] += rng.uniform(-0.08, 0.08, (inner.sum(), 2))
    tris = []
    for j in range(n - 1):
        for i in range(n - 1):
            a, b, c, d = j * n + i, j * n + i + 1, (j + 1) * n + i + 1, (j + 1) * n + i
            tris += [[a, b, c], [a, c, d]]
    T0 = from_arrays(V, tris)
    meshes, _ = random_marking_sequence(5, depth=6, mesh=T0)
    for coarse, fine in zip(meshes[:-1], meshes[1:]):
        assert nvb_violations(coarse, fine) == []
