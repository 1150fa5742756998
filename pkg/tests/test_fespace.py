import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from afem_newton.fespace import LagrangeBasis, build_space, evaluate, prolongate, prolongation_matrix
from afem_newton.mesh import initial_mesh, refine, uniform_refine
from afem_newton.problem import energy_matrix, poisson
from afem_newton.quadrature import triangle_rule

from _support import random_marking_sequence


def test_square_p1_has_no_free_dofs(square):
    assert build_space(square, 1).n_free == 0


def test_square_p2_single_free_dof(square):
    V = build_space(square, 2)
    assert V.n_dofs == 9
    assert V.n_free == 1
    assert np.allclose(V.dof_coords[V.free_dofs[0]], [0.5, 0.5])


def test_criss_cross_p1(criss_cross):
    V = build_space(criss_cross, 1)
    assert V.n_free == 1
    assert np.allclose(V.dof_coords[V.free_dofs[0]], [0.5, 0.5])


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_dimension_formula(lshape, p):
    T = uniform_refine(lshape)
    V = build_space(T, p)
    ne = len(T.edges)
    assert V.n_dofs == T.n_vertices + (p - 1) * ne + (p - 1) * (p - 2) // 2 * T.n_triangles
    nb_edges = len(T.boundary_edges)
    assert V.n_dofs - V.n_free == nb_edges * p  # boundary is a closed polygon
    # coordinates of free dofs lie strictly inside the L-shape
    x = V.dof_coords[V.free_dofs]
    on_bdry = (np.abs(x) == 1).any(axis=1) | ((x[:, 0] >= 0) & (x[:, 1] == 0)) | ((x[:, 1] >= 0) & (x[:, 0] == 0))
    assert not np.any(on_bdry)


@pytest.mark.parametrize("p", [0, 5])
def test_unsupported_degree(square, p):
    with pytest.raises(ValueError):
        build_space(square, p)


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_lagrange_property_and_partition_of_unity(p):
    B = LagrangeBasis(p)
    assert np.allclose(B.values(B.nodes), np.eye(len(B)), atol=1e-12)
    rule = triangle_rule(2 * p + 2)
    assert np.allclose(B.values(rule.points).sum(axis=0), 1.0, atol=1e-12)
    # tangential derivatives of the constant 1 vanish
    d = B.derivatives(rule.points).sum(axis=0)
    assert np.allclose(d[:, 1:] - d[:, :1], 0.0, atol=1e-11)


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_derivatives_by_finite_differences(p):
    B = LagrangeBasis(p)
    lam = np.array([[0.2, 0.3, 0.5]])
    eps = 1e-6
    d = B.derivatives(lam)[:, 0, :]
    H = B.hessians(lam)[:, 0]
    for a in range(3):
        e = np.zeros(3)
        e[a] = eps
        fd = (B.values(lam + e) - B.values(lam - e))[:, 0] / (2 * eps)
        assert np.allclose(fd, d[:, a], atol=1e-7)
        fd2 = (B.derivatives(lam + e) - B.derivatives(lam - e))[:, 0, :] / (2 * eps)
        assert np.allclose(fd2, H[:, a, :], atol=1e-5)


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_element_maps_agree_on_shared_edges(lshape, p):
    V = build_space(uniform_refine(lshape), p)
    coords = V.dof_coords[V.element_dofs]
    # every occurrence of a global dof maps to the same physical node
    T = V.mesh
    X = T.vertices[T.triangles]
    expect = np.einsum("ba,tad->tbd", V.basis.nodes, X)
    assert np.allclose(coords, expect, atol=1e-14)


def test_evaluate_zero(lshape):
    V = build_space(lshape, 2)
    vals, grads = evaluate(V, np.zeros(V.n_free), 0, triangle_rule(4))
    assert not vals.any() and not grads.any()


def test_evaluate_hat(criss_cross):
    V = build_space(criss_cross, 1)
    B = V.basis
    for t in range(4):
        vals, _ = evaluate(V, np.ones(1), t, type(triangle_rule(0))(B.nodes, np.ones(3) / 3, 0))
        assert np.allclose(vals, (criss_cross.triangles[t] == 4).astype(float))


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_linear_reproduction(square, p):
    V = build_space(uniform_refine(uniform_refine(square)), p)
    v = V.interpolate(lambda x, y: x, boundary=True)
    rule = triangle_rule(2 * p)
    for t in range(V.mesh.n_triangles):
        vals, grads = evaluate(V, v, t, rule)
        assert np.allclose(grads, [1.0, 0.0], atol=1e-12)


def test_prolongate_same_mesh(lshape):
    V = build_space(lshape, 2)
    v = np.random.default_rng(0).standard_normal(V.n_free)
    assert np.array_equal(prolongate(V, build_space(lshape, 2), v), v)


def test_prolongate_hat(criss_cross):
    V = build_space(criss_cross, 1)
    fine_mesh = refine(criss_cross, [0])
    W = build_space(fine_mesh, 1)
    w = W.extend(prolongate(V, W, [1.0]))
    for i, x in enumerate(W.dof_coords):
        if np.allclose(x, [0.5, 0.5]):
            assert w[i] == pytest.approx(1.0)
        elif i >= criss_cross.n_vertices:
            # midpoints of coarse edges: 1/2 if the edge emanates from the centre
            on_spoke = np.isclose(x[0], x[1]) or np.isclose(x[0], 1 - x[1])
            assert w[i] == pytest.approx(0.5 if on_spoke else 0.0)
        else:
            assert w[i] == 0.0


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_prolongation_preserves_function(p):
    meshes, _ = random_marking_sequence(1, depth=2)
    coarse, fine = build_space(meshes[0], p), build_space(meshes[2], p)
    v = np.random.default_rng(p).standard_normal(coarse.n_free)
    w = prolongate(coarse, fine, v)
    rule = triangle_rule(2 * p)
    anc = meshes[2].parent
    anc = meshes[1].parent[anc]
    T = meshes[0]
    for t in range(meshes[2].n_triangles):
        fv, fg = evaluate(fine, w, t, rule)
        # map the fine points into the ancestor's barycentric coordinates
        X = meshes[2].vertices[meshes[2].triangles[t]]
        pts = rule.points @ X
        A = T.vertices[T.triangles[anc[t]]]
        J = np.column_stack([A[1] - A[0], A[2] - A[0]])
        l12 = np.linalg.solve(J, (pts - A[0]).T).T
        bary = np.column_stack([1 - l12.sum(axis=1), l12])
        cv = coarse.local_coefficients(v)[anc[t]] @ coarse.basis.values(bary)
        assert np.allclose(fv, cv, rtol=1e-12, atol=1e-12 * np.abs(v).max())


@pytest.mark.parametrize("p", [1, 2, 3])
def test_galerkin_nesting_and_energy_norm(p):
    meshes, _ = random_marking_sequence(2, depth=2)
    coarse, fine = build_space(meshes[0], p), build_space(meshes[2], p)
    P = prolongation_matrix(coarse, fine)
    prob = poisson()
    Mc = energy_matrix(prob, coarse).csr.toarray()
    Mf = energy_matrix(prob, fine).csr
    assert np.allclose((P.T @ Mf @ P).toarray(), Mc, atol=1e-10 * np.abs(Mc).max())
    v = np.random.default_rng(0).standard_normal(coarse.n_free)
    w = P @ v
    assert np.sqrt(w @ (Mf @ w)) == pytest.approx(np.sqrt(v @ Mc @ v), rel=1e-10)
    # injective: full column rank
    assert np.linalg.matrix_rank(P.toarray()) == coarse.n_free


@settings(max_examples=20, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_prolongation_is_linear(a, b):
    meshes, _ = random_marking_sequence(4, depth=1)
    coarse, fine = build_space(meshes[0], 2), build_space(meshes[1], 2)
    rng = np.random.default_rng(5)
    u, v = rng.standard_normal((2, coarse.n_free))
    lhs = prolongate(coarse, fine, a * u + b * v)
    rhs = a * prolongate(coarse, fine, u) + b * prolongate(coarse, fine, v)
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_unrelated_meshes_rejected(lshape, square):
    with pytest.raises(ValueError, match="nested"):
        prolongate(build_space(lshape, 1), build_space(uniform_refine(square), 1), np.zeros(5))
