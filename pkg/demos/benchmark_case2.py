"""Convection-reaction problem on the L-shape.

A constant drift b = (-50, 0) makes the Jacobian nonsymmetric, so every
linear solve goes through the LU path.  The solution develops a boundary
layer along the outflow edge x = -1, which the estimator resolves with
small elements there.
"""
from afem_newton import RunConfig, final_iterates, fit_rate, nailfem_run

h = nailfem_run(RunConfig(problem="case2", p=2, max_triangles=5000))
print("jacobian symmetric:", h.jacobian_symmetric)
print(f"{len(h.levels)} levels, {h.final_mesh.n_triangles} triangles, {h.runtime:.1f} s")

cost, eta = final_iterates(h)
print(f"estimator slope: {fit_rate(cost, eta, decades=1).slope:.3f}")

T = h.final_mesh
cx = T.vertices[T.triangles].mean(axis=1)[:, 0]
strip = T.areas[cx < -0.8].mean()
print(f"mean area in the strip x < -0.8: {strip:.2e}")
print(f"mean area overall:               {T.areas.mean():.2e}")
