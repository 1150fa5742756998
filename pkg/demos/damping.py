"""Watching the damping kick in.

With the default load the reaction is mild and every Newton step is taken in
full.  Raising the load to 20 pushes u into the steep part of the exponential,
so early steps overshoot and the step size is halved until the residual
drops enough.  The smallest step ever needed is remembered as delta_min
and carried over to finer meshes.
"""
from afem_newton import RunConfig, case1, nailfem_run, problem_from_config

prob = case1()
strong = problem_from_config({"load": "20"})  # same reaction, f = 20

for label, problem in (("load 2", prob), ("load 20", strong)):
    h = nailfem_run(RunConfig(problem=problem, p=1, max_triangles=1500))
    print(f"\n--- {label} ---")
    print(f"{'level':>5} {'k':>3} {'delta':>8} {'delta_min':>9} {'residual':>10}")
    for r in h.records:
        if r.k > 0 and r.ell < 3:
            print(f"{r.ell:5d} {r.k:3d} {r.delta_used:8.4f} {r.delta_min:9.4f} {r.residual_norm:10.3e}")
    print("final delta_min:", h.records[-1].delta_min)
