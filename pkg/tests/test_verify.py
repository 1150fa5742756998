import json

import numpy as np
import pytest

from afem_newton.driver import RunConfig
from afem_newton.fespace import build_space
from afem_newton.mesh import initial_mesh, uniform_refine
from afem_newton.problem import case1, poisson
from afem_newton.verify import (check_axiom_A1_A2, check_full_run, check_linearization_equivalence,
                                linear_reaction_problem, reference_solution)


@pytest.fixture(scope="module")
def space_p1():
    return build_space(uniform_refine(uniform_refine(initial_mesh("l_shape"))), 1)


def test_reference_solution_stagnates(space_p1):
    from afem_newton.linsolve import factor
    from afem_newton.newton import dual_norm
    from afem_newton.problem import energy_matrix, residual_vector
    u = reference_solution(case1(), space_p1)
    fac = factor(energy_matrix(case1(), space_p1))
    assert dual_norm(fac, residual_vector(case1(), space_p1, u)) < 1e-13


def test_linear_problem_band(space_p1):
    rep = check_linearization_equivalence(linear_reaction_problem(), space_p1, band=10.0)
    assert rep.passed
    # c' = 1 and the Friedrichs constant bound the ratio between 1 and 1 + C_F^2
    assert 1.0 <= rep.observed["min_ratio"] <= rep.observed["max_ratio"] <= 2.0


def test_pure_laplace_ratio_is_one(space_p1):
    rep = check_linearization_equivalence(poisson(), space_p1)
    assert rep.observed["min_ratio"] == pytest.approx(1.0, abs=1e-10)
    assert rep.observed["max_ratio"] == pytest.approx(1.0, abs=1e-10)


def test_case1_band(space_p1):
    rep = check_linearization_equivalence(case1(), space_p1)
    assert rep.passed and rep.observed["min_ratio"] > 0


def test_size_guard():
    T = initial_mesh("l_shape")
    for _ in range(5):
        T = uniform_refine(T)
    V = build_space(T, 2)
    with pytest.raises(ValueError):
        check_linearization_equivalence(case1(), V)


@pytest.mark.parametrize("prob, p", [(poisson(), 1), (poisson(), 2), (case1(), 1)], ids=["lap1", "lap2", "case1"])
def test_axioms(prob, p):
    rep = check_axiom_A1_A2(prob, p)
    assert rep.passed, rep
    assert rep.observed["reduction_ratio"] < 1


def test_reports_reproducible(space_p1):
    a = check_linearization_equivalence(case1(), space_p1, seed=4).to_dict()
    b = check_linearization_equivalence(case1(), space_p1, seed=4).to_dict()
    assert a == b
    assert json.dumps(a)  # plain JSON types only
    c = check_linearization_equivalence(case1(), space_p1, seed=5).to_dict()
    assert c["context"]["digest"] != a["context"]["digest"]


def test_full_run_bundle():
    cfg = RunConfig(problem="case1", p=1, max_triangles=1500, max_cost=None)
    reports = check_full_run(cfg)
    names = [r.name for r in reports]
    assert names == ["stopping_criterion", "delta_min_monotone", "cumulative_cost_recomputed",
                     "reduction_factors", "undamped_terminal_phase", "quasi_error_r_linear", "estimator_rate"]
    failed = [r for r in reports if not r.passed]
    assert not failed, failed
    assert len({r.context["digest"] for r in reports}) == 1
