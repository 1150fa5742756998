"""Adaptive finite elements with adaptively damped Newton linearisation.

Solves strongly monotone semilinear elliptic problems

    -div(A grad u) + b . grad u + c(u) = f - div(fvec),   u = 0 on the boundary,

on polygonal domains with conforming Lagrange elements of degree 1 to 4,
newest-vertex bisection, a residual error estimator and Doerfler marking.
"""
from .driver import (RunConfig, RunError, RunHistory, StepRecord, final_iterates, nailfem_run,
                     quasi_error_series, reduction_factors)
from .estimator import LocalEstimators, local_estimators, restricted_total
from .fespace import FESpace, build_space, evaluate, prolongate, prolongation_matrix
from .linsolve import Factorization, SingularMatrixError, SparseMatrix, factor, solve
from .marking import MarkParams, doerfler_mark
from .mesh import (MeshError, Triangulation, element_geometry, from_arrays, initial_mesh, read_mesh, refine,
                   uniform_refine, write_mesh)
from .newton import DampingError, NewtonNotConverged, NewtonState, dual_norm, newton_step, run_newton, stopping_rule
from .problem import (SemilinearProblem, case1, case2, energy, energy_matrix, get_problem, jacobian_matrix,
                      poisson, problem_from_config, residual_vector, truncated_exp)
from .rates import RateFit, fit_rate

__version__ = "0.1.0"
