"""Adaptive loop coupling damped Newton, estimation, marking and refinement.

Per level: run Newton from the prolongated previous iterate until at least
``k_min`` steps are done and the residual is below ``lambda_lin`` times the
estimator; then mark (Doerfler), refine (NVB), and continue.  The damping
memory ``delta_min`` persists across levels.

Bookkeeping of the step counter and cost:  every computed iterate u_l^k
becomes a :class:`StepRecord`.  The last iterate of a level and the first
iterate of the next level are the same function, so they share one value of
``total_step``.  ``cumulative_cost`` adds ``n_triangles`` of every earlier
step slot (counting each shared slot once, with the finer mesh) plus the
record's own mesh size.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .estimator import local_estimators
from .fespace import FESpace, build_space, prolongate
from .linsolve import factor
from .marking import MarkParams, doerfler_mark
from .mesh import Triangulation, initial_mesh, refine
from .newton import DampingError, NewtonNotConverged, run_newton, stopping_rule
from .problem import SemilinearProblem, energy, energy_matrix, get_problem

__all__ = [
    "RunConfig",
    "StepRecord",
    "LevelSnapshot",
    "RunHistory",
    "RunError",
    "nailfem_run",
    "reduction_factors",
    "quasi_error_series",
    "final_iterates",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    problem: str | SemilinearProblem = "case1"
    p: int = 1
    theta: float = 0.3
    lambda_lin: float = 0.1
    k_min: int = 1
    max_triangles: Optional[int] = None
    max_cost: Optional[float] = 5e6
    tol: Optional[float] = None
    max_levels: Optional[int] = None
    uniform: bool = False
    mesh: str = "l_shape"
    max_newton: int = 200

    def __post_init__(self):
        if self.lambda_lin <= 0:
            raise ValueError("lambda_lin must be positive")
        if self.k_min < 1:
            raise ValueError("k_min must be at least 1")
        if not 0 < self.theta <= 1:
            raise ValueError("theta must lie in (0, 1]")
        if all(b is None for b in (self.max_triangles, self.max_cost, self.tol, self.max_levels)):
            raise ValueError("at least one termination bound (max_triangles, max_cost, tol, max_levels) is required")

    def get_problem(self) -> SemilinearProblem:
        return get_problem(self.problem) if isinstance(self.problem, str) else self.problem


@dataclass(frozen=True)
class StepRecord:
    ell: int
    k: int
    total_step: int
    n_triangles: int
    n_free_dofs: int
    residual_norm: float
    estimator: float
    quasi_error: float
    delta_used: Optional[float]
    delta_min: float
    cumulative_cost: int
    energy: Optional[float] = None
    trial_count: int = 0

    @property
    def estimator_total(self) -> float:
        return self.estimator


@dataclass(frozen=True, eq=False)
class LevelSnapshot:
    mesh: Triangulation
    iterate: np.ndarray  # final iterate u_l^{k_final}, free dofs of build_space(mesh, p)
    n_marked: int = 0


@dataclass(eq=False)
class RunHistory:
    records: list = field(default_factory=list)
    levels: list = field(default_factory=list)
    p: int = 1
    jacobian_symmetric: bool = True
    runtime: float = 0.0

    @property
    def final_mesh(self) -> Optional[Triangulation]:
        return self.levels[-1].mesh if self.levels else None

    def level_final_records(self) -> list[StepRecord]:
        last = {}
        for r in self.records:
            last[r.ell] = r
        return [last[ell] for ell in sorted(last)]

    def space(self, ell: int) -> FESpace:
        return build_space(self.levels[ell].mesh, self.p)

    def in_index_set(self) -> np.ndarray:
        """True for records whose iterate is not duplicated by the next level's first."""
        steps = np.array([r.total_step for r in self.records])
        keep = np.ones(len(steps), dtype=bool)
        keep[:-1] = steps[1:] != steps[:-1]
        return keep


class RunError(RuntimeError):
    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


def nailfem_run(config: RunConfig) -> RunHistory:
    """Run the adaptive Newton FEM loop until a termination bound triggers."""
    t0 = time.perf_counter()
    prob = config.get_problem()
    mesh = initial_mesh(config.mesh)
    stop = stopping_rule(config.k_min, config.lambda_lin)
    params = MarkParams(1.0 if config.uniform else config.theta)
    hist = RunHistory(p=config.p, jacobian_symmetric=prob.symmetric)

    delta_min = 0.5
    prev_space = None
    u = None
    step_base = 0
    cost_base = 0  # cost of all completed step slots before this level's k = 0
    for ell in range(10 ** 9):
        space = build_space(mesh, config.p)
        u0 = np.zeros(space.n_free) if prev_space is None else prolongate(prev_space, space, u)
        efac = factor(energy_matrix(prob, space))

        def estimate(v, space=space):
            return local_estimators(prob, space, v)

        try:
            states = run_newton(prob, space, efac, u0, stop, delta_min, estimate, config.max_newton)
        except (NewtonNotConverged, DampingError) as err:
            hist.runtime = time.perf_counter() - t0
            raise RunError(f"level {ell}: {err}", hist) from err

        nt = mesh.n_triangles
        cost = cost_base
        for st in states:
            cost += nt
            eta = st.estimator.total
            hist.records.append(StepRecord(
                ell=ell,
                k=st.k,
                total_step=step_base + st.k,
                n_triangles=nt,
                n_free_dofs=space.n_free,
                residual_norm=st.residual_norm,
                estimator=eta,
                quasi_error=st.residual_norm + eta,
                delta_used=st.last_delta if st.k > 0 else None,
                delta_min=st.delta_min,
                cumulative_cost=cost,
                energy=energy(prob, space, st.iterate) if prob.symmetric and prob.reaction_antiderivative else None,
                trial_count=st.trial_count,
            ))
        final = states[-1]
        k_final = final.k
        delta_min = final.delta_min
        u = final.iterate
        # the final slot is shared with the next level's k = 0, counted there
        cost_base = cost - nt
        step_base += k_final

        last = hist.records[-1]
        done = (
            (config.max_triangles is not None and nt >= config.max_triangles)
            or (config.max_cost is not None and last.cumulative_cost >= config.max_cost)
            or (config.tol is not None and last.estimator <= config.tol)
            or (config.max_levels is not None and ell + 1 >= config.max_levels)
        )
        marked = np.empty(0, dtype=np.int64) if done else doerfler_mark(final.estimator, params)
        hist.levels.append(LevelSnapshot(mesh, u, len(marked)))
        log.info("level %d: %d triangles, %d dofs, %d Newton steps, eta=%.3e, res=%.3e, delta_min=%g",
                 ell, nt, space.n_free, k_final, last.estimator, last.residual_norm, delta_min)
        if done:
            break
        if marked.size == 0:
            break  # estimator vanished: nothing left to refine
        prev_space = space
        mesh = refine(mesh, marked)
    hist.runtime = time.perf_counter() - t0
    return hist


def reduction_factors(h: RunHistory) -> list[tuple[int, int, float]]:
    """``(ell, k, r)`` with r the ratio of consecutive same-level residual norms, k >= 1."""
    out = []
    recs = h.records
    for prev, cur in zip(recs[:-1], recs[1:]):
        if cur.ell == prev.ell and cur.k == prev.k + 1:
            r = 0.0 if prev.residual_norm == 0 else cur.residual_norm / prev.residual_norm
            out.append((cur.ell, cur.k, r))
    return out


def quasi_error_series(h: RunHistory) -> tuple[np.ndarray, np.ndarray]:
    """``(cumulative_cost, quasi_error)`` over the index set, in step order."""
    keep = h.in_index_set()
    recs = [r for r, k in zip(h.records, keep) if k]
    return (np.array([r.cumulative_cost for r in recs], dtype=float),
            np.array([r.quasi_error for r in recs]))


def final_iterates(h: RunHistory) -> tuple[np.ndarray, np.ndarray]:
    """``(cumulative_cost, estimator)`` of each level's final iterate."""
    recs = h.level_final_records()
    return (np.array([r.cumulative_cost for r in recs], dtype=float),
            np.array([r.estimator for r in recs]))
