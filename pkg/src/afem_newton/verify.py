"""Executable property checks over small instances.

Every check returns :class:`PropertyReport` objects whose ``context`` holds
the configuration and random seed together with a short digest, so a report
can be regenerated exactly.  All bounds are engineering tolerances: the
theory proves existence of constants but gives no numeric values.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .driver import RunConfig, final_iterates, nailfem_run, quasi_error_series, reduction_factors
from .estimator import local_estimators
from .fespace import FESpace, build_space, prolongate
from .linsolve import factor
from .mesh import initial_mesh, uniform_refine
from .newton import DampingError, dual_norm, initial_state, newton_step
from .problem import SemilinearProblem, case1, energy_matrix, poisson, residual_vector
from .rates import fit_rate

__all__ = [
    "PropertyReport",
    "reference_solution",
    "check_linearization_equivalence",
    "check_axiom_A1_A2",
    "check_full_run",
    "check_uniform_rate",
    "linear_reaction_problem",
    "run_verify",
]

# engineering bands for the estimator slope against cumulative cost
RATE_BANDS = {1: (-0.65, -0.35), 2: (-1.2, -0.8)}
UNIFORM_SLOPE_FLOOR = -0.45
UNIFORM_MARGIN = 0.2


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    return x


def _context(**items) -> dict:
    items = _jsonable(items)
    blob = json.dumps(items, sort_keys=True, default=str).encode()
    return {**items, "digest": hashlib.sha256(blob).hexdigest()[:16]}


@dataclass(frozen=True)
class PropertyReport:
    name: str
    passed: bool
    observed: object
    bound: object
    context: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


def _config_dict(config: RunConfig) -> dict:
    d = asdict(config)
    if isinstance(config.problem, SemilinearProblem):
        d["problem"] = config.problem.name
    return d


def linear_reaction_problem() -> SemilinearProblem:
    """-Laplace u + u = 1: linear, c' = 1."""
    return SemilinearProblem(reaction=lambda u: np.asarray(u, dtype=float),
                             reaction_derivative=lambda u: np.ones_like(np.asarray(u, dtype=float)),
                             reaction_antiderivative=lambda u: 0.5 * np.asarray(u, dtype=float) ** 2,
                             load=lambda x, y: np.ones(np.shape(x)), name="linear_reaction")


def reference_solution(prob: SemilinearProblem, space: FESpace, energy_fac=None, u0=None, max_iter: int = 100):
    """Newton to machine stagnation; the discrete ground truth ``u_H^*``.

    Iterates until the residual norm stops decreasing by more than 1e-14
    relative (or a damping search fails at that level).
    """
    if energy_fac is None:
        energy_fac = factor(energy_matrix(prob, space))
    state = initial_state(prob, space, energy_fac, np.zeros(space.n_free) if u0 is None else u0)
    start = state.residual_norm
    for _ in range(max_iter):
        if state.residual_norm == 0.0:
            return state.iterate
        try:
            new = newton_step(prob, space, energy_fac, state)
        except DampingError:
            if state.residual_norm <= 1e-10 * max(start, 1.0):
                return state.iterate
            raise
        if new.residual_norm >= (1.0 - 1e-14) * state.residual_norm:
            return new.iterate if new.residual_norm < state.residual_norm else state.iterate
        state = new
    raise RuntimeError(f"reference Newton did not stagnate within {max_iter} steps")


def check_linearization_equivalence(prob: SemilinearProblem, space: FESpace, trials: int = 50,
                                    seed: int = 0, band: float = 1e3) -> PropertyReport:
    """Residual dual norm versus energy error for random ``v`` near ``u_H^*``.

    Passes when every ratio ``||F - A v|| / ||u_H^* - v||`` is positive and
    finite and ``max / min <= band``.
    """
    if space.n_free > 500:
        raise ValueError("linearization check expects at most 500 free dofs")
    M = energy_matrix(prob, space)
    fac = factor(M)
    ustar = reference_solution(prob, space, fac)
    rng = np.random.default_rng(seed)
    scale = max(float(np.abs(ustar).max()) if ustar.size else 0.0, 1e-2)
    ratios = []
    for _ in range(trials):
        e = rng.standard_normal(space.n_free)
        e *= scale * 10.0 ** rng.uniform(-3, 0) / max(np.abs(e).max(), 1e-300)
        err = float(np.sqrt(e @ (M @ e)))
        if err == 0.0:
            continue
        ratios.append(dual_norm(fac, residual_vector(prob, space, ustar + e)) / err)
    ratios = np.array(ratios)
    lo, hi = float(ratios.min()), float(ratios.max())
    spread = hi / lo if lo > 0 else np.inf
    passed = bool(lo > 0 and np.isfinite(hi) and spread <= band)
    return PropertyReport(
        "linearization_equivalence", passed,
        {"min_ratio": lo, "max_ratio": hi, "spread": spread},
        {"spread_max": band},
        _context(problem=prob.name, p=space.order, n_free=space.n_free, trials=trials, seed=seed))


def _stability_constants(prob, space, M, rng, reps, eps_list):
    out = []
    for _ in range(reps):
        v = 0.01 * rng.standard_normal(space.n_free)
        w = rng.standard_normal(space.n_free)
        w /= np.sqrt(w @ (M @ w))
        eta_v = local_estimators(prob, space, v).total
        c = max(abs(local_estimators(prob, space, v + eps * w).total - eta_v) / eps for eps in eps_list)
        out.append(c)
    return np.array(out)


def check_axiom_A1_A2(prob: SemilinearProblem, p: int, seed: int = 0, mesh: str = "l_shape",
                      refinements: int = 2, reps: int = 5) -> PropertyReport:
    """Stability and reduction of the estimator.

    Stability: ``|eta(v) - eta(w)| / ||v - w||`` for random nearby pairs stays
    within a factor 10 of the constant fitted on the first pair.  Reduction:
    for fixed ``v`` and one uniform refinement (every element is new),
    ``eta_fine(v) <= eta_coarse(v)`` up to 1e-10.
    """
    rng = np.random.default_rng(seed)
    T = initial_mesh(mesh)
    for _ in range(refinements):
        T = uniform_refine(T)
    space = build_space(T, p)
    M = energy_matrix(prob, space)
    consts = _stability_constants(prob, space, M, rng, reps, (1e-3, 1e-4, 1e-5))
    fitted = consts[0]
    stab = float(consts.max() / fitted) if fitted > 0 else np.inf
    stable = bool(np.all(np.isfinite(consts)) and stab <= 10.0)

    v = 0.01 * rng.standard_normal(space.n_free)
    fine = build_space(uniform_refine(T), p)
    eta_c = local_estimators(prob, space, v).total
    eta_f = local_estimators(prob, fine, prolongate(space, fine, v)).total
    red = eta_f / eta_c if eta_c > 0 else 0.0
    reduces = bool(red <= 1.0 + 1e-10)
    return PropertyReport(
        "axiom_A1_A2", stable and reduces,
        {"stability_constants": consts, "stability_spread": stab, "reduction_ratio": red},
        {"stability_spread_max": 10.0, "reduction_ratio_max": 1.0 + 1e-10},
        _context(problem=prob.name, p=p, mesh=mesh, refinements=refinements, reps=reps, seed=seed))


def check_full_run(config: RunConfig, history=None) -> list[PropertyReport]:
    """Driver invariants, reduction factors, R-linearity and the estimator rate of one run."""
    h = nailfem_run(config) if history is None else history
    ctx = _context(config=_config_dict(config))
    recs = h.records
    reports = []

    def add(name, passed, observed, bound):
        reports.append(PropertyReport(name, bool(passed), observed, bound, ctx))

    finals = h.level_final_records()
    excess = max(r.residual_norm / (config.lambda_lin * r.estimator) if r.estimator > 0 else
                 (0.0 if r.residual_norm == 0 else np.inf) for r in finals)
    kmin_ok = all(r.k >= config.k_min for r in finals)
    add("stopping_criterion", excess <= 1 + 1e-12 and kmin_ok,
        {"max_residual_over_lambda_eta": excess, "min_k_final": min(r.k for r in finals)},
        {"max_residual_over_lambda_eta": 1 + 1e-12, "min_k_final": config.k_min})

    dm = np.array([r.delta_min for r in recs])
    add("delta_min_monotone", np.all(np.diff(dm) <= 0), {"final_delta_min": float(dm[-1])},
        {"nonincreasing": True})

    keep = h.in_index_set()
    ok = True
    for r in recs:
        expect = sum(q.n_triangles for q, kq in zip(recs, keep) if kq and q.total_step < r.total_step)
        ok &= r.cumulative_cost == expect + r.n_triangles
    add("cumulative_cost_recomputed", ok, {"final_cost": recs[-1].cumulative_cost}, {"exact": True})

    rf = np.array([r for *_, r in reduction_factors(h)])
    quarter = rf[-max(1, len(rf) // 4):] if rf.size else rf
    rmax = float(rf.max()) if rf.size else 0.0
    qmax = float(quarter.max()) if quarter.size else 0.0
    add("reduction_factors", rmax < 1.0 and qmax < 0.5,
        {"max_r": rmax, "max_r_final_quarter": qmax}, {"max_r": 1.0, "max_r_final_quarter": 0.5})

    deltas = [r.delta_used for r in recs if r.delta_used is not None][-10:]
    add("undamped_terminal_phase", len(deltas) == 10 and all(d == 1.0 for d in deltas),
        {"final_deltas": deltas}, {"delta": 1.0, "steps": 10})

    _, H = quasi_error_series(h)
    q = H[1:] / H[:-1]
    gmean = float(np.exp(np.mean(np.log(q))))
    add("quasi_error_r_linear", gmean < 1.0 and np.isfinite(q.max()),
        {"geometric_mean_ratio": gmean, "max_ratio": float(q.max())}, {"geometric_mean_ratio": 1.0})

    cost, eta = final_iterates(h)
    slope = fit_rate(cost, eta, decades=1).slope
    if config.uniform:
        add("estimator_rate", slope >= UNIFORM_SLOPE_FLOOR, {"slope": slope}, {"slope_min": UNIFORM_SLOPE_FLOOR})
    else:
        lo, hi = RATE_BANDS.get(config.p, (-0.65 * config.p, -0.35 * config.p))
        add("estimator_rate", lo <= slope <= hi, {"slope": slope}, {"slope_range": [lo, hi]})
    return reports


def check_uniform_rate(adaptive: RunConfig, uniform: Optional[RunConfig] = None,
                       adaptive_slope: Optional[float] = None) -> PropertyReport:
    """Uniform refinement is visibly suboptimal: its slope exceeds the adaptive one by 0.2."""
    if uniform is None:
        uniform = RunConfig(problem=adaptive.problem, p=adaptive.p, uniform=True, mesh=adaptive.mesh,
                            max_triangles=adaptive.max_triangles, max_cost=adaptive.max_cost,
                            lambda_lin=adaptive.lambda_lin, k_min=adaptive.k_min)
    if adaptive_slope is None:
        adaptive_slope = fit_rate(*final_iterates(nailfem_run(adaptive)), decades=1).slope
    uslope = fit_rate(*final_iterates(nailfem_run(uniform)), decades=1).slope
    passed = uslope >= UNIFORM_SLOPE_FLOOR and uslope > adaptive_slope + UNIFORM_MARGIN
    return PropertyReport(
        "uniform_vs_adaptive_rate", bool(passed),
        {"uniform_slope": uslope, "adaptive_slope": adaptive_slope},
        {"uniform_slope_min": UNIFORM_SLOPE_FLOOR, "margin": UNIFORM_MARGIN},
        _context(adaptive=_config_dict(adaptive), uniform=_config_dict(uniform)))


def run_verify(seed: int = 0) -> list[PropertyReport]:
    """The default suite: linearization, estimator axioms and benchmark runs."""
    reports = []
    T = uniform_refine(uniform_refine(initial_mesh("l_shape")))
    reports.append(check_linearization_equivalence(linear_reaction_problem(), build_space(T, 1),
                                                   seed=seed, band=10.0))
    reports.append(check_linearization_equivalence(case1(), build_space(T, 1), seed=seed))
    reports.append(check_linearization_equivalence(case1(), build_space(T, 2), seed=seed))
    for prob, p in ((poisson(), 1), (poisson(), 2), (case1(), 1)):
        reports.append(check_axiom_A1_A2(prob, p, seed=seed))
    for p, nmax in ((1, 5000), (2, 10000)):
        cfg = RunConfig(problem="case1", p=p, max_triangles=nmax, max_cost=None)
        h = nailfem_run(cfg)
        reports.extend(check_full_run(cfg, h))
        if p == 2:
            slope = fit_rate(*final_iterates(h), decades=1).slope
            reports.append(check_uniform_rate(cfg, adaptive_slope=slope))
    return reports

