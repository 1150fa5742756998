"""Adaptively damped Newton iteration on a fixed discrete space.

Residuals are measured in the discrete dual norm ``||F - A v||_{X_H'}``, the
energy norm of the Riesz representative.  The energy matrix is factored once
per space and reused for every damping trial.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .fespace import FESpace
from .linsolve import Factorization, factor, solve
from .problem import SemilinearProblem, jacobian_matrix, residual_vector

__all__ = [
    "NewtonState",
    "DampingError",
    "NewtonNotConverged",
    "dual_norm",
    "initial_state",
    "newton_step",
    "run_newton",
    "stopping_rule",
]

log = logging.getLogger(__name__)

DELTA_FLOOR = 2.0 ** -30
MAX_ITER = 200


class DampingError(RuntimeError):
    """Damping parameter fell below the floor without meeting the criterion."""

    history: list = []


class NewtonNotConverged(RuntimeError):
    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


@dataclass(frozen=True)
class NewtonState:
    iterate: np.ndarray
    residual: np.ndarray
    residual_norm: float
    delta_min: float = 0.5
    k: int = 0
    last_delta: float = 1.0
    trial_count: int = 0
    estimator: Optional[object] = None  # LocalEstimators of the iterate, when requested


def dual_norm(energy_fac: Factorization, b) -> float:
    """``sqrt(b . M^{-1} b)`` with M the factored energy matrix."""
    b = np.asarray(b, dtype=float)
    if b.size == 0:
        return 0.0
    r = solve(energy_fac, b)
    return float(np.sqrt(max(float(b @ r), 0.0)))


def initial_state(prob: SemilinearProblem, space: FESpace, energy_fac: Factorization, u0,
                  delta_min: float = 0.5) -> NewtonState:
    u0 = np.array(u0, dtype=float)
    res = residual_vector(prob, space, u0)
    return NewtonState(u0, res, dual_norm(energy_fac, res), delta_min=delta_min)


def newton_step(prob: SemilinearProblem, space: FESpace, energy_fac: Factorization,
                state: NewtonState) -> NewtonState:
    """One Newton update with adaptive damping.

    The trial step size starts at 1 and is halved until the damped iterate
    reduces the residual by the factor ``1 - delta_min**1.5 / 2``; every
    halving also lowers ``delta_min`` to the current step size.
    """
    u = state.iterate
    if state.residual_norm == 0.0:
        return replace(state, k=state.k + 1, last_delta=1.0, trial_count=0, estimator=None)
    J = jacobian_matrix(prob, space, u)
    rho = solve(factor(J), state.residual)

    delta = 1.0
    delta_min = state.delta_min
    trials = 0
    while True:
        trial = u + delta * rho
        res = residual_vector(prob, space, trial)
        norm = dual_norm(energy_fac, res)
        if norm <= (1.0 - delta_min ** 1.5 / 2.0) * state.residual_norm:
            break
        delta /= 2.0
        delta_min = min(delta, delta_min)
        trials += 1
        if delta < DELTA_FLOOR:
            raise DampingError(
                f"damping parameter fell below 2^-30 at Newton step {state.k}: residual "
                f"{state.residual_norm:.3e} cannot be reduced (inconsistent assembly or violated assumptions)")
    log.debug("newton k=%d delta=%g residual %.3e -> %.3e", state.k, delta, state.residual_norm, norm)
    return NewtonState(trial, res, norm, delta_min, state.k + 1, delta, trials)


def stopping_rule(k_min: int = 1, lambda_lin: float = 0.1) -> Callable:
    """``k >= k_min`` and residual <= lambda_lin * estimator, for :func:`run_newton`."""
    if k_min < 1 or lambda_lin <= 0:
        raise ValueError("need k_min >= 1 and lambda_lin > 0")

    def stop(k, residual_norm, eta):
        return k >= k_min and residual_norm <= lambda_lin * eta()
    return stop


def run_newton(prob: SemilinearProblem, space: FESpace, energy_fac: Factorization, u0,
               stop: Callable, delta_min: float = 0.5, estimate: Optional[Callable] = None,
               max_iter: int = MAX_ITER) -> list[NewtonState]:
    """Iterate :func:`newton_step` from ``u0`` until ``stop`` holds.

    ``stop(k, residual_norm, eta)`` is called after each accepted step; ``eta``
    is a zero-argument callable returning the estimator total of the new
    iterate.  With ``estimate`` (a function of the coefficient vector
    returning local estimators) every accepted iterate, and the initial one,
    carries its estimator.

    Returns the states for k = 0, 1, ..., k_final.
    """
    if not 0.0 < delta_min <= 0.5:
        raise ValueError("delta_min must lie in (0, 1/2]")
    state = initial_state(prob, space, energy_fac, u0, delta_min)
    if estimate is not None:
        state = replace(state, estimator=estimate(state.iterate))
    history = [state]
    while True:
        if state.k >= max_iter:
            raise NewtonNotConverged(f"no termination after {max_iter} Newton steps", history)
        try:
            state = newton_step(prob, space, energy_fac, state)
        except DampingError as err:
            err.history = history
            raise
        if estimate is not None:
            state = replace(state, estimator=estimate(state.iterate))

        def eta(state=state):
            if state.estimator is None:
                raise ValueError("stopping rule needs an estimator; pass estimate=")
            return state.estimator.total

        history.append(state)
        if stop(state.k, state.residual_norm, eta):
            return history
