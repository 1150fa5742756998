"""Semilinear model problem and its Galerkin discretisation.

The weak form reads: find u in H^1_0 with

    <A grad u, grad v> + <b . grad u + c(u), v> = <f, v> + <fvec, grad v>

for all v.  ``residual_vector`` returns the load minus the operator tested
with every free basis function; ``jacobian_matrix`` is its negative
derivative, i.e. the matrix of dA[v].
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .fespace import FESpace
from .linsolve import SparseMatrix

__all__ = [
    "SemilinearProblem",
    "truncated_exp",
    "exp_reaction",
    "case1",
    "case2",
    "poisson",
    "get_problem",
    "problem_from_config",
    "residual_vector",
    "jacobian_matrix",
    "energy_matrix",
    "energy",
]


def truncated_exp(N: int, x):
    """Partial sum ``sum_{n=0}^N x^n / n!`` by Horner's rule."""
    if N < 0:
        raise ValueError("truncation order must be nonnegative")
    x = np.asarray(x, dtype=float)
    s = np.ones_like(x)
    for n in range(N, 0, -1):
        s = 1.0 + x * s / n
    return s if s.ndim else float(s)


@dataclass(frozen=True)
class ExpReaction:
    """Reaction ``c(u) = exp_N(scale * u)`` with closed-form derivative and antiderivative."""

    order: int = 11
    scale: float = 40.0

    def __call__(self, u):
        return truncated_exp(self.order, self.scale * u)

    def derivative(self, u):
        if self.order == 0:
            return np.zeros_like(np.asarray(u, dtype=float))
        return self.scale * truncated_exp(self.order - 1, self.scale * u)

    def antiderivative(self, u):
        # int_0^u exp_N(a s) ds = (exp_{N+1}(a u) - 1) / a
        return (truncated_exp(self.order + 1, self.scale * u) - 1.0) / self.scale


def exp_reaction(order: int = 11, scale: float = 40.0) -> ExpReaction:
    return ExpReaction(order, scale)


def _zero(u):
    return np.zeros_like(np.asarray(u, dtype=float))


def _constant(value):
    def f(x, y):
        return np.full(np.shape(x), float(value))
    return f


@dataclass(frozen=True, eq=False)
class SemilinearProblem:
    """Coefficients of the semilinear problem.

    ``diffusion`` is one symmetric 2x2 matrix or one per initial triangle.
    ``reaction``/``reaction_derivative`` act elementwise on arrays; the
    optional ``reaction_antiderivative`` enables :func:`energy`.
    ``flux`` maps ``(x, y)`` to an array of shape ``x.shape + (2,)``; when it
    is given, ``flux_divergence`` must be given as well (the estimator needs
    it).
    """

    diffusion: np.ndarray = field(default_factory=lambda: np.eye(2))
    convection: np.ndarray = field(default_factory=lambda: np.zeros(2))
    reaction: Callable = _zero
    reaction_derivative: Callable = _zero
    load: Callable = field(default_factory=lambda: _constant(0.0))
    flux: Optional[Callable] = None
    flux_divergence: Optional[Callable] = None
    reaction_antiderivative: Optional[Callable] = _zero
    truncation: Optional[int] = None
    growth_bound: Optional[float] = None
    name: str = "custom"
    monotonicity_samples: np.ndarray = field(default_factory=lambda: np.linspace(-1.0, 1.0, 201), repr=False)

    def __post_init__(self):
        A = np.array(self.diffusion, dtype=float)
        if A.shape == (2, 2):
            A = A[None]
        if A.ndim != 3 or A.shape[1:] != (2, 2):
            raise ValueError("diffusion must be a 2x2 matrix or an array of 2x2 matrices")
        if not np.allclose(A, np.swapaxes(A, 1, 2), rtol=0, atol=1e-14 * max(1.0, np.abs(A).max())):
            raise ValueError("diffusion matrix must be symmetric")
        eig = np.linalg.eigvalsh(A)
        if eig.min() <= 0:
            raise ValueError(f"diffusion must be uniformly positive definite (smallest eigenvalue {eig.min():g})")
        object.__setattr__(self, "diffusion", A)
        object.__setattr__(self, "alpha_min", float(eig.min()))
        object.__setattr__(self, "alpha_max", float(eig.max()))

        b = np.array(self.convection, dtype=float).reshape(-1)
        if b.shape != (2,):
            raise ValueError("convection must be a constant 2-vector")
        object.__setattr__(self, "convection", b)

        if (self.flux is None) != (self.flux_divergence is None):
            raise ValueError("flux and flux_divergence must be given together")
        dc = np.asarray(self.reaction_derivative(self.monotonicity_samples))
        if np.any(dc < 0):
            bad = self.monotonicity_samples[np.argmax(dc < 0)]
            raise ValueError(f"reaction is not monotone: c'({bad:g}) < 0")

    @property
    def symmetric(self) -> bool:
        return not np.any(self.convection)

    def element_diffusion(self, space: FESpace) -> np.ndarray:
        """(nt, 2, 2) diffusion per triangle."""
        A = self.diffusion
        if len(A) == 1:
            return np.broadcast_to(A[0], (space.mesh.n_triangles, 2, 2))
        if len(A) <= space.mesh.root.max():
            raise ValueError("piecewise diffusion has fewer entries than initial triangles")
        return A[space.mesh.root]


def case1(order: int = 11, scale: float = 40.0) -> SemilinearProblem:
    """f = 2, A = I, b = 0, c(u) = exp_N(40 u)."""
    c = exp_reaction(order, scale)
    return SemilinearProblem(
        reaction=c,
        reaction_derivative=c.derivative,
        reaction_antiderivative=c.antiderivative,
        load=_constant(2.0),
        truncation=order,
        name="case1",
    )


def case2(order: int = 11, scale: float = 40.0) -> SemilinearProblem:
    """Case 1 data with strong constant convection b = (-50, 0)."""
    c = exp_reaction(order, scale)
    return SemilinearProblem(
        convection=np.array([-50.0, 0.0]),
        reaction=c,
        reaction_derivative=c.derivative,
        reaction_antiderivative=c.antiderivative,
        load=_constant(2.0),
        truncation=order,
        name="case2",
    )


def poisson(load: float | Callable = 1.0) -> SemilinearProblem:
    """Linear Poisson problem -Laplace u = f (c = 0, b = 0)."""
    f = load if callable(load) else _constant(load)
    return SemilinearProblem(load=f, name="poisson")


def get_problem(tag: str) -> SemilinearProblem:
    builders = {"case1": case1, "case2": case2, "poisson": poisson}
    if tag not in builders:
        raise ValueError(f"unknown problem {tag!r}; expected one of {sorted(builders)}")
    return builders[tag]()


def _polynomial_load(coefficients):
    """``f(x, y) = sum c_ij x^i y^j`` from a ``{(i, j): c}`` mapping."""
    items = [(int(i), int(j), float(c)) for (i, j), c in coefficients.items()]

    def f(x, y):
        out = np.zeros(np.shape(x))
        for i, j, c in items:
            out = out + c * np.asarray(x) ** i * np.asarray(y) ** j
        return out
    return f


def problem_from_config(cfg: dict) -> SemilinearProblem:
    """Custom problem from flat config keys.

    Recognised keys: ``a11 a12 a22`` (constant diffusion), ``b1 b2``,
    ``load`` (a constant or ``"c00:2,c10:1"`` monomial coefficients),
    ``truncation`` (N, or -1 for c = 0), ``scale``.
    """
    A = np.array([[float(cfg.get("a11", 1.0)), float(cfg.get("a12", 0.0))],
                  [float(cfg.get("a12", 0.0)), float(cfg.get("a22", 1.0))]])
    b = np.array([float(cfg.get("b1", 0.0)), float(cfg.get("b2", 0.0))])
    load = cfg.get("load", 2.0)
    try:
        f = _constant(float(load))
    except (TypeError, ValueError):
        coeffs = {}
        for term in str(load).split(","):
            key, _, val = term.strip().partition(":")
            if len(key) != 3 or key[0] != "c" or not key[1:].isdigit():
                raise ValueError(f"config key 'load': cannot parse term {term!r}") from None
            coeffs[(int(key[1]), int(key[2]))] = float(val)
        f = _polynomial_load(coeffs)
    order = int(cfg.get("truncation", 11))
    scale = float(cfg.get("scale", 40.0))
    if order < 0:
        return SemilinearProblem(diffusion=A, convection=b, load=f, name="custom")
    c = exp_reaction(order, scale)
    return SemilinearProblem(diffusion=A, convection=b, reaction=c, reaction_derivative=c.derivative,
                             reaction_antiderivative=c.antiderivative, load=f, truncation=order,
                             name="custom")


def _fields(prob, space, v, degree):
    q = space.quadrature(degree)
    U = space.local_coefficients(v)
    u = U @ q.values
    return q, u, _gradient(U, q)


def _gradient(U, q):
    """(nt, nq, 2) gradient at quadrature points from (nt, nb) coefficients."""
    nt, nb, nq, _ = q.gradients.shape
    return (U[:, None, :] @ q.gradients.reshape(nt, nb, 2 * nq)).reshape(nt, nq, 2)


def _apply_diffusion(prob, space, vec):
    """A vec for (nt, ..., 2) vectors, skipping the identity."""
    if prob.diffusion.shape[0] == 1 and np.array_equal(prob.diffusion[0], np.eye(2)):
        return vec
    A = prob.element_diffusion(space)
    shape = vec.shape
    return (vec.reshape(shape[0], -1, 2) @ A).reshape(shape)  # A symmetric


def residual_vector(prob: SemilinearProblem, space: FESpace, v, degree: int | None = None) -> np.ndarray:
    """Entries ``<F - A v, phi_i>`` for every free basis function."""
    q, u, grad = _fields(prob, space, v, degree)
    x, y = q.points[..., 0], q.points[..., 1]
    source = prob.load(x, y) - grad @ prob.convection - prob.reaction(u)
    vec = -_apply_diffusion(prob, space, grad)
    if prob.flux is not None:
        vec = vec + prob.flux(x, y)
    nt, nb, nq, _ = q.gradients.shape
    local = (q.weights * source) @ q.values.T
    local += (q.gradients.reshape(nt, nb, 2 * nq) @ (q.weights[..., None] * vec).reshape(nt, 2 * nq, 1))[..., 0]
    return space.assemble_vector(local)


def _stiffness_local(prob, space, q):
    nt, nb, nq, _ = q.gradients.shape
    G = q.gradients
    AG = _apply_diffusion(prob, space, G)
    Gw = (G * q.weights[:, None, :, None]).reshape(nt, nb, 2 * nq)
    return Gw @ AG.reshape(nt, nb, 2 * nq).transpose(0, 2, 1)


def jacobian_matrix(prob: SemilinearProblem, space: FESpace, v, degree: int | None = None) -> SparseMatrix:
    """Matrix of dA[v]: ``int A grad phi_j . grad phi_i + (b . grad phi_j) phi_i + c'(v) phi_j phi_i``."""
    q, u, _ = _fields(prob, space, v, degree)
    local = _stiffness_local(prob, space, q)
    dc = q.weights * prob.reaction_derivative(u)
    local += (q.values[None, :, :] * dc[:, None, :]) @ q.values.T
    if not prob.symmetric:
        bgrad = q.gradients @ prob.convection  # (nt, nb, nq)
        local += (q.values[None, :, :] * q.weights[:, None, :]) @ bgrad.transpose(0, 2, 1)
    return SparseMatrix(space.assemble_matrix(local), symmetric=prob.symmetric)


def energy_matrix(prob: SemilinearProblem, space: FESpace) -> SparseMatrix:
    """Gram matrix of the energy inner product ``<A grad u, grad v>``."""
    q = space.quadrature(2 * space.order)
    return SparseMatrix(space.assemble_matrix(_stiffness_local(prob, space, q)), symmetric=True)


def energy(prob: SemilinearProblem, space: FESpace, v, degree: int | None = None) -> float:
    """Energy functional; only defined without convection."""
    if not prob.symmetric:
        raise ValueError("the energy functional exists only for b = 0")
    if prob.reaction_antiderivative is None:
        raise ValueError("energy needs the reaction antiderivative")
    q, u, grad = _fields(prob, space, v, degree)
    x, y = q.points[..., 0], q.points[..., 1]
    dens = 0.5 * np.sum(grad * _apply_diffusion(prob, space, grad), axis=-1)
    dens += prob.reaction_antiderivative(u) - prob.load(x, y) * u
    if prob.flux is not None:
        dens -= np.sum(prob.flux(x, y) * grad, axis=-1)
    return float(np.sum(q.weights * dens))
