"""Sparse direct solves for Jacobian and Riesz systems.

Both paths use SuperLU through :func:`scipy.sparse.linalg.splu`.  Symmetric
matrices use the symmetric mode (diagonal pivoting, ordering on A + A^T);
nonsymmetric ones use partial pivoting with a COLAMD ordering.  Both
orderings are deterministic, so identical input gives identical bits.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = ["SparseMatrix", "Factorization", "SingularMatrixError", "factor", "solve"]

PIVOT_RTOL = 1e-14
RESIDUAL_RTOL = 1e-12
_MAX_REFINEMENT = 3


class SingularMatrixError(ArithmeticError):
    pass


@dataclass(frozen=True)
class SparseMatrix:
    """Square CSR matrix over free dofs with a symmetry flag."""

    csr: sp.csr_matrix
    symmetric: bool

    @property
    def shape(self):
        return self.csr.shape

    def __matmul__(self, x):
        return self.csr @ x

    def toarray(self):
        return self.csr.toarray()


@dataclass(frozen=True, eq=False)
class Factorization:
    matrix: sp.csr_matrix
    lu: object  # SuperLU, or None for an empty system
    symmetric: bool

    def solve(self, b) -> np.ndarray:
        return solve(self, b)


def factor(M, spd: bool | None = None) -> Factorization:
    """Factor ``M`` (a :class:`SparseMatrix`, scipy sparse, or dense array).

    ``spd=True`` requests the symmetric path and is refused for matrices
    whose symmetry flag is unset.
    """
    if isinstance(M, SparseMatrix):
        flag = M.symmetric
        A = M.csr
    else:
        A = sp.csr_matrix(M)
        flag = bool(spd)
    if spd and not flag:
        raise ValueError("symmetric factorization requested for a matrix without the symmetry flag")
    symmetric = flag if spd is None else bool(spd)
    n, m = A.shape
    if n != m:
        raise ValueError(f"matrix must be square, got {A.shape}")
    A = A.tocsr()
    if n == 0:
        return Factorization(A, None, symmetric)
    csc = A.tocsc()
    try:
        if symmetric:
            lu = spla.splu(csc, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                           options={"SymmetricMode": True})
        else:
            lu = spla.splu(csc, permc_spec="COLAMD")
    except RuntimeError as err:
        # SuperLU stops at an exactly zero pivot; an empty row or column is the usual cause
        empty = np.flatnonzero((abs(csc).sum(axis=0).A1 == 0) | (abs(csc).sum(axis=1).A1 == 0))
        where = f" at dof {int(empty[0])}" if empty.size else ""
        raise SingularMatrixError(f"numerically singular matrix{where}: {err}") from None
    d = np.abs(lu.U.diagonal())
    k = int(np.argmin(d))
    if d[k] < PIVOT_RTOL * d.max():
        dof = int(np.flatnonzero(lu.perm_c == k)[0])
        raise SingularMatrixError(f"numerically singular matrix: pivot {d[k]:.3e} at dof {dof}")
    return Factorization(A, lu, symmetric)


def solve(f: Factorization, b) -> np.ndarray:
    """Solve with up to three steps of iterative refinement."""
    b = np.asarray(b, dtype=float)
    if f.lu is None:
        return np.zeros(0)
    x = f.lu.solve(b)
    nb = np.linalg.norm(b)
    for _ in range(_MAX_REFINEMENT):
        r = b - f.matrix @ x
        if np.linalg.norm(r) <= RESIDUAL_RTOL * nb:
            break
        x = x + f.lu.solve(r)
    return x
