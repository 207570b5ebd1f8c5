"""Factorize-once, solve-many linear solves for symmetric positive definite systems."""

from __future__ import annotations

import logging

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)

try:  # CHOLMOD supernodal Cholesky, much faster than SuperLU on 3-D meshes
    from cholespy import CholeskySolverD, MatrixType
except ImportError:  # pragma: no cover - depends on the environment
    CholeskySolverD = None

PIVOT_TOL = 1e-14
RESIDUAL_TOL = 1e-10


class SingularMatrixError(np.linalg.LinAlgError):
    pass


class Factorization:
    """Reusable factors of a sparse SPD matrix.

    ``method`` is ``"cholmod"`` (needs the optional ``cholespy`` package),
    ``"splu"`` (SuperLU in symmetric mode, no pivoting) or ``"cg"`` (Jacobi
    preconditioned conjugate gradients for systems too large to factor;
    ``solve`` then accepts an initial guess).
    """

    def __init__(self, A, method: str = "auto"):
        A = sp.csr_matrix(A, dtype=float)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"matrix must be square, got shape {A.shape}")
        A.sum_duplicates()
        self.A = A
        self.shape = A.shape
        n = A.shape[0]
        diag = A.diagonal()
        scale = float(np.abs(diag).max()) if n else 1.0
        if n and diag.min() <= PIVOT_TOL * scale:
            raise SingularMatrixError("matrix has a nonpositive or vanishing diagonal entry")
        if method == "auto":
            method = "cholmod" if CholeskySolverD is not None else "splu"
        self.method = method

        if method == "cholmod":
            if CholeskySolverD is None:
                raise ImportError("method 'cholmod' needs the cholespy package")
            coo = A.tocoo()
            try:
                self._solver = CholeskySolverD(n, coo.row.astype(np.int32), coo.col.astype(np.int32), coo.data, MatrixType.COO)
            except ValueError as err:
                raise SingularMatrixError(str(err)) from None
        elif method == "splu":
            try:
                lu = spla.splu(
                    A.tocsc(),
                    permc_spec="MMD_AT_PLUS_A",
                    diag_pivot_thresh=0.0,
                    options={"SymmetricMode": True},
                )
            except RuntimeError as err:  # SuperLU reports exact singularity this way
                raise SingularMatrixError(str(err)) from None
            piv = lu.U.diagonal()
            if np.any(piv <= PIVOT_TOL * scale):
                raise SingularMatrixError(f"pivot {piv.min():.3e} below {PIVOT_TOL:g} * max diagonal")
            self._solver = lu
        elif method == "cg":
            self._inv_diag = 1.0 / diag
        else:
            raise ValueError(f"unknown method {method!r}")

    def solve(self, b, x0=None) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.shape[0]:
            raise ValueError(f"right-hand side has length {b.shape[0]}, expected {self.shape[0]}")
        if self.method == "cholmod":
            x = np.zeros_like(b)
            self._solver.solve(np.ascontiguousarray(b), x)
        elif self.method == "splu":
            x = self._solver.solve(b)
        else:
            x = self._solve_cg(b, x0)
        return x

    def _solve_cg(self, b, x0):
        if b.ndim > 1:
            return np.column_stack([self._solve_cg(col, None) for col in b.T])
        precond = spla.LinearOperator(self.shape, matvec=lambda r: self._inv_diag * r)
        x, info = spla.cg(self.A, b, x0=x0, rtol=RESIDUAL_TOL, atol=0.0, maxiter=20 * self.shape[0], M=precond)
        if info != 0:
            raise np.linalg.LinAlgError(f"conjugate gradients did not converge (info={info})")
        return x


def factorize(A, method: str = "auto") -> Factorization:
    return Factorization(A, method)


def solve(f: Factorization, b, x0=None) -> np.ndarray:
    return f.solve(b, x0)
