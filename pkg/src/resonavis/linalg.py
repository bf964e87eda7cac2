"""Sparse factorizations and Krylov machinery shared by the eigensolver.

Thin, contract-checked wrappers around SuperLU and LAPACK plus a
hand-rolled Arnoldi iteration.  The Arnoldi basis is built with classical
Gram-Schmidt and one full re-orthogonalization pass, which keeps the basis
orthonormal to near machine precision at the cost of a second projection.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class LinAlgError(RuntimeError):
    """Base class for numerical failures in this module."""


class NotPositiveDefiniteError(LinAlgError):
    """factor_spd met a nonpositive pivot."""


class SingularMatrixError(LinAlgError):
    """factor_complex met an exactly singular matrix."""


@dataclass
class Factorization:
    """Direct LU factorization handle with a solve method."""

    n: int
    dtype: np.dtype
    _lu: object

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b)
        if b.shape[0] != self.n:
            raise ValueError(f"right-hand side length {b.shape[0]}, expected {self.n}")
        if np.iscomplexobj(b) and not np.issubdtype(self.dtype, np.complexfloating):
            # a real factorization applies to complex data componentwise
            return self._lu.solve(np.ascontiguousarray(b.real)) + 1j * self._lu.solve(
                np.ascontiguousarray(b.imag)
            )
        return self._lu.solve(b.astype(self.dtype, copy=False))


def spmv(matrix: sp.spmatrix, x: np.ndarray) -> np.ndarray:
    """Sparse matrix-vector product with a dimension check."""
    if matrix.shape[1] != x.shape[0]:
        raise ValueError(
            f"dimension mismatch: matrix is {matrix.shape}, vector has {x.shape[0]}"
        )
    return matrix @ x


def factor_spd(matrix: sp.spmatrix) -> Factorization:
    """Factor a symmetric positive definite sparse matrix.

    Uses a minimum-degree ordering on A + A^T with diagonal pivoting; all
    pivots must come out positive, anything else raises
    NotPositiveDefiniteError.
    """
    matrix = sp.csc_matrix(matrix)
    asym = abs(matrix - matrix.T)
    if asym.nnz and asym.max() > 1e-12 * abs(matrix).max():
        raise NotPositiveDefiniteError("matrix is not symmetric")
    try:
        lu = spla.splu(
            matrix,
            permc_spec="MMD_AT_PLUS_A",
            diag_pivot_thresh=0.0,
            options={"SymmetricMode": True},
        )
    except RuntimeError as exc:  # singular factor
        raise NotPositiveDefiniteError(str(exc)) from exc
    pivots = lu.U.diagonal()
    if np.any(pivots.real <= 0):
        raise NotPositiveDefiniteError("nonpositive pivot encountered")
    return Factorization(n=matrix.shape[0], dtype=matrix.dtype, _lu=lu)


def factor_complex(matrix: sp.spmatrix) -> Factorization:
    """Factor a general (complex) sparse matrix.

    Column minimum-degree ordering with partial pivoting; an exactly
    singular matrix raises SingularMatrixError.
    """
    matrix = sp.csc_matrix(matrix).astype(complex)
    try:
        lu = spla.splu(matrix)
    except RuntimeError as exc:
        raise SingularMatrixError(str(exc)) from exc
    return Factorization(n=matrix.shape[0], dtype=matrix.dtype, _lu=lu)


def solve(factorization: Factorization, b: np.ndarray) -> np.ndarray:
    return factorization.solve(b)


def hessenberg_eig(hess: np.ndarray) -> tuple[np.ndarray, bool]:
    """Eigenvalues of a dense upper Hessenberg matrix.

    Returns (values, converged).  On the rare LAPACK non-convergence the
    flag is False and the values are NaN placeholders.

    Raises
    ------
    ValueError
        If the matrix is not square or larger than 200 x 200.
    """
    hess = np.asarray(hess)
    if hess.ndim != 2 or hess.shape[0] != hess.shape[1]:
        raise ValueError("expected a square matrix")
    if hess.shape[0] > 200:
        raise ValueError("matrix order above the supported cap of 200")
    try:
        return np.linalg.eigvals(hess), True
    except np.linalg.LinAlgError:
        return np.full(hess.shape[0], np.nan, dtype=complex), False


@dataclass
class KrylovState:
    """Arnoldi basis and projected Hessenberg matrix.

    ``basis`` has ``steps + 1`` orthonormal columns and ``hessenberg`` is
    the rectangular ``(steps + 1, steps)`` projection, so that
    ``op(basis[:, :steps]) = basis @ hessenberg`` up to roundoff.
    """

    basis: np.ndarray
    hessenberg: np.ndarray
    breakdown: bool

    @property
    def steps(self) -> int:
        return self.hessenberg.shape[1]

    @property
    def square(self) -> np.ndarray:
        """Leading square block of the Hessenberg matrix."""
        return self.hessenberg[: self.steps, :]


def arnoldi(
    op: Callable[[np.ndarray], np.ndarray],
    start: np.ndarray,
    k: int,
) -> KrylovState:
    """Run ``k`` Arnoldi steps of ``op`` from ``start``.

    Classical Gram-Schmidt with one re-orthogonalization pass.  If the
    residual drops below ``1e-12 * ||start||`` the Krylov space is
    invariant; iteration stops early and ``breakdown`` is set.

    Raises
    ------
    ValueError
        If the start vector is zero (or k < 1).
    """
    start = np.asarray(start, dtype=complex)
    start_norm = np.linalg.norm(start)
    if start_norm == 0.0:
        raise ValueError("zero start vector")
    if k < 1:
        raise ValueError("need at least one step")

    n = start.shape[0]
    tol = 1e-12 * start_norm
    basis = np.zeros((n, k + 1), dtype=complex)
    hess = np.zeros((k + 1, k), dtype=complex)
    basis[:, 0] = start / start_norm

    for j in range(k):
        w = np.asarray(op(basis[:, j]), dtype=complex)
        if w.shape != (n,):
            raise ValueError("operator changed the vector length")
        proj = basis[:, : j + 1].conj().T @ w
        w = w - basis[:, : j + 1] @ proj
        correction = basis[:, : j + 1].conj().T @ w
        w = w - basis[:, : j + 1] @ correction
        proj = proj + correction
        beta = np.linalg.norm(w)
        hess[: j + 1, j] = proj
        hess[j + 1, j] = beta
        if beta < tol:
            return KrylovState(
                basis=basis[:, : j + 1],
                hessenberg=hess[: j + 2, : j + 1],
                breakdown=True,
            )
        basis[:, j + 1] = w / beta
    return KrylovState(basis=basis, hessenberg=hess, breakdown=False)
