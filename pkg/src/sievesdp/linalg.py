"""Dense symmetric kernels: Cholesky definiteness test and Jacobi eigenvalues."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class ConvergenceError(ArithmeticError):
    """An iterative kernel ran out of its iteration budget."""


def as_dense_sym(M) -> np.ndarray:
    """Copy ``M`` to a float array, checking it is square and exactly symmetric."""
    a = np.array(M, dtype=float, copy=True)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError(f"expected a nonempty square matrix, got shape {a.shape}")
    if not np.array_equal(a, a.T, equal_nan=True):
        raise ValueError("matrix is not symmetric")
    return a


@dataclass(frozen=True, eq=False)
class PdResult:
    """Outcome of :func:`pd_check`.

    ``failed_pivot`` is the 0-based index of the first pivot that was not
    above the tolerance, or ``None`` when the factorization completed, in
    which case ``factor`` holds the lower-triangular Cholesky factor.
    """

    failed_pivot: int | None
    factor: np.ndarray | None = None

    @property
    def positive_definite(self) -> bool:
        return self.failed_pivot is None

    def __bool__(self) -> bool:
        return self.failed_pivot is None


def pd_check(M, pivot_tol: float = 0.0) -> PdResult:
    """Test positive definiteness by an outer-product Cholesky factorization.

    The matrix is positive definite iff every pivot is strictly greater than
    ``pivot_tol``; the scan stops at the first pivot that is not (a NaN pivot
    fails too).
    """
    if pivot_tol < 0:
        raise ValueError("pivot_tol must be nonnegative")
    a = as_dense_sym(M)
    n = a.shape[0]
    L = np.zeros_like(a)
    for k in range(n):
        piv = a[k, k]
        if not piv > pivot_tol:
            return PdResult(k)
        lkk = math.sqrt(piv)
        L[k, k] = lkk
        if k + 1 < n:
            col = a[k + 1:, k] / lkk
            L[k + 1:, k] = col
            a[k + 1:, k + 1:] -= np.outer(col, col)
    return PdResult(None, L)


def _jacobi_sweeps(a: np.ndarray, tol: float, max_sweeps: int) -> np.ndarray:
    n = a.shape[0]
    scale = np.linalg.norm(a)
    if scale == 0.0 or n == 1:
        return np.diag(a).copy()
    iu = np.triu_indices(n, 1)
    for _ in range(max_sweeps):
        off = math.sqrt(2.0 * float(np.sum(a[iu] ** 2)))
        if off <= tol * scale:
            return np.diag(a).copy()
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap, aq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
    raise ConvergenceError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")


def eigenvalues(M, tol: float = 1e-15, max_sweeps: int = 100) -> np.ndarray:
    """All eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending."""
    a = as_dense_sym(M)
    if not np.all(np.isfinite(a)):
        raise ConvergenceError("matrix has non-finite entries")
    return np.sort(_jacobi_sweeps(a, tol, max_sweeps))


def min_eigenvalue(M, tol: float = 1e-15, max_sweeps: int = 100) -> float:
    """Smallest eigenvalue of a symmetric matrix.

    Sweeps stop once the off-diagonal Frobenius mass drops below
    ``tol * ||M||_F``; raises :class:`ConvergenceError` past ``max_sweeps``.
    """
    return float(eigenvalues(M, tol, max_sweeps)[0])


def norms(M) -> tuple[float, float]:
    """``(frobenius, max |m_ij|)`` over the full square matrix."""
    a = np.asarray(M, dtype=float)
    if a.size == 0:
        return 0.0, 0.0
    return float(np.sqrt(np.sum(a * a))), float(np.max(np.abs(a)))
