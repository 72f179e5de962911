"""Dense symmetric linear algebra.

The modified Cholesky decomposition (MCD) writes a symmetric positive
definite matrix as ``A = L diag(D)^-1 L^T`` with ``L`` unit lower-triangular
and ``D`` strictly positive. It is the LDL^T factorization with the pivots
inverted, so ``D`` holds conditional variances when ``A`` is a precision
matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike, NDArray

from .errors import DimensionMismatch, IndexOutOfRange, NotPositiveDefinite

PIVOT_FLOOR = 1e-12
SYMMETRY_TOL = 1e-9


def as_sym(A: ArrayLike, tol: float = SYMMETRY_TOL) -> NDArray:
    """Return ``A`` as a float array after checking it is square and symmetric.

    Entries that differ from their transpose by at most ``tol`` (relative to
    the largest entry) are averaged so the returned storage is exactly
    symmetric.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise DimensionMismatch(f"expected a non-empty square matrix, got shape {A.shape}")
    scale = max(1.0, float(np.max(np.abs(A))))
    if np.max(np.abs(A - A.T)) > tol * scale:
        raise DimensionMismatch("matrix is not symmetric")
    return 0.5 * (A + A.T)


@dataclass(frozen=True, eq=False)
class CholeskyParam:
    """Cholesky parameter ``(L, D)`` with ``Omega = L diag(D)^-1 L^T``."""

    L: NDArray
    D: NDArray

    def __post_init__(self):
        L = np.asarray(self.L, dtype=float)
        D = np.asarray(self.D, dtype=float)
        p = D.shape[0]
        if D.ndim != 1 or L.shape != (p, p):
            raise DimensionMismatch(f"L shape {L.shape} does not match D length {D.shape}")
        if not np.all(np.diag(L) == 1.0) or np.any(np.triu(L, 1) != 0.0):
            raise ValueError("L must be unit lower-triangular")
        if not np.all(D > 0):
            raise ValueError("D must be strictly positive")
        L.setflags(write=False)
        D.setflags(write=False)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "D", D)

    @property
    def p(self) -> int:
        return self.D.shape[0]

    def omega(self) -> NDArray:
        return compose(self.L, self.D)


def compose(L: ArrayLike, D: ArrayLike) -> NDArray:
    """``L diag(D)^-1 L^T`` for any square ``L`` (triangular or not)."""
    L = np.asarray(L, dtype=float)
    D = np.asarray(D, dtype=float)
    out = (L / D) @ L.T
    return 0.5 * (out + out.T)


def ldl(A: ArrayLike, pivot_floor: float = PIVOT_FLOOR) -> tuple[NDArray, NDArray]:
    """Right-looking LDL^T without pivoting; returns ``(L, pivots)``."""
    W = np.array(A, dtype=float)
    p = W.shape[0]
    L = np.eye(p)
    pivots = np.empty(p)
    for k in range(p):
        piv = W[k, k]
        if not piv > pivot_floor:
            raise NotPositiveDefinite(
                f"LDL pivot {piv:.3g} at index {k} is not above {pivot_floor:g}",
                pivot=piv, index=k,
            )
        pivots[k] = piv
        below = W[k + 1:, k]
        col = below / piv
        L[k + 1:, k] = col
        W[k + 1:, k + 1:] -= np.outer(col, below)
    return L, pivots


def mcd(A: ArrayLike, pivot_floor: float = PIVOT_FLOOR) -> CholeskyParam:
    """Modified Cholesky decomposition of a symmetric positive definite matrix.

    Raises
    ------
    NotPositiveDefinite
        If any LDL^T pivot is at or below ``pivot_floor``.
    """
    L, pivots = ldl(as_sym(A), pivot_floor)
    return CholeskyParam(L, 1.0 / pivots)


def logdet(A: ArrayLike, pivot_floor: float = PIVOT_FLOOR) -> float:
    """Log-determinant as the sum of log LDL^T pivots. A 0x0 matrix gives 0."""
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return 0.0
    _, pivots = ldl(as_sym(A), pivot_floor)
    return float(np.sum(np.log(pivots)))


def spd_inverse(A: ArrayLike) -> NDArray:
    """Inverse of a symmetric positive definite matrix via its Cholesky factor."""
    A = as_sym(A)
    try:
        c = scipy.linalg.cho_factor(A, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"spd_inverse: {exc}") from None
    inv = scipy.linalg.cho_solve(c, np.eye(A.shape[0]))
    return 0.5 * (inv + inv.T)


def parent_blocks(A: ArrayLike, dag, i: int) -> tuple[NDArray, NDArray, NDArray]:
    """Parent-indexed pieces of ``A`` for vertex ``i`` (0-based).

    Returns the column ``A[pa, i]``, the block ``A[pa, pa]`` and the augmented
    block over ``[i] + pa``. With no parents the augmented block is ``[[A[i, i]]]``.
    """
    A = np.asarray(A, dtype=float)
    if not 0 <= i < A.shape[0] or i >= dag.p:
        raise IndexOutOfRange(f"vertex {i} out of range for p={dag.p}")
    pa = list(dag.parents[i])
    idx = [i] + pa
    return A[pa, i], A[np.ix_(pa, pa)], A[np.ix_(idx, idx)]
