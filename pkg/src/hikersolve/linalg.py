"""Dense linear-algebra building blocks.

Column-pivoted Householder QR with a relative diagonal-threshold rank cut,
the interpolative decomposition built on top of it, and LU factor/solve
wrappers used for every small dense system in the package. Everything here
is plain float64 and deterministic: pivot ties go to the lowest column
index, pivot norms are recomputed from scratch at every step (matrices are
skeleton-sized, a few hundred columns at most, so robustness beats the
classical norm-downdating trick).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised when a dense factorization hits an exactly singular pivot."""


@dataclass(frozen=True)
class PivotedQRResult:
    """Truncated column-pivoted QR of an m-by-n matrix.

    Attributes
    ----------
    pivots : (n,) int array, permutation of column indices. The factor
        corresponds to ``A[:, pivots]``.
    r_factor : (rank, n) array, the first ``rank`` rows of R after pivoting
        (upper trapezoidal; leading rank-by-rank block is upper triangular).
    rank : numerical rank under the relative diagonal threshold.
    """

    pivots: np.ndarray
    r_factor: np.ndarray
    rank: int


def pivoted_qr(a, tol, max_rank):
    """Column-pivoted Householder QR, truncated at a relative tolerance.

    The factorization stops at the smallest step j where the pivot column
    norm (the would-be ``|R[j, j]|``) falls to ``tol * |R[0, 0]|`` or below,
    or once ``max_rank`` steps have been taken. Among columns with equal
    remaining norm the lowest index wins, so results are reproducible.

    Parameters
    ----------
    a : (m, n) array_like
    tol : relative diagonal threshold, > 0
    max_rank : hard cap on the rank, >= 1

    Returns
    -------
    PivotedQRResult
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_rank < 1:
        raise ValueError("max_rank must be >= 1")
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    m, n = a.shape
    r = a.copy()
    pivots = np.arange(n)
    if m == 0 or n == 0:
        return PivotedQRResult(pivots, np.zeros((0, n)), 0)

    kmax = min(m, n, max_rank)
    first_diag = None
    rank = kmax
    for k in range(kmax):
        # recompute remaining column norms; argmax takes the first (lowest
        # index) among ties
        norms = np.sqrt(np.sum(r[k:, k:] ** 2, axis=0))
        j = k + int(np.argmax(norms))
        pivot_norm = norms[j - k]
        if first_diag is None:
            first_diag = pivot_norm
        if pivot_norm <= tol * first_diag:
            rank = k
            break
        if j != k:
            r[:, [k, j]] = r[:, [j, k]]
            pivots[[k, j]] = pivots[[j, k]]

        # Householder reflection zeroing r[k+1:, k]
        x = r[k:, k]
        alpha = -np.copysign(pivot_norm, x[0]) if x[0] != 0 else -pivot_norm
        v = x.copy()
        v[0] -= alpha
        vnorm = np.linalg.norm(v)
        if vnorm > 0:
            v /= vnorm
            r[k:, k:] -= 2.0 * np.outer(v, v @ r[k:, k:])
        r[k, k] = alpha
        r[k + 1:, k] = 0.0

    return PivotedQRResult(pivots, r[:rank].copy(), rank)


def interpolative_decomposition(a, tol, max_rank):
    """Column interpolative decomposition A ~= A[:, J] @ P.

    Built from :func:`pivoted_qr`: with R = [R11 | R12] in pivoted order,
    P is ``[I | inv(R11) R12]`` mapped back through the pivot permutation,
    so ``P[:, J]`` is exactly the identity. The QR truncation rule
    guarantees every diagonal entry of R11 exceeds ``tol * |R[0, 0]|``,
    so the triangular solve never divides by a negligible pivot.

    Returns
    -------
    skeleton_cols : (r,) int array of retained column indices J
    interp : (r, n) interpolation matrix P
    """
    a = np.asarray(a, dtype=np.float64)
    qr = pivoted_qr(a, tol, max_rank)
    r = qr.rank
    n = a.shape[1]
    skeleton = qr.pivots[:r].copy()
    interp = np.zeros((r, n))
    if r == 0:
        return skeleton, interp
    r11 = qr.r_factor[:, :r]
    r12 = qr.r_factor[:, r:]
    coeffs = np.empty((r, n))
    coeffs[:, :r] = np.eye(r)
    if n > r:
        coeffs[:, r:] = scipy.linalg.solve_triangular(r11, r12)
    interp[:, qr.pivots] = coeffs
    return skeleton, interp


@dataclass(frozen=True)
class DenseFactor:
    """LU factorization with partial pivoting (combined LAPACK storage)."""

    lu: np.ndarray
    piv: np.ndarray

    @property
    def n(self):
        return self.lu.shape[0]


def factor_dense(a):
    """LU-factor a square matrix; raises on an exactly singular pivot."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    if a.shape[0] == 0:
        return DenseFactor(np.zeros((0, 0)), np.zeros(0, dtype=np.int32))
    with warnings.catch_warnings():
        # LAPACK getrf completes on singular input with a warning; we turn
        # the exact-zero pivot into a hard error below instead.
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a)
    diag = np.abs(np.diag(lu))
    zero = np.flatnonzero(diag == 0.0)
    if zero.size:
        raise SingularMatrixError(
            f"singular matrix: zero pivot at elimination step {int(zero[0])}"
        )
    return DenseFactor(lu, piv)


def solve_dense(f, b):
    """Solve A X = B for one or many right-hand sides using an LU factor."""
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != f.n:
        raise ValueError(f"right-hand side has {b.shape[0]} rows, expected {f.n}")
    if f.n == 0:
        return b.copy()
    return scipy.linalg.lu_solve((f.lu, f.piv), b)
