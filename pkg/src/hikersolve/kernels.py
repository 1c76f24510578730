"""Kernel families and dense sub-block evaluation.

Three symmetric families cover the rank-behavior regimes the solver cares
about: gaussian (smooth, bandwidth-controlled decay), laplace3d (singular,
slowly decaying), polynomial (globally low rank). The diagonal
regularization lambda rides along on the spec but is never added by
``eval_block``; solvers add it to the system diagonal themselves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FAMILIES = ("gaussian", "laplace3d", "polynomial")

# rows per chunk when evaluating large blocks; keeps the (rows, n, d)
# broadcast temporary small without changing any computed entry
_CHUNK_ROWS = 512


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus its parameters and the system diagonal shift.

    bandwidth h applies to gaussian; degree/shift to polynomial;
    regularization is the lambda added to K's diagonal by the solvers.
    """

    family: str = "gaussian"
    h: float = 0.5
    degree: int = 2
    shift: float = 1.0
    regularization: float = 1e-3

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.family == "gaussian" and not self.h > 0:
            raise ValueError("gaussian bandwidth h must be positive")
        if self.family == "polynomial":
            if self.degree < 1:
                raise ValueError("polynomial degree must be >= 1")
            if self.shift < 0:
                raise ValueError("polynomial shift must be nonnegative")
        if self.regularization < 0:
            raise ValueError("regularization must be nonnegative")


def eval_system_diag_shift(kernel):
    """The configured diagonal regularization lambda."""
    return kernel.regularization


def _pair_sq_dists(xt, xs):
    # broadcasted (xi - yj)^2 summed over d: entry (i, j) and the transposed
    # entry (j, i) are computed from bitwise-identical terms, so symmetry
    # holds exactly
    diff = xt[:, None, :] - xs[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def eval_block(kernel, xt, xs):
    """Dense kernel block K(xt, xs).

    Parameters
    ----------
    kernel : KernelSpec
    xt : (m, d) target points
    xs : (n, d) source points

    Returns
    -------
    (m, n) float64 array. No diagonal regularization is added. For
    laplace3d the self-interaction (coincident points) is defined as 0.
    """
    xt = np.atleast_2d(np.asarray(xt, dtype=np.float64))
    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    if xt.shape[1] != xs.shape[1]:
        raise ValueError(
            f"dimension mismatch: targets are {xt.shape[1]}-d, sources {xs.shape[1]}-d"
        )
    d = xt.shape[1]
    if kernel.family == "laplace3d" and d != 3:
        raise ValueError("laplace3d kernel requires 3-d points")

    m, n = xt.shape[0], xs.shape[0]
    out = np.empty((m, n))
    for lo in range(0, m, _CHUNK_ROWS):
        hi = min(lo + _CHUNK_ROWS, m)
        chunk = xt[lo:hi]
        if kernel.family == "gaussian":
            sq = _pair_sq_dists(chunk, xs)
            out[lo:hi] = np.exp(sq / (-2.0 * kernel.h**2))
        elif kernel.family == "laplace3d":
            sq = _pair_sq_dists(chunk, xs)
            with np.errstate(divide="ignore"):
                block = 1.0 / (4.0 * np.pi * np.sqrt(sq))
            block[sq == 0.0] = 0.0
            out[lo:hi] = block
        else:  # polynomial
            dots = np.einsum("ik,jk->ij", chunk, xs)
            out[lo:hi] = (dots + kernel.shift) ** kernel.degree
    return out
