"""Restarted GMRES, right-preconditioned by the direct factorization.

Right preconditioning keeps the iteration's residual equal to the true
residual of the original system, so the reported convergence history needs
no translation. The Arnoldi process uses modified Gram-Schmidt with one
conditional reorthogonalization pass, and the small least-squares problem
is maintained by Givens rotations. Residual history entries are the
running Givens estimates (exactly nonincreasing within a restart cycle);
at every cycle end the true residual norm is recomputed and replaces the
final entry, and convergence is always judged on the recomputed value.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import treecode
from .kernels import eval_block
from .treecode import hmatvec

_REORTH_THRESHOLD = 1e-8

OPERATOR_MODES = ("compressed", "dense_oracle")


@dataclass
class KrylovReport:
    iterations: int = 0
    restarts: int = 0
    residuals: list[float] = field(default_factory=list)
    converged: bool = False
    wall_time: float = 0.0
    final_residual: float = 0.0


def gmres(apply_a, apply_minv, b, tol=1e-8, max_iter=500, restart=50):
    """Solve A x = b with right-preconditioned restarted GMRES.

    apply_a and apply_minv map n-vectors to n-vectors; the returned x is
    the unpreconditioned solution (x = M^{-1} y). Terminates once the
    recomputed true residual satisfies ||b - A x|| <= tol * ||b||, on
    happy breakdown with a converged residual, or at max_iter.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if restart < 1:
        raise ValueError("restart must be >= 1")
    b = np.asarray(b, dtype=np.float64)
    n = b.shape[0]
    t0 = time.perf_counter()
    report = KrylovReport()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        report.converged = True
        report.wall_time = time.perf_counter() - t0
        return np.zeros(n), report

    x = np.zeros(n)
    while report.iterations < max_iter:
        r = b - _checked(apply_a, x, n)
        rnorm = np.linalg.norm(r)
        if rnorm / bnorm <= tol:
            report.converged = True
            break

        steps = min(restart, max_iter - report.iterations)
        basis = np.empty((steps + 1, n))
        basis[0] = r / rnorm
        hess = np.zeros((steps + 1, steps))
        giv_c = np.empty(steps)
        giv_s = np.empty(steps)
        rhs = np.zeros(steps + 1)
        rhs[0] = rnorm

        k = 0
        breakdown = False
        while k < steps:
            w = _checked(apply_a, apply_minv(basis[k]), n)
            wnorm_in = np.linalg.norm(w)
            for i in range(k + 1):
                hess[i, k] = basis[i] @ w
                w -= hess[i, k] * basis[i]
            # one reorthogonalization pass if the remaining overlap with
            # the basis is non-negligible relative to the incoming vector
            overlap = basis[: k + 1] @ w
            if wnorm_in > 0 and np.max(np.abs(overlap)) > _REORTH_THRESHOLD * wnorm_in:
                hess[: k + 1, k] += overlap
                w -= overlap @ basis[: k + 1]
            subdiag = np.linalg.norm(w)
            hess[k + 1, k] = subdiag

            # apply accumulated rotations, then a new one zeroing the
            # subdiagonal entry
            for i in range(k):
                hi, hj = hess[i, k], hess[i + 1, k]
                hess[i, k] = giv_c[i] * hi + giv_s[i] * hj
                hess[i + 1, k] = -giv_s[i] * hi + giv_c[i] * hj
            denom = np.hypot(hess[k, k], subdiag)
            if denom == 0.0:
                giv_c[k], giv_s[k] = 1.0, 0.0
            else:
                giv_c[k] = hess[k, k] / denom
                giv_s[k] = subdiag / denom
            hess[k, k] = denom
            hess[k + 1, k] = 0.0
            rhs[k + 1] = -giv_s[k] * rhs[k]
            rhs[k] = giv_c[k] * rhs[k]

            estimate = abs(rhs[k + 1]) / bnorm
            report.residuals.append(estimate)
            report.iterations += 1
            breakdown = subdiag == 0.0  # happy breakdown: solution is exact
            if not breakdown:
                basis[k + 1] = w / subdiag
            k += 1
            if breakdown or estimate <= tol:
                break

        if k > 0:
            y = scipy.linalg.solve_triangular(hess[:k, :k], rhs[:k])
            x = x + apply_minv(y @ basis[:k])
            true_rel = np.linalg.norm(b - _checked(apply_a, x, n)) / bnorm
            report.residuals[-1] = true_rel
            if true_rel <= tol:
                report.converged = True
                break
        if breakdown and not report.converged:
            # exhausted Krylov space without meeting tol; restarting from
            # the same point cannot progress
            break
        if report.iterations >= max_iter:
            break
        report.restarts += 1

    report.final_residual = (
        np.linalg.norm(b - _checked(apply_a, x, n)) / bnorm
    )
    report.wall_time = time.perf_counter() - t0
    return x, report


def _checked(op, v, n):
    out = np.asarray(op(v), dtype=np.float64)
    if out.shape != (n,):
        raise ValueError(
            f"operator returned shape {out.shape}, expected ({n},)"
        )
    return out


def hybrid_solve(op, f, b, tol=1e-8, max_iter=500, restart=50,
                 operator_mode="compressed"):
    """GMRES on the kernel system, preconditioned by the factorization.

    operator_mode "compressed" applies the fast compressed matvec (the
    preconditioner is then the exact inverse, so convergence is
    immediate); "dense_oracle" applies the true dense kernel matrix
    (n <= 4096), so the converged solution solves the true system and the
    iteration corrects the compression error. All vectors in tree order.
    """
    if operator_mode not in OPERATOR_MODES:
        raise ValueError(f"unknown operator mode {operator_mode!r}")
    lam = f.lam
    op_lam = op.kernel.regularization
    if op_lam != lam:
        raise ValueError(
            f"factorization lambda {lam} does not match operator lambda {op_lam}"
        )
    if operator_mode == "compressed":
        apply_a = lambda v: hmatvec(op, v, lam)
    else:
        n = op.n
        if n > treecode.MATERIALIZE_MAX_POINTS:
            raise ValueError(
                "dense_oracle mode is limited to"
                f" n <= {treecode.MATERIALIZE_MAX_POINTS}"
            )
        coords = op.tree.points.coords
        dense = eval_block(op.kernel, coords, coords)
        dense[np.diag_indices(n)] += lam
        apply_a = lambda v: dense @ v
    apply_minv = lambda v: f.solve(v, in_tree_order=True)
    return gmres(apply_a, apply_minv, b, tol=tol, max_iter=max_iter,
                 restart=restart)
