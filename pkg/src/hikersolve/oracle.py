"""Brute-force references, error metrics, and the scaling benchmark.

Everything here that produces ground truth is built only from dense kernel
evaluation and dense factorizations; no traversal code is shared with the
fast paths. Fast-path objects arrive as plain arguments (the error report
calls their public matvec/solve), and the scaling benchmark receives the
pipeline stages as injected callables so this module never imports them.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from . import data
from .kernels import eval_block
from .linalg import factor_dense, solve_dense

log = logging.getLogger(__name__)

DENSE_MAX_POINTS = 8192


def dense_kernel_matrix(kernel, ps, lam):
    """Entrywise kernel matrix over all pairs, plus lam on the diagonal."""
    if ps.n > DENSE_MAX_POINTS:
        raise ValueError(f"dense oracle is limited to n <= {DENSE_MAX_POINTS}")
    out = eval_block(kernel, ps.coords, ps.coords)
    out[np.diag_indices(ps.n)] += lam
    return out


def dense_solve(a, b):
    f = factor_dense(a)
    x = solve_dense(f, b)
    res = np.linalg.norm(a @ x - b) / max(np.linalg.norm(b), 1e-300)
    log.debug("dense solve residual %.3e", res)
    return x


def dense_inverse(a):
    f = factor_dense(np.asarray(a, dtype=np.float64))
    return solve_dense(f, np.eye(f.n))


def assemble_basis(tree, skeletons, node):
    """Dense telescoped interpolation operator of a node (rank x size).

    Recursive reference assembly used for error attribution; the fast
    paths apply this operator implicitly and never form it.
    """
    skel = skeletons[node.index]
    if node.is_leaf:
        return np.asarray(skel.interp)
    left, right = tree.children(node)
    bl = assemble_basis(tree, skeletons, left)
    br = assemble_basis(tree, skeletons, right)
    stacked = np.zeros((bl.shape[0] + br.shape[0], node.end - node.begin))
    split = left.end - left.begin
    stacked[: bl.shape[0], :split] = bl
    stacked[bl.shape[0]:, split:] = br
    return skel.interp @ stacked


def error_report(op, f, kernel, ps, lam, trials=5, seed=0):
    """Accuracy metrics of the fast paths against dense references.

    op/f are used only through their public matvec/solve; ps must hold the
    same points in the same (tree) order the operator was built on.
    Returns medians over ``trials`` random unit vectors plus the worst
    sibling-block reconstruction error per tree level.
    """
    n = ps.n
    rng = np.random.default_rng([int(seed), 17])
    dense = dense_kernel_matrix(kernel, ps, lam)
    dense_f = factor_dense(dense)

    # the compressed matrix, materialized through the operator's own
    # matvec; dense-solving it isolates factorization error from
    # compression error
    ktilde = np.empty((n, n))
    e = np.zeros(n)
    for i in range(n):
        e[i] = 1.0
        ktilde[:, i] = op.matvec(e, lam)
        e[i] = 0.0
    ktilde_f = factor_dense(ktilde)

    matvec_errs = []
    vs_ktilde = []
    vs_k = []
    for _ in range(trials):
        w = rng.standard_normal(n)
        w /= np.linalg.norm(w)
        ref = dense @ w
        matvec_errs.append(
            np.linalg.norm(op.matvec(w, lam) - ref) / np.linalg.norm(ref)
        )
        b = rng.standard_normal(n)
        b /= np.linalg.norm(b)
        x_fast = f.solve(b, in_tree_order=True)
        x_tilde = solve_dense(ktilde_f, b)
        x_true = solve_dense(dense_f, b)
        vs_ktilde.append(
            np.linalg.norm(x_fast - x_tilde) / np.linalg.norm(x_tilde)
        )
        vs_k.append(np.linalg.norm(x_fast - x_true) / np.linalg.norm(x_true))

    offdiag = {}
    tree = op.tree
    coords = ps.coords
    for node in tree.nodes:
        if node.is_leaf:
            continue
        left, right = tree.children(node)
        block = eval_block(
            kernel,
            coords[left.begin:left.end],
            coords[right.begin:right.end],
        )
        ql = skel_indices(op.skeletons, left.index)
        qr = skel_indices(op.skeletons, right.index)
        approx = (
            assemble_basis(tree, op.skeletons, left).T
            @ eval_block(kernel, coords[ql], coords[qr])
            @ assemble_basis(tree, op.skeletons, right)
        )
        denom = np.linalg.norm(block)
        err = np.linalg.norm(block - approx) / denom if denom > 0 else 0.0
        offdiag[node.level] = max(offdiag.get(node.level, 0.0), err)

    return {
        "matvec_relerr": float(np.median(matvec_errs)),
        "solve_relerr_vs_Ktilde": float(np.median(vs_ktilde)),
        "solve_relerr_vs_K": float(np.median(vs_k)),
        "offdiag_block_relerr": {str(k): float(v) for k, v in offdiag.items()},
    }


def skel_indices(skeletons, node_index):
    return np.asarray(skeletons[node_index].indices)


@dataclass(frozen=True)
class BenchmarkPipeline:
    """Fast-path stages injected by the caller (see cli.standard_pipeline)."""

    build: callable        # PointSet -> tree
    skeletonize: callable  # tree -> skeletons
    assemble: callable     # (tree, skeletons) -> operator
    factorize: callable    # operator -> factorization with .solve
    solve: callable        # (factorization, b) -> x


def _median_time(fn, repeats, warmup=False):
    times = []
    result = None
    if warmup:
        fn()
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times)), result


def fit_exponent(sizes, seconds):
    """Least-squares slope of log(time) against log(n)."""
    xs = np.log(np.asarray(sizes, dtype=np.float64))
    ys = np.log(np.asarray(seconds, dtype=np.float64))
    return float(np.polyfit(xs, ys, 1)[0])


def scaling_benchmark(sizes, cfg, seed, pipeline=None, dense_sizes=None,
                      solve_repeats=5):
    """Wall-time scaling of the pipeline phases, with a log-log exponent fit.

    cfg needs attributes ``shape``, ``d``, ``kernel`` (the regularization
    rides on the kernel). ``pipeline`` is required when ``sizes`` is
    nonempty; ``dense_sizes`` additionally times the dense factor+solve
    path as a contrast (n <= 8192 each).
    """
    report = {"sizes": list(map(int, sizes or [])), "timings": {}, "exponents": {}}
    if sizes:
        if pipeline is None:
            raise ValueError("fast-path sizes need an injected pipeline")
        phases = {"build": [], "skeletonize": [], "assemble": [],
                  "factorize": [], "solve": []}
        for n in sizes:
            ps = data.generate(cfg.shape, n, seed, d=cfg.d)
            t, tree = _median_time(lambda: pipeline.build(ps), 1)
            phases["build"].append(t)
            t, skels = _median_time(lambda: pipeline.skeletonize(tree), 1)
            phases["skeletonize"].append(t)
            t, op = _median_time(lambda: pipeline.assemble(tree, skels), 1)
            phases["assemble"].append(t)
            t, f = _median_time(lambda: pipeline.factorize(op), 3)
            phases["factorize"].append(t)
            b = np.random.default_rng([int(seed), 23, int(n)]).standard_normal(n)
            t, _ = _median_time(lambda: pipeline.solve(f, b), solve_repeats,
                                warmup=True)
            phases["solve"].append(t)
            log.info("n=%d: %s", n, {k: v[-1] for k, v in phases.items()})
        report["timings"] = {k: list(map(float, v)) for k, v in phases.items()}
        report["exponents"] = {
            k: fit_exponent(sizes, v) for k, v in phases.items()
        }
    if dense_sizes:
        dense_phases = {"dense_assemble": [], "dense_factor": [],
                        "dense_solve": []}
        lam = cfg.kernel.regularization
        for n in dense_sizes:
            ps = data.generate(cfg.shape, n, seed, d=cfg.d)
            b = np.random.default_rng([int(seed), 29, int(n)]).standard_normal(n)
            t, a = _median_time(
                lambda: dense_kernel_matrix(cfg.kernel, ps, lam), solve_repeats
            )
            dense_phases["dense_assemble"].append(t)
            t, f = _median_time(lambda: factor_dense(a), solve_repeats)
            dense_phases["dense_factor"].append(t)
            t, _ = _median_time(lambda: solve_dense(f, b), solve_repeats)
            dense_phases["dense_solve"].append(t)
            log.info("dense n=%d: %s", n,
                     {k: v[-1] for k, v in dense_phases.items()})
        report["dense_sizes"] = list(map(int, dense_sizes))
        for key, values in dense_phases.items():
            report["timings"][key] = list(map(float, values))
            report["exponents"][key] = fit_exponent(dense_sizes, values)
    return report
