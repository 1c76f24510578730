"""Shared fixtures-in-spirit: independent oracles and pinned test instances.

The oracles here intentionally re-derive results with different algorithms
or loop orders than the library (hand-rolled elimination, quadratic kNN
scans, dense telescoped bases) so agreement is evidence, not tautology.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

import hikersolve as hk
from hikersolve.data import PointSet


def gauss_elim_solve(a, b):
    """Hand-rolled Gaussian elimination with partial pivoting (oracle)."""
    a = np.array(a, dtype=np.float64)
    b = np.array(b, dtype=np.float64)
    n = a.shape[0]
    for col in range(n):
        pivot = col + int(np.argmax(np.abs(a[col:, col])))
        if a[pivot, col] == 0.0:
            raise ZeroDivisionError(f"singular at column {col}")
        if pivot != col:
            a[[col, pivot]] = a[[pivot, col]]
            b[[col, pivot]] = b[[pivot, col]]
        for row in range(col + 1, n):
            m = a[row, col] / a[col, col]
            a[row, col:] -= m * a[col, col:]
            b[row] -= m * b[col]
    x = np.zeros(n)
    for row in range(n - 1, -1, -1):
        x[row] = (b[row] - a[row, row + 1:] @ x[row + 1:]) / a[row, row]
    return x


def quadratic_knn_oracle(coords, k):
    """Per-point scan with explicit (distance, index) sorting (oracle)."""
    n = coords.shape[0]
    out = np.empty((n, k), dtype=np.int64)
    for i in range(n):
        pairs = []
        for j in range(n):
            if j == i:
                continue
            diff = coords[i] - coords[j]
            pairs.append((float(diff @ diff), j))
        pairs.sort()
        out[i] = [j for _, j in pairs[:k]]
    return out


def decaying_spectrum_matrix(rng, m, n, decay=0.5, rank=None):
    """Random matrix with prescribed singular values decay**j."""
    rank = rank or min(m, n)
    u, _ = np.linalg.qr(rng.standard_normal((m, rank)))
    v, _ = np.linalg.qr(rng.standard_normal((n, rank)))
    sigma = decay ** np.arange(rank)
    return (u * sigma) @ v.T


@dataclass
class Instance:
    points: object
    kernel: object
    tree: object
    skeletons: object
    op: object
    factorization: object

    @property
    def lam(self):
        return self.factorization.lam


def build_instance(ps, kernel, leaf=64, tau=1e-7, max_rank=256,
                   sample_mode="exact", samples=256, seed=0, threads=1,
                   factor=True):
    tree = hk.build_tree(ps, leaf, seed=seed)
    skels = hk.build_skeletons(
        tree, kernel,
        hk.SkeletonConfig(tau=tau, max_rank=max_rank, samples=samples,
                          sample_mode=sample_mode, seed=seed),
        threads=threads,
    )
    op = hk.build_operator(tree, skels, kernel)
    f = hk.factorize(op, kernel.regularization, threads=threads) if factor else None
    return Instance(ps, kernel, tree, skels, op, f)


# --- the pinned verification instance (n, seed committed with goldens) ---

FROZEN_SEED = 3
FROZEN_N = 1024


def frozen_instance_kernel(lam=1e-2):
    return hk.KernelSpec(family="gaussian", h=0.3, regularization=lam)


def frozen_instance(n=FROZEN_N, tau=1e-7, lam=1e-2, factor=True):
    ps = hk.generate("uniform_cube", n, FROZEN_SEED, d=3)
    return build_instance(
        ps, frozen_instance_kernel(lam), leaf=256, tau=tau, max_rank=384,
        sample_mode="exact", seed=FROZEN_SEED, factor=factor,
    )


# --- round-trip exactness instances (criterion 2) ---
# Kernel parameters and point scalings are chosen to keep
# kappa(Ktilde + lam I) and the reduced systems inside the solver's
# stated conditioning envelope at every pinned (n, lambda).

ROUNDTRIP_SEED = 11
ROUNDTRIP_SIZES = (256, 1024, 4096)
ROUNDTRIP_LAMBDAS = (1e-3, 1e-1)
ROUNDTRIP_FAMILIES = ("gaussian", "laplace3d", "polynomial")


def roundtrip_instance(family, n, lam, seed=ROUNDTRIP_SEED):
    base = hk.generate("uniform_cube", n, seed, d=3)
    if family == "gaussian":
        # bandwidth tracks the point spacing so the kernel matrix itself
        # stays well conditioned at every size
        ps = base
        kernel = hk.KernelSpec(family="gaussian", h=0.8 * n ** (-1 / 3),
                               regularization=lam)
    elif family == "laplace3d":
        ps = PointSet(base.coords * 2.0)
        kernel = hk.KernelSpec(family="laplace3d", regularization=lam)
    else:
        ps = PointSet(base.coords * 0.05)
        kernel = hk.KernelSpec(family="polynomial", degree=2, shift=0.02,
                               regularization=lam)
    leaf = 64 if n <= 1024 else 256
    return build_instance(
        ps, kernel, leaf=leaf, tau=1e-8, max_rank=128,
        sample_mode="uniform", samples=512, seed=seed,
    )


REPORT_SCHEMA = {
    "type": "object",
    "required": ["version", "config_echo"],
    "additionalProperties": False,
    "properties": {
        "version": {"const": "hikersolve-report-1"},
        "config_echo": {"type": "object"},
        "timings": {
            "type": "object",
            "additionalProperties": {"type": "number"},
            "minProperties": 1,
        },
        "ranks": {
            "type": "object",
            "additionalProperties": {"type": "integer"},
            "minProperties": 1,
        },
        "errors": {
            "type": "object",
            "additionalProperties": {"type": "number"},
            "minProperties": 1,
        },
        "krylov": {
            "type": "object",
            "required": ["iterations", "residuals"],
            "additionalProperties": False,
            "properties": {
                "iterations": {"type": "integer"},
                "residuals": {"type": "array", "items": {"type": "number"}},
            },
        },
    },
}
