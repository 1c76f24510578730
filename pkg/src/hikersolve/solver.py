"""Exact factorization of the compressed operator and near-linear solves.

The compressed matrix telescopes: at every internal node it is the block
diagonal of its children plus a low-rank sibling coupling carried by the
children's interpolation operators. Inverting that sum uses the
Woodbury-style identity

    (D + U B V^T)^{-1} b = D^{-1} b - D^{-1} U  B Z^{-1}  (V^T D^{-1} b),
    Z = I + (V^T D^{-1} U) B,

which needs no inverse of B (whose diagonal blocks are zero and which may
itself be singular); only the small reduced matrix Z must be invertible.
The recursion never re-descends the tree inside a parent solve: each node
precomputes the skeleton-space projection of its own inverse (theta), the
inverse applied to its basis (phi at leaves), and a child-push matrix that
maps the parent's skeleton-space correction into the children's. A full
derivation is in docs/factorization.md.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack

from .linalg import DenseFactor, SingularMatrixError, factor_dense, solve_dense
from .tree import levels


class FactorizationError(RuntimeError):
    """Reduced system singular; remedy is a larger lambda or tighter tau."""


@dataclass(frozen=True)
class NodeFactor:
    """Per-node factors; which fields are set depends on the node kind.

    Leaves carry the dense LU of the regularized diagonal block, phi (the
    inverse applied to the interpolation basis) and theta (the skeleton
    projection of the inverse). Internal nodes carry the LU of the reduced
    matrix Z, theta, and the child-push matrix; the root keeps only its Z
    factor.
    """

    diag_lu: DenseFactor | None = None
    phi: np.ndarray | None = None
    theta: np.ndarray | None = None
    z_lu: DenseFactor | None = None
    child_push: np.ndarray | None = None
    z_cond: float = 0.0


@dataclass(frozen=True)
class Factorization:
    tree: object
    skeletons: object
    lam: float
    factors: dict[int, NodeFactor] = field(repr=False)
    couplings: dict[int, np.ndarray] = field(repr=False)
    level_seconds: dict[int, float] = field(default_factory=dict)
    max_rank: int = 0

    @property
    def n(self):
        return self.tree.n

    def solve(self, b, in_tree_order=False):
        return solve(self, b, in_tree_order=in_tree_order)

    def z_cond_per_level(self):
        out = {}
        for level_nodes in levels(self.tree, bottom_up=False):
            conds = [
                self.factors[nd.index].z_cond
                for nd in level_nodes
                if not nd.is_leaf
            ]
            if conds:
                out[level_nodes[0].level] = max(conds)
        return out


def _apply_coupling(coup, v):
    """B @ v for B = [[0, coup], [coup.T, 0]] without forming B."""
    rl = coup.shape[0]
    return np.concatenate([coup @ v[rl:], coup.T @ v[:rl]], axis=0)


def _factor_z(z, node):
    """LU of the reduced matrix with a condition estimate attached."""
    if z.shape[0] == 0:
        return factor_dense(z), 1.0
    anorm = np.linalg.norm(z, 1)
    try:
        z_lu = factor_dense(z)
    except SingularMatrixError as exc:
        smallest = float(np.min(np.abs(np.diag(z)))) if z.size else 0.0
        raise FactorizationError(
            f"reduced system singular at node {node.index} (level {node.level});"
            f" smallest pivot 0 (smallest |Z| diagonal {smallest:.3e});"
            " increase lambda or tighten tau"
        ) from exc
    rcond, info = lapack.dgecon(z_lu.lu, anorm)
    cond = float(1.0 / rcond) if info == 0 and rcond > 0 else np.inf
    return z_lu, cond


def factorize(op, lam, threads=1):
    """Factor Ktilde + lam*I bottom-up, one level at a time.

    Leaves LU-factor their dense regularized blocks and project the
    inverse onto the skeleton basis; internal nodes assemble the reduced
    matrix Z from the children's projections and the sibling coupling,
    factor it, and fold the result into their own projection. Nodes within
    a level are independent and can be processed by a thread pool.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    tree = op.tree
    skeletons = op.skeletons
    factors: dict[int, NodeFactor] = {}
    level_seconds: dict[int, float] = {}
    max_rank = 0

    def process_leaf(node):
        block = op.leaf_blocks[node.index]
        a = block + lam * np.eye(block.shape[0])
        diag_lu = factor_dense(a)
        if node.level == 0:
            return NodeFactor(diag_lu=diag_lu)
        interp = skeletons[node.index].interp
        phi = solve_dense(diag_lu, interp.T)
        theta = interp @ phi
        return NodeFactor(diag_lu=diag_lu, phi=phi, theta=theta)

    def process_internal(node):
        left, right = tree.children(node)
        th_l = factors[left.index].theta
        th_r = factors[right.index].theta
        rl, rr = th_l.shape[0], th_r.shape[0]
        coup = op.couplings[node.index]
        z = np.eye(rl + rr)
        z[:rl, rl:] += th_l @ coup
        z[rl:, :rl] += th_r @ coup.T
        z_lu, z_cond = _factor_z(z, node)
        if node.level == 0:
            return NodeFactor(z_lu=z_lu, z_cond=z_cond)
        theta_hat = np.zeros((rl + rr, rl + rr))
        theta_hat[:rl, :rl] = th_l
        theta_hat[rl:, rl:] = th_r
        interp = skeletons[node.index].interp
        # folded = B Z^{-1} theta_hat, reused for both theta and the push
        folded = _apply_coupling(coup, solve_dense(z_lu, theta_hat))
        theta = interp @ (theta_hat - theta_hat @ folded) @ interp.T
        child_push = interp.T - folded @ interp.T
        return NodeFactor(
            z_lu=z_lu, theta=theta, child_push=child_push, z_cond=z_cond
        )

    for level_nodes in levels(tree, bottom_up=True):
        t0 = time.perf_counter()
        leaf_level = level_nodes[0].is_leaf
        work = process_leaf if leaf_level else process_internal
        if threads > 1 and len(level_nodes) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(work, level_nodes))
        else:
            results = [work(nd) for nd in level_nodes]
        for node, factor in zip(level_nodes, results):
            factors[node.index] = factor
            if factor.theta is not None:
                max_rank = max(max_rank, factor.theta.shape[0])
        level_seconds[level_nodes[0].level] = time.perf_counter() - t0

    return Factorization(
        tree=tree,
        skeletons=skeletons,
        lam=lam,
        factors=factors,
        couplings=op.couplings,
        level_seconds=level_seconds,
        max_rank=max_rank,
    )


def solve(f, b, in_tree_order=False):
    """x with (Ktilde + lam*I) x = b, exact up to roundoff.

    Upward pass: per-leaf dense solves plus skeleton projections of the
    right-hand side; per internal node the reduced-system solve produces
    the coupling weights g. Downward pass: starting from the root's g,
    each node maps its incoming skeleton correction (plus its own g) into
    its children, and leaves subtract phi times their correction from the
    leaf solve. With in_tree_order=False, b is taken in input order and x
    is returned in input order.
    """
    tree = f.tree
    n = tree.n
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (n,):
        raise ValueError(f"right-hand side must have length {n}")
    bt = b if in_tree_order else b[tree.perm]

    leaf_solve: dict[int, np.ndarray] = {}
    psi: dict[int, np.ndarray] = {}
    g: dict[int, np.ndarray] = {}
    for level_nodes in levels(tree, bottom_up=True):
        for node in level_nodes:
            factor = f.factors[node.index]
            if node.is_leaf:
                bl = bt[node.begin:node.end]
                leaf_solve[node.index] = solve_dense(factor.diag_lu, bl)
                if node.level > 0:
                    psi[node.index] = factor.phi.T @ bl
            else:
                left, right = tree.children(node)
                psi_hat = np.concatenate([psi[left.index], psi[right.index]])
                coup = f.couplings[node.index]
                g[node.index] = _apply_coupling(
                    coup, solve_dense(factor.z_lu, psi_hat)
                )
                if node.level > 0:
                    rl = psi[left.index].shape[0]
                    th_g = np.concatenate([
                        f.factors[left.index].theta @ g[node.index][:rl],
                        f.factors[right.index].theta @ g[node.index][rl:],
                    ])
                    psi[node.index] = f.skeletons[node.index].interp @ (
                        psi_hat - th_g
                    )

    x = np.empty(n)
    corr: dict[int, np.ndarray] = {}
    for level_nodes in levels(tree, bottom_up=False):
        for node in level_nodes:
            if node.is_leaf:
                xl = leaf_solve[node.index]
                c = corr.get(node.index)
                if c is not None and c.size:
                    xl = xl - f.factors[node.index].phi @ c
                x[node.begin:node.end] = xl
            else:
                t = g[node.index]
                c = corr.get(node.index)
                if c is not None and c.size:
                    t = t + f.factors[node.index].child_push @ c
                left, right = tree.children(node)
                rl = psi[left.index].shape[0]
                corr[left.index] = t[:rl]
                corr[right.index] = t[rl:]

    if in_tree_order:
        return x
    out = np.empty(n)
    out[tree.perm] = x
    return out


def solve_multi(f, b, in_tree_order=False):
    """Column-wise solves for an (n, k) block of right-hand sides."""
    b = np.asarray(b, dtype=np.float64)
    if b.ndim != 2:
        raise ValueError("expected an (n, k) right-hand side block")
    out = np.empty_like(b)
    for j in range(b.shape[1]):
        out[:, j] = solve(f, b[:, j], in_tree_order=in_tree_order)
    return out
