"""Fast matrix-vector products with the compressed kernel operator.

The operator is the implicitly-defined matrix Ktilde: exact dense blocks
on the leaf diagonal, and for every internal node a sibling cross-coupling
evaluated only between the children's skeleton points. A matvec is an
upward sweep turning the input into per-node skeleton weights, the small
coupling products, and a downward sweep that pushes skeleton-space results
back to points through the transposed interpolation operators, which are
never materialized. The same Ktilde is what the direct solver factorizes,
so solve(factorize(op), matvec(op, w)) is an identity up to roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernels import eval_block
from .tree import levels

MATERIALIZE_MAX_POINTS = 4096


@dataclass(frozen=True)
class HierarchicalOperator:
    tree: object
    skeletons: object
    kernel: object
    leaf_blocks: dict[int, np.ndarray] = field(repr=False)
    couplings: dict[int, np.ndarray] = field(repr=False)

    @property
    def n(self):
        return self.tree.n

    def matvec(self, w, lam):
        return hmatvec(self, w, lam)


def build_operator(tree, skeletons, kernel):
    """Evaluate and cache the leaf diagonal blocks and sibling couplings."""
    coords = tree.points.coords
    leaf_blocks = {}
    for leaf in tree.leaves():
        pts = coords[leaf.begin:leaf.end]
        leaf_blocks[leaf.index] = eval_block(kernel, pts, pts)
    couplings = {}
    for node in tree.nodes:
        if node.is_leaf:
            continue
        left, right = tree.children(node)
        ql = skeletons[left.index].indices
        qr = skeletons[right.index].indices
        couplings[node.index] = eval_block(kernel, coords[ql], coords[qr])
    return HierarchicalOperator(
        tree=tree,
        skeletons=skeletons,
        kernel=kernel,
        leaf_blocks=leaf_blocks,
        couplings=couplings,
    )


def upward_pass(op, w):
    """Skeleton weights for every non-root node, leaves first.

    Leaf: interp @ w restricted to the leaf; internal: interp applied to
    the concatenated child weights.
    """
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (op.n,):
        raise ValueError(f"weight vector must have length {op.n}")
    tree = op.tree
    weights: dict[int, np.ndarray] = {}
    for level_nodes in levels(tree, bottom_up=True):
        for node in level_nodes:
            if node.level == 0:
                continue
            skel = op.skeletons[node.index]
            if node.is_leaf:
                weights[node.index] = skel.interp @ w[node.begin:node.end]
            else:
                left, right = tree.children(node)
                stacked = np.concatenate(
                    [weights[left.index], weights[right.index]]
                )
                weights[node.index] = skel.interp @ stacked
    return weights


def hmatvec(op, w, lam):
    """u = (Ktilde + lam*I) @ w, with w and u in tree order."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (op.n,):
        raise ValueError(f"weight vector must have length {op.n}")
    tree = op.tree
    u = np.empty(op.n)
    for leaf in tree.leaves():
        wl = w[leaf.begin:leaf.end]
        u[leaf.begin:leaf.end] = op.leaf_blocks[leaf.index] @ wl + lam * wl
    if tree.depth == 0:
        return u

    weights = upward_pass(op, w)
    # downward: skeleton-space accumulators, pushed through interp.T one
    # level at a time so the telescoped operators stay implicit
    acc: dict[int, np.ndarray] = {}
    for level_nodes in levels(tree, bottom_up=False):
        for node in level_nodes:
            if node.is_leaf:
                continue
            left, right = tree.children(node)
            coup = op.couplings[node.index]
            to_left = coup @ weights[right.index]
            to_right = coup.T @ weights[left.index]
            if node.index in acc:
                pushed = op.skeletons[node.index].interp.T @ acc[node.index]
                rl = to_left.shape[0]
                to_left = to_left + pushed[:rl]
                to_right = to_right + pushed[rl:]
            acc[left.index] = to_left
            acc[right.index] = to_right
    for leaf in tree.leaves():
        down = acc.get(leaf.index)
        if down is not None and down.size:
            u[leaf.begin:leaf.end] += op.skeletons[leaf.index].interp.T @ down
    return u


def materialize_ktilde(op, lam):
    """Explicit dense Ktilde + lam*I, column by column (diagnostic only)."""
    n = op.n
    if n > MATERIALIZE_MAX_POINTS:
        raise ValueError(
            f"materialize_ktilde is limited to n <= {MATERIALIZE_MAX_POINTS}"
        )
    out = np.empty((n, n))
    e = np.zeros(n)
    for i in range(n):
        e[i] = 1.0
        out[:, i] = hmatvec(op, e, lam)
        e[i] = 0.0
    return out
