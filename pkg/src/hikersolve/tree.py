"""Balanced binary partition of a point set.

The tree recursively median-splits along the direction of maximal spread
(dominant eigenvector of the centered second-moment matrix, found with a
few seeded power-method steps). Splitting is cut off at the first level
where every node fits in the leaf size, so the tree is complete: all
leaves sit at one depth, every level's node ranges partition [0, n), and
sibling sizes differ by at most one. Points are physically permuted into
tree order once at build time; all downstream indices refer to positions
in the permuted arrays, and ``perm``/``inv_perm`` translate to and from
input order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import PointSet

_POWER_STEPS = 10


@dataclass(frozen=True)
class TreeNode:
    index: int
    level: int
    begin: int
    end: int
    left: int | None = None   # child node indices; None for leaves
    right: int | None = None
    split_direction: np.ndarray | None = None
    split_value: float | None = None

    @property
    def is_leaf(self):
        return self.left is None

    @property
    def size(self):
        return self.end - self.begin


@dataclass(frozen=True)
class PartitionTree:
    points: PointSet          # permuted copy, tree order
    perm: np.ndarray          # perm[tree_pos] = input index
    inv_perm: np.ndarray      # inv_perm[input index] = tree_pos
    nodes: list[TreeNode] = field(repr=False)
    leaf_size: int
    depth: int

    @property
    def n(self):
        return self.points.n

    @property
    def root(self):
        return self.nodes[0]

    def children(self, node):
        return self.nodes[node.left], self.nodes[node.right]

    def leaves(self):
        first = (1 << self.depth) - 1
        return self.nodes[first:]


def _split_direction(coords, rng):
    """Dominant direction of the centered coordinates' second moment."""
    d = coords.shape[1]
    if d == 1:
        return np.ones(1)
    centered = coords - coords.mean(axis=0)
    v = rng.standard_normal(d)
    v /= np.linalg.norm(v)
    for _ in range(_POWER_STEPS):
        w = centered.T @ (centered @ v)
        norm = np.linalg.norm(w)
        if norm == 0.0:  # all points coincide; any direction works
            break
        v = w / norm
    return v


def build_tree(ps, leaf_size, seed=0):
    """Build the balanced spatial partition.

    Parameters
    ----------
    ps : PointSet
    leaf_size : maximum points per leaf, >= 2
    seed : drives the power-method starting vectors (per-node streams, so
        the result is independent of construction order)
    """
    if leaf_size < 2:
        raise ValueError("leaf_size must be >= 2")
    n = ps.n
    depth = 0
    while -(n // -(1 << depth)) > leaf_size:  # ceil(n / 2^depth)
        depth += 1

    coords = ps.coords.copy()
    order = np.arange(n)
    num_nodes = (1 << (depth + 1)) - 1
    nodes: list[TreeNode | None] = [None] * num_nodes

    def build(index, level, begin, end):
        if level == depth:
            nodes[index] = TreeNode(index, level, begin, end)
            return
        block = coords[begin:end]
        rng = np.random.default_rng([seed, level, begin])
        direction = _split_direction(block, rng)
        proj = block @ direction
        half = (end - begin + 1) // 2  # left child takes ceil(size / 2)
        local = np.argsort(proj, kind="stable")
        coords[begin:end] = block[local]
        order[begin:end] = order[begin:end][local]
        cut = begin + half
        nodes[index] = TreeNode(
            index, level, begin, end,
            left=2 * index + 1, right=2 * index + 2,
            split_direction=direction,
            split_value=float(proj[local[half - 1]]),
        )
        build(2 * index + 1, level + 1, begin, cut)
        build(2 * index + 2, level + 1, cut, end)

    build(0, 0, 0, n)

    inv = np.empty(n, dtype=np.int64)
    inv[order] = np.arange(n)
    for arr in (order, inv):
        arr.flags.writeable = False
    return PartitionTree(
        points=PointSet(coords),
        perm=order,
        inv_perm=inv,
        nodes=nodes,
        leaf_size=leaf_size,
        depth=depth,
    )


def levels(tree, bottom_up=True):
    """Iterate over levels; each yields that level's nodes ordered by range.

    bottom_up=True yields the leaf level first. Nodes within one level are
    mutually independent for parallel passes.
    """
    ks = range(tree.depth, -1, -1) if bottom_up else range(tree.depth + 1)
    for k in ks:
        first = (1 << k) - 1
        yield tree.nodes[first: 2 * first + 1]


KNN_MAX_POINTS = 65536
_KNN_CHUNK = 256


def knn_bruteforce(ps, k):
    """Exact k nearest neighbors per point (Euclidean, self excluded).

    Ties are broken toward the lower point index. Quadratic work, guarded
    to n <= 65536.
    """
    n = ps.n
    if n > KNN_MAX_POINTS:
        raise ValueError(f"knn_bruteforce is limited to n <= {KNN_MAX_POINTS}")
    if not 1 <= k <= n - 1:
        raise ValueError("need 1 <= k <= n - 1")
    coords = ps.coords
    sq_norms = np.einsum("ij,ij->i", coords, coords)
    out = np.empty((n, k), dtype=np.int64)
    for lo in range(0, n, _KNN_CHUNK):
        hi = min(lo + _KNN_CHUNK, n)
        d2 = sq_norms[lo:hi, None] + sq_norms[None, :] - 2.0 * (coords[lo:hi] @ coords.T)
        d2[np.arange(hi - lo), np.arange(lo, hi)] = np.inf  # exclude self
        kth = np.partition(d2, k - 1, axis=1)[:, k - 1]
        for row in range(hi - lo):
            # everything at or under the k-th smallest distance, then order
            # by (distance, index): lexsort's last key is primary
            cand = np.flatnonzero(d2[row] <= kth[row])
            cand = cand[np.lexsort((cand, d2[row, cand]))]
            out[lo + row] = cand[:k]
    return out
