"""Bottom-up nested skeletonization of the partition tree.

Every non-root node gets a skeleton: a subset of point indices plus an
interpolation matrix reproducing the node's interactions with the rest of
the point set. Leaf candidates are the node's own points; internal-node
candidates are only the union of the children's skeleton points, which is
what makes the construction nested (an internal skeleton is always a
subset of its children's) and keeps the total work near-linear. Rows are
sampled from the node's complement; ``exact`` mode uses the entire
complement and is the reference configuration for accuracy tests.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .kernels import eval_block
from .linalg import interpolative_decomposition
from .tree import levels

SAMPLE_MODES = ("uniform", "knn_augmented", "exact")


@dataclass(frozen=True)
class Skeleton:
    node: int
    indices: np.ndarray  # global (tree-order) skeleton point indices
    interp: np.ndarray   # (rank, candidates) interpolation matrix

    @property
    def rank(self):
        return self.indices.shape[0]


@dataclass(frozen=True)
class SkeletonConfig:
    tau: float = 1e-5
    max_rank: int = 64
    samples: int = 256
    sample_mode: str = "uniform"
    seed: int = 0

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.max_rank < 1:
            raise ValueError("max_rank must be >= 1")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.sample_mode not in SAMPLE_MODES:
            raise ValueError(f"unknown sample mode {self.sample_mode!r}")


@dataclass(frozen=True)
class SkeletonSet:
    skeletons: dict[int, Skeleton] = field(repr=False)
    config: SkeletonConfig = SkeletonConfig()

    def __getitem__(self, node_index):
        return self.skeletons[node_index]

    def __len__(self):
        return len(self.skeletons)

    def __contains__(self, node_index):
        return node_index in self.skeletons

    def max_rank_per_level(self, tree):
        out = {}
        for level_nodes in levels(tree, bottom_up=False):
            ranks = [
                self.skeletons[nd.index].rank
                for nd in level_nodes
                if nd.index in self.skeletons
            ]
            if ranks:
                out[level_nodes[0].level] = max(ranks)
        return out


def sample_rows(tree, node, ell, mode, seed, knn=None):
    """Row indices for skeletonizing ``node``: points outside the node.

    uniform draws ell complement indices without replacement;
    knn_augmented takes the node points' precomputed neighbors that land
    outside the node and tops up uniformly to ell; exact returns the whole
    complement. Deterministic per (seed, node). ell is clamped to the
    complement size.
    """
    if ell < 1:
        raise ValueError("ell must be >= 1")
    n = tree.n
    begin, end = node.begin, node.end
    size = end - begin
    comp_size = n - size
    if comp_size == 0:
        raise ValueError("node covers the whole point set; no rows to sample")

    if mode == "exact":
        return np.concatenate([np.arange(begin), np.arange(end, n)])

    ell = min(ell, comp_size)
    rng = np.random.default_rng([int(seed), 3, int(node.index)])
    if mode == "uniform":
        draw = rng.choice(comp_size, size=ell, replace=False)
        draw[draw >= begin] += size
        return np.sort(draw)
    if mode == "knn_augmented":
        if knn is None:
            raise ValueError("knn_augmented sampling needs precomputed kNN lists")
        nbrs = np.unique(knn[begin:end].ravel())
        base = nbrs[(nbrs < begin) | (nbrs >= end)]
        if base.size >= ell:
            return base
        comp = np.concatenate([np.arange(begin), np.arange(end, n)])
        rest = np.setdiff1d(comp, base, assume_unique=True)
        extra = rng.choice(rest.size, size=ell - base.size, replace=False)
        return np.sort(np.concatenate([base, rest[extra]]))
    raise ValueError(f"unknown sample mode {mode!r}")


def skeletonize_node(tree, kernel, node, rows, tau, max_rank, children=None):
    """Skeletonize one node against the given sample rows.

    children holds the two child Skeletons for internal nodes (their
    skeleton points are the only candidate columns); leaves use their own
    points. A numerically zero block yields a legal rank-0 skeleton.
    """
    if node.is_leaf:
        candidates = np.arange(node.begin, node.end)
    else:
        left, right = children
        candidates = np.concatenate([left.indices, right.indices])
    coords = tree.points.coords
    block = eval_block(kernel, coords[rows], coords[candidates])
    cols, interp = interpolative_decomposition(block, tau, max_rank)
    return Skeleton(node=node.index, indices=candidates[cols], interp=interp)


def build_skeletons(tree, kernel, config=None, knn=None, threads=1):
    """Skeletonize every non-root node, leaves first.

    Nodes within a level are independent; with threads > 1 they are
    processed by a thread pool (results are identical either way since
    each node's random stream is keyed by its index).
    """
    config = config or SkeletonConfig()
    if config.sample_mode == "knn_augmented" and knn is None:
        raise ValueError("knn_augmented sampling needs precomputed kNN lists")
    skeletons: dict[int, Skeleton] = {}

    def process(node):
        rows = sample_rows(
            tree, node, config.samples, config.sample_mode, config.seed, knn=knn
        )
        kids = None if node.is_leaf else tuple(
            skeletons[c.index] for c in tree.children(node)
        )
        try:
            return skeletonize_node(
                tree, kernel, node, rows, config.tau, config.max_rank, children=kids
            )
        except Exception as exc:
            raise RuntimeError(
                f"skeletonization failed at node {node.index} (level {node.level})"
            ) from exc

    for level_nodes in levels(tree, bottom_up=True):
        work = [nd for nd in level_nodes if nd.level > 0]
        if not work:
            continue
        if threads > 1 and len(work) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(process, work))
        else:
            results = [process(nd) for nd in work]
        for skel in results:
            skeletons[skel.node] = skel
    return SkeletonSet(skeletons=skeletons, config=config)
