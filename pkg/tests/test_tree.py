import numpy as np
import pytest

import hikersolve as hk
from hikersolve.data import PointSet
from hikersolve.tree import build_tree, knn_bruteforce, levels

from helpers import quadratic_knn_oracle


def check_structure(tree, n, m):
    assert sorted(tree.perm) == list(range(n))
    assert np.array_equal(tree.perm[tree.inv_perm], np.arange(n))
    for node in tree.nodes:
        assert node.size >= 1
        if not node.is_leaf:
            left, right = tree.children(node)
            assert (left.begin, right.end) == (node.begin, node.end)
            assert left.end == right.begin
            assert abs(left.size - right.size) <= 1
    for leaf in tree.leaves():
        assert leaf.size <= m
        if n >= m:
            assert leaf.size >= -(m // -2)  # ceil(m/2)
    # every level's ranges partition [0, n)
    for level_nodes in levels(tree, bottom_up=False):
        spans = [(nd.begin, nd.end) for nd in level_nodes]
        assert spans[0][0] == 0 and spans[-1][1] == n
        for (b0, e0), (b1, e1) in zip(spans, spans[1:]):
            assert e0 == b1


def test_collinear_split():
    t = np.linspace(0, 1, 8)
    coords = np.column_stack([t, 2 * t])
    tree = build_tree(PointSet(coords), 2, seed=0)
    assert len(tree.leaves()) == 4
    assert all(leaf.size == 2 for leaf in tree.leaves())
    line = np.array([1.0, 2.0]) / np.sqrt(5.0)
    cos = abs(tree.root.split_direction @ line)
    assert cos >= 0.999


def test_single_leaf():
    ps = hk.generate("uniform_cube", 5, seed=1, d=2)
    tree = build_tree(ps, 8, seed=0)
    assert tree.depth == 0
    assert len(tree.nodes) == 1
    check_structure(tree, 5, 8)


def test_two_clusters_separated():
    rng = np.random.default_rng(3)
    a = rng.normal(0.0, 0.1, (16, 2))
    b = rng.normal(50.0, 0.1, (16, 2))
    coords = np.vstack([a, b])
    labels = np.array([0] * 16 + [1] * 16)
    tree = build_tree(PointSet(coords), 8, seed=2)
    left, right = tree.children(tree.root)
    got_left = labels[tree.perm[left.begin:left.end]]
    got_right = labels[tree.perm[right.begin:right.end]]
    assert len(set(got_left)) == 1 and len(set(got_right)) == 1
    assert set(got_left) != set(got_right)


@pytest.mark.parametrize("n,m,seed", [
    (17, 4, 0), (64, 8, 1), (100, 7, 2), (1000, 32, 3), (3, 2, 4), (257, 16, 5),
])
def test_structure_random(n, m, seed):
    ps = hk.generate("uniform_cube", n, seed=seed, d=3)
    tree = build_tree(ps, m, seed=seed)
    check_structure(tree, n, m)
    # physical permutation: permuted coords match perm applied to input
    assert np.array_equal(tree.points.coords, ps.coords[tree.perm])


def test_levels_orders():
    ps = hk.generate("uniform_cube", 64, seed=6, d=2)
    tree = build_tree(ps, 16, seed=0)
    sizes_up = [len(lv) for lv in levels(tree, bottom_up=True)]
    assert sizes_up == [4, 2, 1]
    sizes_down = [len(lv) for lv in levels(tree, bottom_up=False)]
    assert sizes_down == [1, 2, 4]
    for level_nodes in levels(tree):
        begins = [nd.begin for nd in level_nodes]
        assert begins == sorted(begins)


def test_determinism():
    ps = hk.generate("uniform_cube", 200, seed=7, d=3)
    t1 = build_tree(ps, 16, seed=9)
    t2 = build_tree(ps, 16, seed=9)
    assert np.array_equal(t1.perm, t2.perm)
    assert np.array_equal(t1.points.coords, t2.points.coords)


def test_leaf_size_validation():
    ps = hk.generate("uniform_cube", 10, seed=0, d=2)
    with pytest.raises(ValueError):
        build_tree(ps, 1)


class TestKnn:
    def test_collinear_middle(self):
        coords = np.array([[0.0], [1.0], [2.0]])
        nbrs = knn_bruteforce(PointSet(coords), 1)
        assert nbrs[0, 0] == 1 and nbrs[2, 0] == 1

    def test_full_k(self):
        ps = hk.generate("uniform_cube", 9, seed=8, d=2)
        nbrs = knn_bruteforce(ps, 8)
        for i in range(9):
            assert sorted(nbrs[i]) == sorted(set(range(9)) - {i})

    def test_matches_quadratic_oracle(self):
        ps = hk.generate("uniform_cube", 200, seed=12, d=3)
        got = knn_bruteforce(ps, 5)
        expect = quadratic_knn_oracle(ps.coords, 5)
        assert np.array_equal(got, expect)

    def test_tie_breaks_lower_index(self):
        # four corners of a square: both horizontal and vertical
        # neighbors are equidistant
        coords = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        nbrs = knn_bruteforce(PointSet(coords), 2)
        assert list(nbrs[3]) == [1, 2]
        assert list(nbrs[0]) == [1, 2]

    def test_guards(self):
        ps = hk.generate("uniform_cube", 10, seed=0, d=2)
        with pytest.raises(ValueError):
            knn_bruteforce(ps, 0)
        with pytest.raises(ValueError):
            knn_bruteforce(ps, 10)
        big = PointSet(np.zeros((65537, 1)) + np.arange(65537)[:, None])
        with pytest.raises(ValueError, match="65536"):
            knn_bruteforce(big, 1)
