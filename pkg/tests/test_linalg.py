import numpy as np
import pytest

from hikersolve.linalg import (
    SingularMatrixError,
    factor_dense,
    interpolative_decomposition,
    pivoted_qr,
    solve_dense,
)

from helpers import decaying_spectrum_matrix, gauss_elim_solve


class TestPivotedQR:
    def test_identity(self):
        res = pivoted_qr(np.eye(3), 1e-12, 10)
        assert res.rank == 3
        assert np.allclose(np.abs(np.diag(res.r_factor)), 1.0)

    def test_rank_one(self):
        rng = np.random.default_rng(0)
        u = rng.standard_normal(5)
        v = rng.standard_normal(7)
        res = pivoted_qr(np.outer(u, v), 1e-10, 10)
        assert res.rank == 1

    def test_rank_matches_svd_oracle(self):
        # prescribed singular values 2^-j; expected rank = count of
        # sigma_j / sigma_0 > tol, verified against numpy's SVD
        rng = np.random.default_rng(1)
        a = decaying_spectrum_matrix(rng, 50, 80)
        tol = 1e-6
        sigma = np.linalg.svd(a, compute_uv=False)
        oracle_rank = int(np.sum(sigma / sigma[0] > tol))
        expected = int(np.sum(0.5 ** np.arange(50) > tol))
        assert oracle_rank == expected
        res = pivoted_qr(a, tol, 64)
        assert abs(res.rank - oracle_rank) <= 1

    def test_pivot_diagonal_monotone(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            m, n = rng.integers(2, 40, size=2)
            a = decaying_spectrum_matrix(rng, m, n, decay=rng.uniform(0.3, 0.9))
            res = pivoted_qr(a, 1e-14, 64)
            diag = np.abs(np.diag(res.r_factor[:, : res.rank]))
            assert np.all(np.diff(diag) <= 0.0)

    def test_empty_and_zero(self):
        res = pivoted_qr(np.zeros((0, 4)), 1e-8, 4)
        assert res.rank == 0 and res.r_factor.shape == (0, 4)
        res = pivoted_qr(np.zeros((3, 0)), 1e-8, 4)
        assert res.rank == 0
        res = pivoted_qr(np.zeros((5, 5)), 1e-8, 4)
        assert res.rank == 0

    def test_max_rank_cap(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((20, 20))
        assert pivoted_qr(a, 1e-15, 7).rank == 7

    def test_column_space_reproduced(self):
        rng = np.random.default_rng(4)
        a = decaying_spectrum_matrix(rng, 30, 25, decay=0.25)
        res = pivoted_qr(a, 1e-9, 30)
        # R rows reproduce the column space: residual of projecting A's
        # pivoted columns onto the factor is at tolerance level
        q, _ = np.linalg.qr(a[:, res.pivots[: res.rank]])
        resid = a - q @ (q.T @ a)
        assert np.linalg.norm(resid) <= 10 * 1e-9 * np.linalg.norm(a)

    def test_bad_args(self):
        with pytest.raises(ValueError):
            pivoted_qr(np.eye(2), -1.0, 3)
        with pytest.raises(ValueError):
            pivoted_qr(np.eye(2), 1e-8, 0)


class TestInterpolativeDecomposition:
    def test_duplicate_columns(self):
        rng = np.random.default_rng(5)
        c0 = rng.standard_normal(6)
        c2 = rng.standard_normal(6)
        a = np.column_stack([c0, c0, c2])
        cols, interp = interpolative_decomposition(a, 1e-12, 10)
        assert len(cols) == 2
        resid = a - a[:, cols] @ interp
        assert np.linalg.norm(resid) <= 1e-12 * np.linalg.norm(a)

    def test_rank_three_product(self):
        rng = np.random.default_rng(6)
        a = rng.standard_normal((40, 3)) @ rng.standard_normal((3, 60))
        cols, interp = interpolative_decomposition(a, 1e-10, 40)
        assert len(cols) == 3
        resid = np.linalg.norm(a - a[:, cols] @ interp)
        assert resid <= 1e-9 * np.linalg.norm(a)

    def test_zero_matrix(self):
        cols, interp = interpolative_decomposition(np.zeros((4, 6)), 1e-10, 4)
        assert cols.size == 0
        assert interp.shape == (0, 6)

    def test_identity_block_exact(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            m, n = rng.integers(3, 30, size=2)
            a = decaying_spectrum_matrix(rng, m, n, decay=rng.uniform(0.2, 0.8))
            cols, interp = interpolative_decomposition(a, 1e-8, 20)
            r = len(cols)
            assert np.array_equal(interp[:, cols], np.eye(r))

    def test_residual_bound(self):
        rng = np.random.default_rng(8)
        tol = 1e-6
        for _ in range(100):
            m = int(rng.integers(10, 50))
            n = int(rng.integers(10, 50))
            a = decaying_spectrum_matrix(rng, m, n, decay=0.4)
            cols, interp = interpolative_decomposition(a, tol, min(m, n))
            r = max(len(cols), 1)
            resid = np.linalg.norm(a - a[:, cols] @ interp)
            assert resid <= 10 * np.sqrt(n * r) * tol * np.linalg.norm(a)


class TestDenseFactor:
    def test_identity(self):
        rng = np.random.default_rng(9)
        b = rng.standard_normal((4, 3))
        assert np.allclose(solve_dense(factor_dense(np.eye(4)), b), b)

    def test_diagonal(self):
        x = solve_dense(factor_dense(np.diag([2.0, 2.0, 2.0])),
                        np.array([2.0, 4.0, 6.0]))
        assert np.allclose(x, [1.0, 2.0, 3.0])

    def test_vs_elimination_oracle(self):
        rng = np.random.default_rng(10)
        m = rng.standard_normal((8, 8))
        a = m.T @ m + np.eye(8)
        b = rng.standard_normal(8)
        x = solve_dense(factor_dense(a), b)
        x_oracle = gauss_elim_solve(a, b)
        assert np.linalg.norm(x - x_oracle) <= 1e-10 * np.linalg.norm(x_oracle)

    def test_round_trip_conditioned(self):
        # condition number 1e6 by construction
        rng = np.random.default_rng(11)
        u, _ = np.linalg.qr(rng.standard_normal((12, 12)))
        v, _ = np.linalg.qr(rng.standard_normal((12, 12)))
        a = (u * np.logspace(0, -6, 12)) @ v.T
        x = rng.standard_normal(12)
        got = solve_dense(factor_dense(a), a @ x)
        assert np.linalg.norm(got - x) <= 1e-9 * np.linalg.norm(x)

    def test_singular_raises_with_step(self):
        with pytest.raises(SingularMatrixError, match="step"):
            factor_dense(np.array([[1.0, 2.0], [2.0, 4.0]]))
        with pytest.raises(SingularMatrixError):
            factor_dense(np.zeros((3, 3)))

    def test_plu_reconstruction(self):
        rng = np.random.default_rng(12)
        a = rng.standard_normal((9, 9))
        f = factor_dense(a)
        lower = np.tril(f.lu, -1) + np.eye(9)
        upper = np.triu(f.lu)
        perm = np.arange(9)
        for i, p in enumerate(f.piv):
            perm[[i, p]] = perm[[p, i]]
        pmat = np.zeros((9, 9))
        pmat[perm, np.arange(9)] = 1.0
        assert (
            np.linalg.norm(pmat @ lower @ upper - a)
            <= 1e-12 * np.linalg.norm(a)
        )

    def test_shape_errors(self):
        with pytest.raises(ValueError):
            factor_dense(np.zeros((2, 3)))
        f = factor_dense(np.eye(3))
        with pytest.raises(ValueError):
            solve_dense(f, np.zeros(4))

    def test_empty(self):
        f = factor_dense(np.zeros((0, 0)))
        assert solve_dense(f, np.zeros(0)).shape == (0,)
