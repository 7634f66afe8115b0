import math

import numpy as np
import pytest

from ctkkt.core.exceptions import AsymmetricMatrixError, DimensionError
from ctkkt.core.numkern import (
    gram_det,
    inverse_norm_bound,
    max_eig_sym,
    min_norm_lsq,
    nullspace_basis,
    numerical_rank,
    project_sym,
)


def test_gram_det_matches_dense_determinant():
    rng = np.random.default_rng(1)
    for _ in range(50):
        r = int(rng.integers(1, 5))
        M = rng.standard_normal((r, r + int(rng.integers(0, 3))))
        report = gram_det(M)
        assert report.det == pytest.approx(np.linalg.det(M @ M.T), rel=1e-9)
        assert report.full_row_rank


def test_gram_det_edge_shapes():
    empty = gram_det(np.zeros((0, 3)))
    assert empty.det == 1.0 and empty.rank == 0
    with pytest.raises(DimensionError):
        gram_det(np.ones((3, 2)))


def test_gram_det_detects_rank_deficiency():
    M = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]])
    report = gram_det(M)
    assert report.rank == 1
    assert not report.full_row_rank
    assert report.det <= 1e-20


def test_gram_det_large_rows_in_log_space():
    M = np.hstack([0.5 * np.eye(30), np.zeros((30, 2))])
    report = gram_det(M)
    assert report.log_det == pytest.approx(60 * math.log(0.5))
    assert report.det == pytest.approx(0.25 ** 30)


def test_inverse_norm_bound():
    assert inverse_norm_bound(2.0, 3.0, 1) == 0.5
    assert inverse_norm_bound(2.0, 3.0, 3) == 4.5
    with pytest.raises(ValueError):
        inverse_norm_bound(0.0, 1.0, 2)


def test_min_norm_lsq_underdetermined():
    M = np.array([[1.0, 1.0]])
    x = min_norm_lsq(M, np.array([2.0]))
    np.testing.assert_allclose(x, [1.0, 1.0])


def test_min_norm_lsq_rank_deficient():
    M = np.array([[1.0, 0.0], [1.0, 0.0]])
    x = min_norm_lsq(M, np.array([1.0, 1.0]))
    np.testing.assert_allclose(x, [1.0, 0.0])
    assert min_norm_lsq(np.zeros((0, 3)), np.zeros(0)).shape == (3,)


def test_nullspace_basis():
    B = nullspace_basis(np.array([[1.0, -1.0, 0.0]]))
    assert B.shape == (3, 2)
    np.testing.assert_allclose(B.T @ B, np.eye(2), atol=1e-12)
    np.testing.assert_allclose(np.array([[1.0, -1.0, 0.0]]) @ B, 0.0, atol=1e-12)
    assert nullspace_basis(np.eye(2)).shape == (2, 0)
    np.testing.assert_array_equal(nullspace_basis(np.zeros((0, 2))), np.eye(2))


def test_numerical_rank():
    assert numerical_rank(np.array([[1.0, 2.0], [2.0, 4.0]])) == 1
    assert numerical_rank(np.zeros((0, 2))) == 0


def test_max_eig_sym():
    assert max_eig_sym(np.diag([-2.0, 1.0])) == pytest.approx(1.0)
    assert max_eig_sym(np.zeros((0, 0))) == -math.inf
    with pytest.raises(AsymmetricMatrixError):
        max_eig_sym(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_project_sym():
    S = np.diag([-2.0, -2.0])
    B = np.array([[1.0], [1.0]]) / math.sqrt(2.0)
    assert project_sym(S, B)[0, 0] == pytest.approx(-2.0)


def test_min_norm_lsq_matches_normal_equations_on_random_full_rank():
    rng = np.random.default_rng(21)
    checked = 0
    while checked < 500:
        r = int(rng.integers(1, 6))
        c = int(rng.integers(r, 9))
        M = rng.standard_normal((r, c))
        if np.linalg.cond(M) > 1e4:
            continue
        b = rng.standard_normal(r)
        x = min_norm_lsq(M, b)
        dense = M.T @ np.linalg.solve(M @ M.T, b)
        assert np.linalg.norm(x - dense) <= 1e-9 * (1.0 + np.linalg.norm(dense))
        assert np.linalg.norm(M @ x - b) <= 1e-9 * (1.0 + np.linalg.norm(b))
        checked += 1


def test_nullspace_basis_on_random_matrices():
    rng = np.random.default_rng(22)
    for _ in range(300):
        c = int(rng.integers(1, 8))
        r = int(rng.integers(1, 8))
        k = int(rng.integers(1, min(r, c) + 1))
        # rank k by construction
        M = rng.standard_normal((r, k)) @ rng.standard_normal((k, c))
        B = nullspace_basis(M)
        assert B.shape == (c, c - numerical_rank(M))
        if B.shape[1]:
            assert np.linalg.norm(B.T @ B - np.eye(B.shape[1])) <= 1e-12 * c
            assert np.linalg.norm(M @ B) <= 1e-10 * (1.0 + np.linalg.norm(M))
