import math
from statistics import NormalDist

import numpy as np
import pytest

from vitprune import linalg
from vitprune.errors import InputError


class TestMatmul:
    def test_identity(self):
        a = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert np.array_equal(linalg.matmul(np.eye(2), a), a)

    def test_hand_expanded_product(self):
        a = np.array([[1.0, 2.0], [3.0, 4.0]])
        b = np.array([[5.0, 6.0], [7.0, 8.0]])
        # [[1*5+2*7, 1*6+2*8], [3*5+4*7, 3*6+4*8]]
        assert np.array_equal(linalg.matmul(a, b), [[19.0, 22.0], [43.0, 50.0]])

    def test_dimension_mismatch(self):
        with pytest.raises(InputError):
            linalg.matmul(np.ones((2, 3)), np.ones((2, 3)))

    def test_associativity(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            a, b, c = (rng.standard_normal((4, 4)) for _ in range(3))
            lhs = linalg.matmul(linalg.matmul(a, b), c)
            rhs = linalg.matmul(a, linalg.matmul(b, c))
            assert np.abs(lhs - rhs).max() < 1e-9


class TestRowSoftmax:
    def test_symmetric_row(self):
        out = linalg.row_softmax(np.array([[0.0, 0.0]]))
        assert np.allclose(out, [[0.5, 0.5]])

    def test_direct_evaluation(self):
        row = np.array([1.0, 2.0, 3.0])
        expected = np.exp(row) / np.exp(row).sum()  # unstabilized direct form
        out = linalg.row_softmax(row[None, :])[0]
        assert np.abs(out - expected).max() < 1e-12
        assert np.allclose(out, [0.09003, 0.24473, 0.66524], atol=1e-4)

    def test_shift_invariance(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((5, 6))
        assert np.abs(linalg.row_softmax(a + 17.0) - linalg.row_softmax(a)).max() < 1e-12

    def test_rows_sum_to_one_and_positive(self):
        rng = np.random.default_rng(4)
        out = linalg.row_softmax(rng.standard_normal((30, 12)) * 40.0)
        assert (out > 0).all()
        assert np.abs(out.sum(axis=1) - 1.0).max() < 1e-9


class TestLayerNorm:
    def test_constant_row_is_zeroed(self):
        a = np.full((2, 3), 4.2)
        out = linalg.layer_norm(a, np.ones(3), np.zeros(3))
        assert np.allclose(out, 0.0)

    def test_two_point_row(self):
        out = linalg.layer_norm(np.array([[1.0, 3.0]]), np.ones(2), np.zeros(2), eps=1e-12)
        assert np.abs(out - [[-1.0, 1.0]]).max() < 1e-9

    def test_beta_shift_on_constant_row(self):
        out = linalg.layer_norm(np.full((1, 2), 9.0), np.ones(2), np.full(2, 5.0))
        assert np.allclose(out, 5.0)

    def test_length_mismatch(self):
        with pytest.raises(InputError):
            linalg.layer_norm(np.ones((2, 3)), np.ones(2), np.zeros(3))

    def test_bad_eps(self):
        with pytest.raises(InputError):
            linalg.layer_norm(np.ones((2, 3)), np.ones(3), np.zeros(3), eps=0.0)


class TestGelu:
    def test_zero(self):
        assert linalg.gelu(0.0) == 0.0

    def test_one_matches_normal_cdf(self):
        # gelu(1) = 1 * Phi(1), independently via the stdlib normal CDF
        assert abs(linalg.gelu(1.0) - NormalDist().cdf(1.0)) < 1e-12
        assert abs(linalg.gelu(1.0) - 0.841345) < 1e-5

    def test_deep_negative_tail(self):
        assert abs(linalg.gelu(-10.0)) < 1e-8

    def test_elementwise_on_matrix(self):
        a = np.array([[0.0, 1.0], [-10.0, 2.5]])
        out = linalg.gelu(a)
        assert out.shape == a.shape
        assert abs(out[0, 1] - linalg.gelu(1.0)) == 0.0


class TestPairwiseSqdist:
    def test_identical_rows(self):
        out = linalg.pairwise_sqdist(np.array([[1.0, 2.0], [1.0, 2.0]]))
        assert np.array_equal(out, np.zeros((2, 2)))

    def test_one_dimensional(self):
        out = linalg.pairwise_sqdist(np.array([[0.0], [3.0]]))
        assert np.array_equal(out, [[0.0, 9.0], [9.0, 0.0]])

    def test_symmetry_and_zero_diagonal_exact(self):
        rng = np.random.default_rng(11)
        a = rng.standard_normal((17, 5))
        out = linalg.pairwise_sqdist(a)
        assert np.array_equal(out, out.T)
        assert (np.diag(out) == 0.0).all()

    def test_against_naive_loops(self):
        rng = np.random.default_rng(12)
        a = rng.standard_normal((9, 4))
        out = linalg.pairwise_sqdist(a)
        for i in range(9):
            for j in range(9):
                diff = a[i] - a[j]
                assert abs(out[i, j] - diff @ diff) < 1e-9


class TestCosineSimilarity:
    def test_parallel(self):
        assert math.isclose(linalg.cosine_similarity([1, 2], [1, 2]), 1.0, abs_tol=1e-12)

    def test_orthogonal(self):
        assert linalg.cosine_similarity([1, 0], [0, 1]) == 0.0

    def test_antiparallel(self):
        assert math.isclose(linalg.cosine_similarity([1, 0], [-1, 0]), -1.0, abs_tol=1e-12)

    def test_zero_norm_rejected(self):
        with pytest.raises(InputError):
            linalg.cosine_similarity([0.0, 0.0], [1.0, 0.0])

    def test_bounded(self):
        rng = np.random.default_rng(13)
        for _ in range(50):
            u, v = rng.standard_normal(6), rng.standard_normal(6)
            assert -1.0 <= linalg.cosine_similarity(u, v) <= 1.0


class TestColumnMedian:
    def test_odd_count(self):
        assert linalg.column_median(np.array([[1.0], [2.0], [9.0]]))[0] == 2.0

    def test_even_count_midpoint(self):
        assert linalg.column_median(np.array([[1.0], [3.0]]))[0] == 2.0

    def test_empty_rejected(self):
        with pytest.raises(InputError):
            linalg.column_median(np.empty((0, 3)))

    def test_l1_optimality_against_grid(self):
        rng = np.random.default_rng(14)
        for _ in range(10):
            a = rng.standard_normal((5, 3))
            med = linalg.column_median(a)
            for j in range(3):
                col = a[:, j]
                base = np.abs(col - med[j]).sum()
                for cand in np.arange(col.min(), col.max() + 1e-9, 0.01):
                    assert base <= np.abs(col - cand).sum() + 1e-12
