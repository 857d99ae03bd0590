import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ddlab.linalg import (
    log_det_gram,
    min_norm_solve,
    projection_complement,
    pseudo_determinant,
    pseudo_inverse,
)


def rng_for(seed):
    return np.random.default_rng(seed)


class TestPseudoInverse:
    def test_identity(self):
        np.testing.assert_allclose(pseudo_inverse(np.eye(3)), np.eye(3), atol=1e-12)

    def test_diagonal_with_zero(self):
        np.testing.assert_allclose(pseudo_inverse(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]), atol=1e-12)

    def test_penrose_conditions(self):
        A = rng_for(0).standard_normal((3, 5))
        P = pseudo_inverse(A)
        np.testing.assert_allclose(A @ P @ A, A, atol=1e-10)
        np.testing.assert_allclose(P @ A @ P, P, atol=1e-10)
        np.testing.assert_allclose(A @ P, (A @ P).T, atol=1e-10)
        np.testing.assert_allclose(P @ A, (P @ A).T, atol=1e-10)

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            pseudo_inverse(np.array([[1.0, np.nan]]))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(1, 6))
    def test_penrose_conditions_random_shapes(self, seed, n, d):
        A = rng_for(seed).standard_normal((n, d))
        P = pseudo_inverse(A)
        scale = max(np.linalg.norm(A), 1.0)
        assert np.max(np.abs(A @ P @ A - A)) <= 1e-10 * scale
        assert np.max(np.abs(P @ A @ P - P)) <= 1e-10 * max(np.linalg.norm(P), 1.0)


class TestPseudoDeterminant:
    def test_diagonal(self):
        assert pseudo_determinant(np.diag([2.0, 0.0, 3.0])) == pytest.approx(6.0)

    def test_identity(self):
        assert pseudo_determinant(np.eye(4)) == pytest.approx(1.0)

    def test_empty(self):
        assert pseudo_determinant(np.zeros((0, 0))) == 1.0

    def test_full_rank_gram_matches_det(self):
        X = rng_for(1).standard_normal((2, 5))
        G = X @ X.T
        assert pseudo_determinant(G) == pytest.approx(np.linalg.det(G), rel=1e-8)

    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError):
            pseudo_determinant(np.array([[1.0, 5.0], [0.0, 1.0]]))

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_orthogonal_invariance(self, seed):
        rng = rng_for(seed)
        A = rng.standard_normal((4, 4))
        A = A @ A.T
        Q = np.linalg.qr(rng.standard_normal((4, 4)))[0]
        assert pseudo_determinant(Q.T @ A @ Q) == pytest.approx(pseudo_determinant(A), rel=1e-8)


class TestMinNormSolve:
    def test_identity(self):
        np.testing.assert_allclose(min_norm_solve(np.eye(3), [1, 2, 3]), [1, 2, 3], atol=1e-12)

    def test_single_row(self):
        np.testing.assert_allclose(min_norm_solve(np.array([[1.0, 0, 0]]), [5.0]), [5, 0, 0], atol=1e-12)

    def test_min_norm_property(self):
        rng = rng_for(2)
        X = rng.standard_normal((2, 4))
        y = rng.standard_normal(2)
        w = min_norm_solve(X, y)
        np.testing.assert_allclose(X @ w, y, atol=1e-10)
        # any other solution w' = w + null-space component has larger norm
        for _ in range(100):
            z = rng.standard_normal(4)
            w_alt = w + projection_complement(X) @ z
            np.testing.assert_allclose(X @ w_alt, y, atol=1e-8)
            assert np.linalg.norm(w) <= np.linalg.norm(w_alt) + 1e-12

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            min_norm_solve(np.eye(3), [1.0, 2.0])

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(5, 8))
    def test_interpolant_norm_bound(self, seed, n, d):
        rng = rng_for(seed)
        X = rng.standard_normal((n, d))
        w0 = rng.standard_normal(d)
        w = min_norm_solve(X, X @ w0)
        assert np.linalg.norm(w) <= np.linalg.norm(w0) + 1e-10


class TestProjectionComplement:
    def test_empty_design(self):
        np.testing.assert_allclose(projection_complement(np.zeros((0, 4))), np.eye(4))

    def test_identity_design(self):
        np.testing.assert_allclose(projection_complement(np.eye(4)), np.zeros((4, 4)), atol=1e-12)

    def test_rank_and_idempotence(self):
        X = rng_for(3).standard_normal((3, 5))
        P = projection_complement(X)
        np.testing.assert_allclose(P, P.T, atol=1e-10)
        np.testing.assert_allclose(P @ P, P, atol=1e-10)
        assert np.trace(P) == pytest.approx(2.0, abs=1e-10)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(0, 6), st.integers(2, 6))
    def test_trace_is_nullity(self, seed, n, d):
        X = rng_for(seed).standard_normal((n, d))
        P = projection_complement(X)
        rank = np.linalg.matrix_rank(X) if n else 0
        assert np.trace(P) == pytest.approx(d - rank, abs=1e-9)
        assert np.max(np.abs(P @ P - P)) < 1e-10


class TestLogDetGram:
    def test_orthonormal_rows(self):
        X = np.eye(3)[:2]
        assert log_det_gram(X) == pytest.approx(0.0, abs=1e-12)

    def test_single_row(self):
        assert log_det_gram(np.array([[3.0, 4.0]])) == pytest.approx(np.log(25.0))

    def test_empty(self):
        assert log_det_gram(np.zeros((0, 5))) == 0.0

    def test_matches_direct_determinant(self):
        X = rng_for(4).standard_normal((3, 6))
        assert np.exp(log_det_gram(X)) == pytest.approx(np.linalg.det(X @ X.T), rel=1e-8)

    def test_rank_deficient_is_minus_inf(self):
        X = np.vstack([np.ones(4), np.ones(4)])
        assert log_det_gram(X) == -np.inf

    def test_wide_only(self):
        with pytest.raises(ValueError):
            log_det_gram(np.zeros((3, 2)))
