import numpy as np
import pytest
from numpy.testing import assert_allclose

from mbinv.exceptions import DimensionMismatch, NotPositiveDefinite, NotSymmetric, SingularMatrix
from mbinv.services.dense_oracle_service import dense_oracle_service as oracle


@pytest.mark.parametrize(
    "M, expected",
    [
        (np.eye(3), np.eye(3)),
        ([[1, 0.5], [0.5, 1]], [[4 / 3, -2 / 3], [-2 / 3, 4 / 3]]),
        ([[2, 0], [0, 4]], [[0.5, 0], [0, 0.25]]),
    ],
)
def test_invert_dense_examples(M, expected):
    assert_allclose(oracle.invert_dense(M), expected, atol=1e-14)


def test_invert_dense_residual_on_random_matrices(rng):
    for n in range(1, 13):
        M = rng.uniform(-1, 1, size=(n, n)) + n * np.eye(n)
        inverse = oracle.invert_dense(M)
        assert np.max(np.abs(M @ inverse - np.eye(n))) <= 1e-9


def test_invert_dense_singular_reports_pivot():
    with pytest.raises(SingularMatrix) as info:
        oracle.invert_dense([[1, 2], [2, 4]])
    assert info.value.index == 2
    assert info.value.exit_code == 3


def test_invert_dense_rejects_non_square():
    with pytest.raises(DimensionMismatch):
        oracle.invert_dense(np.ones((2, 3)))


@pytest.mark.parametrize(
    "M, expected",
    [
        (np.eye(4), 1.0),
        ([[1, 0.5, 0.25], [0.5, 1, 0.5], [0.25, 0.5, 1]], 0.5625),
        ([[1, 1, 1], [1, 2, 2], [1, 2, 3]], 1.0),
    ],
)
def test_determinant_dense_examples(M, expected):
    assert oracle.determinant_dense(M) == pytest.approx(expected, rel=1e-12)


def test_determinant_sign_follows_row_swaps():
    assert oracle.determinant_dense([[0, 1], [1, 0]]) == pytest.approx(-1.0)
    assert oracle.determinant_dense([[1, 2], [2, 4]]) == 0.0


def test_determinant_product_rule(rng):
    A = rng.normal(size=(5, 5))
    B = rng.normal(size=(5, 5))
    expected = oracle.determinant_dense(A) * oracle.determinant_dense(B)
    assert oracle.determinant_dense(A @ B) == pytest.approx(expected, rel=1e-9)


def test_leading_minors_dense():
    M = [[1, 0.5, 0.25], [0.5, 1, 0.5], [0.25, 0.5, 1]]
    assert_allclose(oracle.leading_minors_dense(M), [1.0, 0.75, 0.5625], rtol=1e-12)


@pytest.mark.parametrize(
    "M, expected",
    [
        (np.eye(2), np.eye(2)),
        ([[4, 2], [2, 5]], [[2, 0], [1, 2]]),
    ],
)
def test_factor_spd_examples(M, expected):
    assert_allclose(oracle.factor_spd(M), expected, atol=1e-14)


def test_factor_spd_rejects_indefinite():
    with pytest.raises(NotPositiveDefinite) as info:
        oracle.factor_spd([[1, 2], [2, 1]])
    assert info.value.index == 2


def test_factor_spd_rejects_asymmetric():
    with pytest.raises(NotSymmetric):
        oracle.factor_spd([[2, 1], [0, 2]])


def test_factor_spd_pivot_tolerance_does_not_loosen_symmetry():
    M = np.array([[2.0, 1.0], [1.0 + 1e-6, 2.0]])
    with pytest.raises(NotSymmetric):
        oracle.factor_spd(M, tol=1e-3)
    L = oracle.factor_spd(M, symmetry_tol=1e-5)
    assert L[0, 0] == pytest.approx(np.sqrt(2.0))


def test_factor_spd_pivot_tolerance():
    M = np.diag([1.0, 1e-13])
    with pytest.raises(NotPositiveDefinite) as info:
        oracle.factor_spd(M)
    assert info.value.index == 2
    assert oracle.factor_spd(M, tol=1e-14)[1, 1] == pytest.approx(np.sqrt(1e-13))


def test_factor_spd_recovers_factor(rng):
    L = np.tril(rng.normal(size=(6, 6)))
    L[np.diag_indices(6)] = np.abs(L[np.diag_indices(6)]) + 0.5
    assert_allclose(oracle.factor_spd(L @ L.T), L, atol=1e-10)


def test_gls_dense_white_noise_is_sample_mean():
    B, D = oracle.gls_dense(np.ones(3), np.eye(3), [1, 2, 3])
    assert_allclose(B, [2.0], rtol=1e-12)
    assert_allclose(D, [[1 / 3]], rtol=1e-12)
