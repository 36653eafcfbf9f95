import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from mbinv.exceptions import InputError, NotPositiveDefinite, SingularLocalBlock
from mbinv.models.kernels import OUKernel, SamplingGrid
from mbinv.models.matrices import BandedGeneratorForm
from mbinv.services.banded_markov_service import banded_markov_service as banded
from mbinv.services.dense_oracle_service import dense_oracle_service as oracle
from mbinv.services.kernel_service import kernel_service
from mbinv.services.scalar_markov_service import scalar_markov_service as scalar
from tests.helpers import random_grid

WIENER_BAND = BandedGeneratorForm(n=3, m=1, diagonals=((1, 2, 3), (1, 2)))


def ou_covariance(points, sigma2=1.0, alpha=1.0):
    return kernel_service.covariance_matrix(OUKernel(sigma2=sigma2, alpha=alpha), SamplingGrid(points))


def band_mask(n, m):
    index = np.arange(n)
    return np.abs(index[:, None] - index[None, :]) <= m


def test_band_form_validates_half_bandwidth():
    with pytest.raises(InputError):
        BandedGeneratorForm(n=3, m=3, diagonals=((1, 1, 1), (0, 0), (0,), ()))


def test_transition_vectors_wiener():
    vectors = banded.transition_vectors(WIENER_BAND).vectors
    assert len(vectors) == 2
    assert_allclose(np.concatenate(vectors), [1, 1], rtol=1e-15)


def test_transition_vectors_ou():
    K = BandedGeneratorForm.from_dense(ou_covariance([0, 0.5, 1.0]), 1)
    vectors = banded.transition_vectors(K).vectors
    assert_allclose(np.concatenate(vectors), [np.exp(-0.5)] * 2, rtol=1e-14)


def test_transition_vectors_truncate_near_the_top():
    K = banded.random_instance(6, 2, seed=3)
    lengths = [vector.size for vector in banded.transition_vectors(K).vectors]
    assert lengths == [1, 2, 2, 2, 2]


def test_transition_vectors_solve_local_systems():
    K = banded.random_instance(7, 3, seed=4)
    dense = banded.expand(K)
    for i, vector in enumerate(banded.transition_vectors(K).vectors, start=1):
        window = slice(i - vector.size, i)
        assert_allclose(dense[window, window] @ vector, dense[window, i], atol=1e-12)


def test_expand_wiener_fills_out_of_band_entry():
    assert_allclose(banded.expand(WIENER_BAND), [[1, 1, 1], [1, 2, 2], [1, 2, 3]], rtol=1e-15)


def test_expand_full_band_is_unchanged():
    K = banded.random_instance(5, 4, seed=5)
    assert_array_equal(banded.expand(K), K.band_dense())


def test_expand_is_idempotent_through_the_band():
    K = banded.random_instance(9, 2, seed=6)
    dense = banded.expand(K)
    again = banded.expand(BandedGeneratorForm.from_dense(dense, 2))
    assert_allclose(again, dense, atol=1e-12)


def test_random_instance_matches_its_expansion():
    # the instance is sampled as a full covariance; its band must regenerate it
    n, m = 8, 3
    K = banded.random_instance(n, m, seed=7)
    dense = banded.expand(K)
    assert_allclose(dense, dense.T, atol=1e-14)
    assert np.all(np.linalg.eigvalsh(dense) > 0)
    assert banded.connectivity_test(dense, m).passed


def test_invert_wiener():
    inverse = banded.invert(WIENER_BAND)
    assert_allclose(inverse.to_dense(), [[2, -1, 0], [-1, 2, -1], [0, -1, 1]], atol=1e-14)


def test_invert_m2_matches_oracle_in_band():
    K = banded.random_instance(5, 2, seed=11)
    expected = oracle.invert_dense(banded.expand(K))
    mask = band_mask(5, 2)
    assert_allclose(banded.invert(K).to_dense()[mask], expected[mask], atol=1e-10)
    assert np.max(np.abs(expected[~mask])) <= 1e-9


def test_invert_full_band_is_dense_inverse():
    K = banded.random_instance(5, 4, seed=12)
    assert_allclose(banded.invert(K).to_dense(), oracle.invert_dense(banded.expand(K)), atol=1e-10)


def test_invert_m1_agrees_with_scalar_path():
    K = banded.random_instance(10, 1, seed=13)
    inverse = banded.invert(K)
    expected = scalar.invert(scalar.compress(banded.expand(K)))
    assert_allclose(inverse.alphas, expected.alphas, rtol=1e-12)
    assert_allclose(inverse.diagonals[0], expected.main, rtol=1e-12)
    assert_allclose(inverse.diagonals[1], expected.upper, rtol=1e-12)


def test_banded_products_match_dense(rng):
    inverse = banded.invert(banded.random_instance(9, 3, seed=14))
    X = rng.normal(size=(9, 2))
    assert_allclose(inverse.matmat(X), inverse.to_dense() @ X, atol=1e-12)
    assert_allclose(inverse.matvec(X[:, 0]), inverse.to_dense() @ X[:, 0], atol=1e-12)


def test_invert_raises_on_singular_local_block():
    K = BandedGeneratorForm(n=4, m=2, diagonals=((1, 1, 1, 1), (1, 1, 1), (1, 1)))
    with pytest.raises(SingularLocalBlock) as info:
        banded.invert(K)
    assert info.value.index == 2


def test_invert_raises_on_non_positive_innovation():
    K = BandedGeneratorForm(n=2, m=1, diagonals=((1, 1), (2,)))
    with pytest.raises(NotPositiveDefinite) as info:
        banded.invert(K)
    assert info.value.index == 2


@pytest.mark.parametrize("n, m", [(4, 1), (6, 2), (7, 3), (5, 4), (10, 3)])
def test_closed_form_entries_agree_with_invert(n, m):
    K = banded.random_instance(n, m, seed=n * 10 + m)
    expected = banded.invert(K)
    entries = banded.closed_form_entries(K)
    for got, want in zip(entries.diagonals, expected.diagonals):
        assert_allclose(got, want, rtol=1e-12, atol=1e-12)


def test_determinant_wiener():
    assert banded.determinant(WIENER_BAND).value == pytest.approx(1.0, rel=1e-14)


def test_determinant_diagonal_band():
    K = BandedGeneratorForm(n=3, m=1, diagonals=((2, 3, 4), (0, 0)))
    assert banded.determinant(K).value == pytest.approx(24.0, rel=1e-14)


def test_determinant_matches_oracle():
    K = banded.random_instance(6, 2, seed=15)
    det = banded.determinant(K)
    dense = banded.expand(K)
    assert det.value == pytest.approx(oracle.determinant_dense(dense), rel=1e-9)
    assert_allclose(det.leading_minors, oracle.leading_minors_dense(dense), rtol=1e-9)


def test_connectivity_ou_is_one_connected(rng):
    report = banded.connectivity_test(ou_covariance(random_grid(rng, 8)), 1)
    assert report.passed


def test_connectivity_ou_is_not_diagonal():
    report = banded.connectivity_test(ou_covariance([0, 0.5, 1.0, 2.0]), 0)
    assert not report.passed
    assert (report.row, report.col) == (1, 2)


def test_connectivity_diagonal_matrix_at_m0():
    assert banded.connectivity_test(np.diag([1.0, 2.0, 3.0]), 0).passed


def test_connectivity_of_expansion_has_zero_residual():
    K = banded.random_instance(8, 2, seed=16)
    report = banded.connectivity_test(banded.expand(K), 2)
    assert report.passed
    assert report.residual == 0.0


def test_connectivity_rejects_a_smaller_claim():
    K = banded.random_instance(8, 3, seed=17)
    report = banded.connectivity_test(banded.expand(K), 1)
    assert not report.passed
    assert report.col - report.row > 1


def test_connectivity_full_band_trivially_passes():
    assert banded.connectivity_test(ou_covariance([1, 2, 3]), 2).passed


@pytest.mark.parametrize("n, m, expected", [(5, 1, 13), (5, 4, 25), (5, 0, 5), (10, 3, 58)])
def test_storage_count(n, m, expected):
    assert banded.storage_count(n, m) == expected


def test_storage_count_matches_scalar_generator_size():
    for n in range(2, 12):
        assert banded.storage_count(n, 1) == 3 * n - 2
        assert banded.storage_count(n, n - 1) == n * n


def test_storage_count_rejects_wide_band():
    with pytest.raises(InputError):
        banded.storage_count(3, 3)


def test_invert_matches_dense_oracle_on_random_instances():
    rng = np.random.default_rng(200)
    for case in range(200):
        n = int(rng.integers(2, 11))
        m = int(rng.integers(1, min(3, n - 1) + 1))
        K = banded.random_instance(n, m, seed=case)
        dense = banded.expand(K)
        expected = oracle.invert_dense(dense)
        scale = np.max(np.abs(expected))

        mask = band_mask(n, m)
        inverse = banded.invert(K).to_dense()
        assert np.max(np.abs(inverse[mask] - expected[mask])) <= 1e-9 * scale
        assert np.max(np.abs(expected[~mask]), initial=0.0) <= 1e-9 * scale

        if m == 1:
            reference = scalar.invert(scalar.compress(dense)).to_dense()
            assert_allclose(inverse, reference, rtol=1e-12, atol=1e-12 * scale)
