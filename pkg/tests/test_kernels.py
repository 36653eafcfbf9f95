import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from pydantic import ValidationError

from mbinv.exceptions import InvalidGrid, ZeroVariance
from mbinv.models.kernels import Example2DKernel, OUKernel, SamplingGrid, TableKernel, WienerKernel, parse_kernel
from mbinv.models.matrices import BlockGeneratorForm
from mbinv.services.block_markov_service import block_markov_service as block
from mbinv.services.dense_oracle_service import dense_oracle_service as oracle
from mbinv.services.kernel_service import kernel_service
from mbinv.services.scalar_markov_service import scalar_markov_service as scalar
from tests.helpers import random_grid

E = np.exp(-1.0)
UNIT_2D = Example2DKernel(sigma1=1.0, sigma2=1.0, alpha=1.0)


def test_grid_must_increase():
    with pytest.raises(InvalidGrid):
        SamplingGrid([1.0, 1.0, 2.0])
    with pytest.raises(InvalidGrid):
        SamplingGrid([])
    with pytest.raises(InvalidGrid):
        SamplingGrid([0.0, np.nan])


def test_uniform_grid_starts_at_tau():
    assert_allclose(SamplingGrid.uniform(0.5, 4).points, [0.5, 1.0, 1.5, 2.0])
    assert_allclose(SamplingGrid.uniform(1.0, 3, start=0.0).points, [0.0, 1.0, 2.0])


def test_parse_kernel_by_kind():
    assert isinstance(parse_kernel({"kind": "ou", "sigma2": 1, "alpha": 2}), OUKernel)
    assert isinstance(parse_kernel({"kind": "wiener", "sigma2": 1}), WienerKernel)
    kernel = parse_kernel({"kind": "example2d", "sigma1": 1, "sigma2": 2, "alpha": 0.5})
    assert kernel.dimension == 2


def test_parse_kernel_rejects_non_positive_parameters():
    with pytest.raises(ValidationError):
        parse_kernel({"kind": "ou", "sigma2": -1, "alpha": 1})
    with pytest.raises(ValidationError):
        parse_kernel({"kind": "brownian", "sigma2": 1})


def test_table_kernel_shape_is_validated():
    with pytest.raises(ValidationError):
        TableKernel(grid=[1, 2], values=[[1, 0]])


def test_table_kernel_only_evaluates_on_its_points():
    kernel = TableKernel(grid=[1, 2], values=[[1, 0.5], [0.5, 2]])
    assert kernel.evaluate(2.0, 1.0) == 0.5
    with pytest.raises(InvalidGrid):
        kernel.evaluate(1.5, 1.0)


def test_covariance_matrix_wiener():
    K = kernel_service.covariance_matrix(WienerKernel(sigma2=1.0), [1, 2, 3])
    assert_array_equal(K, [[1, 1, 1], [1, 2, 2], [1, 2, 3]])


def test_covariance_matrix_ou():
    K = kernel_service.covariance_matrix(OUKernel(sigma2=1.0, alpha=1.0), [0, 1])
    assert_allclose(K, [[1, E], [E, 1]], rtol=1e-15)


def test_covariance_2d_single_point():
    K = kernel_service.covariance_matrix(UNIT_2D, [1.0])
    assert_allclose(K, [[1, 1 - E], [1 - E, (1 - E ** 2) / 2]], rtol=1e-14)


def test_covariance_2d_is_point_major_and_symmetric():
    t = [0.5, 1.0, 2.0]
    K = kernel_service.covariance_matrix(UNIT_2D, t)
    assert K.shape == (6, 6)
    assert_allclose(K, K.T, atol=1e-15)
    assert_allclose(K[0:2, 4:6], UNIT_2D.evaluate(0.5, 2.0), rtol=1e-15)
    assert np.all(np.linalg.eigvalsh(K) > 0)


def test_covariance_2d_cross_branches():
    # k12(s, t) = e^-(t-s) - e^-t for s <= t, 1 - e^-t for s > t
    assert UNIT_2D.cross(1.0, 3.0) == pytest.approx(np.exp(-2.0) - np.exp(-3.0))
    assert UNIT_2D.cross(3.0, 1.0) == pytest.approx(1 - E)
    assert UNIT_2D.cross(2.0, 2.0) == pytest.approx(1 - np.exp(-2.0))


def test_covariance_2d_rejects_origin():
    with pytest.raises(InvalidGrid):
        kernel_service.covariance_matrix(UNIT_2D, [0.0, 1.0])


def test_covariance_blocks_match_dense():
    t = [0.5, 1.0, 2.0, 2.5]
    diag_blocks, super_blocks = kernel_service.covariance_blocks(UNIT_2D, t)
    K = kernel_service.covariance_matrix(UNIT_2D, t)
    for i in range(4):
        assert_allclose(diag_blocks[i], K[2 * i:2 * i + 2, 2 * i:2 * i + 2], rtol=1e-15)
    for i in range(3):
        assert_allclose(super_blocks[i], K[2 * i:2 * i + 2, 2 * i + 2:2 * i + 4], rtol=1e-15)


def test_covariance_blocks_scalar_kernel_are_one_by_one():
    diag_blocks, super_blocks = kernel_service.covariance_blocks(WienerKernel(sigma2=2.0), [1, 2, 3])
    assert diag_blocks.shape == (3, 1, 1)
    assert_allclose(super_blocks[:, 0, 0], [2, 4])


def test_gamma_coefficients_ou_uniform_spacing():
    gamma = kernel_service.gamma_coefficients(OUKernel(sigma2=3.0, alpha=0.7), SamplingGrid.uniform(0.4, 6))
    assert_allclose(gamma, np.full(5, np.exp(-0.7 * 0.4)), rtol=1e-14)


def test_gamma_coefficients_wiener():
    assert_allclose(kernel_service.gamma_coefficients(WienerKernel(sigma2=1.0), [1, 2, 3]), [1, 1])


def test_gamma_coefficients_independent_of_scale(rng):
    t = random_grid(rng, 7)
    small = kernel_service.gamma_coefficients(OUKernel(sigma2=0.1, alpha=1.3), t)
    large = kernel_service.gamma_coefficients(OUKernel(sigma2=50.0, alpha=1.3), t)
    assert_allclose(small, large, rtol=1e-14)


def test_gamma_coefficients_zero_variance():
    with pytest.raises(ZeroVariance) as info:
        kernel_service.gamma_coefficients(WienerKernel(sigma2=1.0), [0, 1, 2])
    assert info.value.index == 1


@pytest.mark.parametrize("kernel", [WienerKernel(sigma2=1.5), OUKernel(sigma2=2.0, alpha=0.8)])
def test_scalar_kernels_compress_to_their_gamma_coefficients(kernel, rng):
    for n in range(2, 13):
        t = random_grid(rng, n, high=5.0)
        gen = scalar.compress(kernel_service.covariance_matrix(kernel, t))
        gamma = kernel_service.gamma_coefficients(kernel, t)
        assert_allclose(gen.gamma, gamma, rtol=1e-12)
        assert_allclose(gen.lam, gamma, rtol=1e-12)


def test_scalar_generator_expands_to_covariance(rng):
    kernel = OUKernel(sigma2=2.0, alpha=0.5)
    t = random_grid(rng, 9)
    gen = kernel_service.scalar_generator(kernel, t)
    assert gen.is_symmetric
    assert_allclose(scalar.expand(gen), kernel_service.covariance_matrix(kernel, t), rtol=1e-12)


@pytest.mark.parametrize("kernel", [WienerKernel(sigma2=1.0), OUKernel(sigma2=1.0, alpha=2.0), UNIT_2D])
def test_markov_check_holds_on_random_grids(kernel):
    rng = np.random.default_rng(20)
    for _ in range(20):
        t = random_grid(rng, int(rng.integers(3, 9)))
        assert kernel_service.wide_sense_markov_check(kernel, t).passed


def test_markov_check_2d_example_points():
    assert kernel_service.wide_sense_markov_check(UNIT_2D, [0.5, 1.0, 2.0]).passed


def test_markov_check_is_scale_invariant(rng):
    t = random_grid(rng, 6)
    for sigma2 in (1e-3, 1.0, 1e3):
        assert kernel_service.wide_sense_markov_check(OUKernel(sigma2=sigma2, alpha=0.3), t).passed


def test_markov_check_flags_perturbed_entry():
    t = np.linspace(0.0, 2.0, 5)
    values = kernel_service.covariance_matrix(OUKernel(sigma2=1.0, alpha=1.0), t)
    values[0, 4] *= 1.1
    values[4, 0] *= 1.1
    kernel = TableKernel(grid=t.tolist(), values=values.tolist())

    report = kernel_service.wide_sense_markov_check(kernel, t)
    assert not report.passed
    assert (report.row, report.col) == (1, 5)
    assert report.residual == pytest.approx(0.1 * np.exp(-2.0), rel=1e-9)


def test_markov_check_needs_three_points():
    with pytest.raises(InvalidGrid):
        kernel_service.wide_sense_markov_check(OUKernel(sigma2=1.0, alpha=1.0), [1.0, 2.0])


def test_example_2d_transitions_match_pipeline():
    t = SamplingGrid([0.3, 0.9, 1.0, 2.2, 3.0])
    blocks = kernel_service.example_2d_blocks(1.3, 0.7, 0.9, t)
    generic = block.transition_blocks(blocks.K_diag, blocks.K_super)
    assert_allclose(blocks.Gamma, generic, atol=1e-10)


def test_example_2d_closed_forms_match_pipeline():
    t = SamplingGrid([0.3, 0.9, 1.0, 2.2, 3.0])
    blocks = kernel_service.example_2d_blocks(1.3, 0.7, 0.9, t)
    inverse = block.invert(BlockGeneratorForm(diag_blocks=blocks.K_diag, trans_blocks=blocks.Gamma))

    assert_allclose(blocks.A[0], blocks.K_diag[0], rtol=1e-14)
    assert_allclose(blocks.A, inverse.A_blocks, atol=1e-10)
    assert_allclose(blocks.M, inverse.M_blocks, atol=1e-10)
    assert_allclose(blocks.A_inv, np.linalg.inv(inverse.A_blocks), rtol=1e-8)
    assert_allclose(blocks.det_A, block.block_determinants(inverse), rtol=1e-9)


def written_out_super_block(s1, s2, a, ti, tj):
    """K(t_i, t_j) entry by entry, with only the second exponential of (2,2) halved"""
    return np.array([
        [a * s1 ** 2 * ti, s1 * s2 * (np.exp(-a * (tj - ti)) - np.exp(-a * tj))],
        [s1 * s2 * (1 - np.exp(-a * ti)), s2 ** 2 * (np.exp(-a * (tj - ti)) - np.exp(-a * (ti + tj)) / 2)],
    ]) / a


def test_example_2d_super_blocks_against_written_out_form():
    t = np.array([0.3, 0.9, 1.0, 2.2, 3.0])
    blocks = kernel_service.example_2d_blocks(1.3, 0.7, 0.9, SamplingGrid(t))
    for i in range(t.size - 1):
        written = written_out_super_block(1.3, 0.7, 0.9, t[i], t[i + 1])
        for entry in [(0, 0), (0, 1), (1, 0)]:
            assert blocks.K_super[i][entry] == pytest.approx(written[entry], rel=1e-12)
        halved = 0.7 ** 2 * (np.exp(-0.9 * (t[i + 1] - t[i])) - np.exp(-0.9 * (t[i] + t[i + 1]))) / (2 * 0.9)
        assert blocks.K_super[i][1, 1] == pytest.approx(halved, rel=1e-12)


def test_example_2d_super_block_lower_right_entry_differs_from_written_out_form():
    blocks = kernel_service.example_2d_blocks(1.0, 1.0, 1.0, SamplingGrid([1.0, 2.0]))
    written = written_out_super_block(1.0, 1.0, 1.0, 1.0, 2.0)
    assert blocks.K_super[0][1, 1] == pytest.approx((np.exp(-1) - np.exp(-3)) / 2, rel=1e-14)
    assert blocks.K_super[0][1, 1] == pytest.approx(0.15905, abs=1e-5)
    assert written[1, 1] == pytest.approx(0.34299, abs=1e-5)


@pytest.mark.parametrize("n", [2, 3, 4, 6])
def test_example_2d_unit_parameters_end_to_end(n):
    grid = SamplingGrid.uniform(1.0, n)
    blocks = kernel_service.example_2d_blocks(1.0, 1.0, 1.0, grid)
    uniform = kernel_service.example_2d_uniform(1.0, 1.0, 1.0)

    for Gamma in block.transition_blocks(blocks.K_diag, blocks.K_super):
        assert_allclose(Gamma, [[1, 0], [0, E]], atol=1e-12)

    inverse = block.invert(BlockGeneratorForm(diag_blocks=blocks.K_diag, trans_blocks=blocks.Gamma))
    for A in inverse.A_blocks:
        assert_allclose(A, uniform["A"], atol=1e-10)
    for M in inverse.M_blocks:
        assert_allclose(M, uniform["M"], atol=1e-10)
    assert_allclose(block.block_determinants(inverse), uniform["det_A"], rtol=1e-10)

    expected = oracle.invert_dense(kernel_service.covariance_matrix(UNIT_2D, grid))
    assert_allclose(inverse.to_dense(), expected, atol=1e-8)


def test_example_2d_uniform_determinant_formula():
    uniform = kernel_service.example_2d_uniform(2.0, 0.5, 0.3)
    assert uniform["det_A"] == pytest.approx(np.linalg.det(uniform["A"]), rel=1e-9)
    assert_allclose(uniform["A_inv"] @ uniform["A"], np.eye(2), atol=1e-10)
    assert_allclose(uniform["Gamma"], np.diag([1.0, np.exp(-0.15)]))


def test_sample_path_is_deterministic():
    kernel = OUKernel(sigma2=1.0, alpha=1.0)
    t = np.linspace(0.1, 3.0, 6)
    first = kernel_service.sample_path(kernel, t, seed=42)
    assert first.shape == (6,)
    assert_array_equal(first, kernel_service.sample_path(kernel, t, seed=42))
    assert not np.array_equal(first, kernel_service.sample_path(kernel, t, seed=43))


def test_sample_path_covariance_converges():
    kernel = OUKernel(sigma2=1.0, alpha=1.0)
    t = np.linspace(0.0, 2.7, 10)
    draws = kernel_service.sample_path(kernel, t, seed=7, size=5000)
    K = kernel_service.covariance_matrix(kernel, t)

    sample = draws.T @ draws / draws.shape[0]
    standard_error = np.sqrt((np.outer(np.diag(K), np.diag(K)) + K ** 2) / draws.shape[0])
    assert np.all(np.abs(sample - K) <= 4 * standard_error)


def test_sample_path_single_point_variance():
    draws = kernel_service.sample_path(WienerKernel(sigma2=2.0), [1.5], seed=3, size=20000)
    assert draws.shape == (20000, 1)
    assert np.var(draws) == pytest.approx(3.0, abs=4 * 3.0 * np.sqrt(2 / 20000))


def test_sample_path_2d_kernel_shape():
    draws = kernel_service.sample_path(UNIT_2D, [0.5, 1.0, 1.5], seed=1, size=3)
    assert draws.shape == (3, 6)
