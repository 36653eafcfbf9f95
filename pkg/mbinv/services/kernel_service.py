from typing import Optional, Tuple, Union

import numpy as np
import structlog

from mbinv.config import get_settings
from mbinv.exceptions import InvalidGrid, ZeroVariance
from mbinv.models.kernels import Example2DKernel, MatrixKernel, SamplingGrid, ScalarKernel
from mbinv.models.matrices import Example2DBlocks, ScalarGeneratorForm, StructureReport
from mbinv.services.block_markov_service import block_markov_service
from mbinv.services.dense_oracle_service import dense_oracle_service

logger = structlog.get_logger()
settings = get_settings()

AnyKernel = Union[ScalarKernel, MatrixKernel]


def _as_grid(grid) -> SamplingGrid:
    return grid if isinstance(grid, SamplingGrid) else SamplingGrid(grid)


class KernelService:
    """Covariance functions evaluated on sampling grids"""

    def _validate(self, kernel: AnyKernel, grid: SamplingGrid) -> None:
        if isinstance(kernel, Example2DKernel) and grid.points[0] <= 0:
            raise InvalidGrid("the coupled 2D kernel needs every point > 0 (its variance vanishes at t = 0)")

    def covariance_matrix(self, kernel: AnyKernel, grid) -> np.ndarray:
        """
        Dense covariance on the grid

        Scalar kernels give the n x n matrix k(t_i, t_j); matrix kernels give the
        point-major (n m) x (n m) matrix whose (i, j) block is K(t_i, t_j).
        """
        grid = _as_grid(grid)
        self._validate(kernel, grid)
        t = grid.points
        values = kernel.evaluate(t[:, None], t[None, :])
        if kernel.dimension == 1:
            return np.asarray(values, dtype=float)

        n, m = grid.n, kernel.dimension
        return values.transpose(0, 2, 1, 3).reshape(n * m, n * m)

    def covariance_blocks(self, kernel: AnyKernel, grid) -> Tuple[np.ndarray, np.ndarray]:
        """(K_ii stack, K_{i,i+1} stack); scalar kernels give 1 x 1 blocks"""
        grid = _as_grid(grid)
        self._validate(kernel, grid)
        t = grid.points
        diag_blocks = np.asarray(kernel.evaluate(t, t), dtype=float)
        super_blocks = np.asarray(kernel.evaluate(t[:-1], t[1:]), dtype=float)
        if kernel.dimension == 1:
            return diag_blocks[:, None, None], super_blocks[:, None, None]
        return diag_blocks, super_blocks

    def gamma_coefficients(self, kernel: ScalarKernel, grid) -> np.ndarray:
        """
        Neighbour coupling coefficients gamma_i = k(t_i, t_{i+1}) / k(t_i, t_i)

        Examples:
            wiener, t=(1, 2, 3) -> (1, 1)
            ou(sigma2, alpha), spacing d -> exp(-alpha d) everywhere
        """
        grid = _as_grid(grid)
        t = grid.points
        variances = np.asarray(kernel.evaluate(t, t), dtype=float)
        zero = np.flatnonzero(variances[:-1] <= 0)
        if zero.size:
            raise ZeroVariance(int(zero[0]) + 1)
        return np.asarray(kernel.evaluate(t[:-1], t[1:]), dtype=float) / variances[:-1]

    def scalar_generator(self, kernel: ScalarKernel, grid) -> ScalarGeneratorForm:
        """Generator form of a scalar Markov covariance; lambda = gamma by symmetry"""
        grid = _as_grid(grid)
        t = grid.points
        gamma = self.gamma_coefficients(kernel, grid)
        return ScalarGeneratorForm(diag=kernel.evaluate(t, t), gamma=gamma, lam=gamma.copy())

    def wide_sense_markov_check(self, kernel: AnyKernel, grid, tol: Optional[float] = None) -> StructureReport:
        """
        k(s, t) k(tau, tau) = k(s, tau) k(tau, t) for every s < tau < t on the grid,
        the block identity for matrix kernels, within tol * max |K|.
        """
        grid = _as_grid(grid)
        if grid.n < 3:
            raise InvalidGrid("the Markov check needs at least three points")
        tol = settings.STRUCTURE_TOL if tol is None else tol
        K = self.covariance_matrix(kernel, grid)

        if kernel.dimension > 1:
            return block_markov_service.markov_block_test(K, kernel.dimension, tol)

        scale = float(np.max(np.abs(K)))
        variances = np.diag(K)
        zero = np.flatnonzero(variances[1:-1] == 0)
        if zero.size:
            raise ZeroVariance(int(zero[0]) + 2)

        worst, location = 0.0, (None, None, None)
        for tau in range(1, grid.n - 1):
            predicted = np.outer(K[:tau, tau], K[tau, tau + 1:]) / K[tau, tau]
            residual = np.abs(K[:tau, tau + 1:] - predicted)
            s, t = np.unravel_index(np.argmax(residual), residual.shape)
            if residual[s, t] > worst:
                worst = float(residual[s, t])
                location = (int(s) + 1, tau + int(t) + 2, tau + 1)

        report = StructureReport(
            passed=worst <= tol * scale,
            residual=worst,
            threshold=tol * scale,
            row=location[0],
            col=location[1],
            pivot=location[2],
        )
        logger.info("markov_property_checked", kind=kernel.kind, passed=report.passed, residual=report.residual)
        return report

    def example_2d_blocks(self, sigma1: float, sigma2: float, alpha: float, grid) -> Example2DBlocks:
        """
        Closed-form blocks of the coupled Wiener / Ornstein-Uhlenbeck process

        With d_i = t_i - t_{i-1} (t_0 = 0) and g_i = exp(-alpha d_i):

            A_i   = (1/alpha) [[alpha s1^2 d_i, s1 s2 (1 - g_i)], [., s2^2 (1 - g_i^2) / 2]]
            det A_i = (s1^2 s2^2 / alpha) [d_i (1 - g_i^2) / 2 - (1 - g_i)^2 / alpha]
            M_i   = (1/alpha) [[alpha s1^2 (t_{i+1} - t_{i-1}), s1 s2 (1 - g_i g_{i+1})],
                               [., s2^2 (1 - g_i^2 g_{i+1}^2) / 2]]
            Gamma_i = diag(1, g_{i+1})

        K_super is evaluated from the kernel. Its (2,2) entry is
        s2^2 (g_{i+1} - exp(-alpha (t_i + t_{i+1}))) / (2 alpha): the halving covers the whole
        difference. Halving only the second exponential does not reproduce k22.

        t_0 = 0 makes A_1 = K_11 and M_1 = K_22.
        """
        kernel = Example2DKernel(sigma1=sigma1, sigma2=sigma2, alpha=alpha)
        grid = _as_grid(grid)
        self._validate(kernel, grid)
        t = grid.points
        n = grid.n
        s1, s2, a = sigma1, sigma2, alpha

        K_diag, K_super = self.covariance_blocks(kernel, grid)

        d = np.diff(np.concatenate(([0.0], t)))
        g = np.exp(-a * d)

        A = np.empty((n, 2, 2))
        A[:, 0, 0] = s1 ** 2 * d
        A[:, 0, 1] = A[:, 1, 0] = s1 * s2 * (1 - g) / a
        A[:, 1, 1] = s2 ** 2 * (1 - g ** 2) / (2 * a)

        det_A = s1 ** 2 * s2 ** 2 / a * (d * (1 - g ** 2) / 2 - (1 - g) ** 2 / a)

        A_inv = np.empty_like(A)
        A_inv[:, 0, 0] = A[:, 1, 1] / det_A
        A_inv[:, 1, 1] = A[:, 0, 0] / det_A
        A_inv[:, 0, 1] = A_inv[:, 1, 0] = -A[:, 0, 1] / det_A

        lagged = t[1:] - np.concatenate(([0.0], t[:-2]))
        gg = g[:-1] * g[1:]
        M = np.empty((n - 1, 2, 2))
        M[:, 0, 0] = s1 ** 2 * lagged
        M[:, 0, 1] = M[:, 1, 0] = s1 * s2 * (1 - gg) / a
        M[:, 1, 1] = s2 ** 2 * (1 - gg ** 2) / (2 * a)

        Gamma = np.zeros((n - 1, 2, 2))
        Gamma[:, 0, 0] = 1.0
        Gamma[:, 1, 1] = g[1:]

        return Example2DBlocks(
            K_diag=K_diag,
            K_super=K_super,
            Gamma=Gamma,
            A=A,
            A_inv=A_inv,
            M=M,
            det_A=det_A,
        )

    def example_2d_uniform(self, sigma: float, alpha: float, tau: float) -> dict:
        """
        Uniform grid t_i = i tau, sigma1 = sigma2 = sigma, gamma = exp(-alpha tau):

            A = (sigma^2/alpha) [[alpha tau, 1 - gamma], [1 - gamma, (1 - gamma^2)/2]]
            M = (sigma^2/alpha) [[2 alpha tau, 1 - gamma^2], [1 - gamma^2, (1 - gamma^4)/2]]
            det A = (sigma^4/alpha^2)(1 - gamma)[alpha tau (1 + gamma)/2 - (1 - gamma)]
        """
        gamma = np.exp(-alpha * tau)
        scale = sigma ** 2 / alpha
        A = scale * np.array([[alpha * tau, 1 - gamma], [1 - gamma, (1 - gamma ** 2) / 2]])
        M = scale * np.array([[2 * alpha * tau, 1 - gamma ** 2], [1 - gamma ** 2, (1 - gamma ** 4) / 2]])
        det_A = sigma ** 4 / alpha ** 2 * (1 - gamma) * (alpha * tau * (1 + gamma) / 2 - (1 - gamma))
        A_inv = np.array([[A[1, 1], -A[0, 1]], [-A[1, 0], A[0, 0]]]) / det_A
        return {
            "gamma": float(gamma),
            "Gamma": np.diag([1.0, gamma]),
            "A": A,
            "A_inv": A_inv,
            "M": M,
            "det_A": float(det_A),
        }

    def sample_path(self, kernel: AnyKernel, grid, seed: Optional[int] = None, size: Optional[int] = None) -> np.ndarray:
        """
        Zero-mean Gaussian draw(s) with the kernel's covariance on the grid

        Returns shape (N,) when size is None, else (size, N). Deterministic given seed.
        """
        K = self.covariance_matrix(kernel, grid)
        L = dense_oracle_service.factor_spd(K)
        rng = np.random.default_rng(settings.DEFAULT_SEED if seed is None else seed)
        noise = rng.standard_normal((1 if size is None else size, K.shape[0]))
        draws = noise @ L.T
        return draws[0] if size is None else draws


kernel_service = KernelService()
