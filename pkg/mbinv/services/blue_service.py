from typing import Optional, Union

import numpy as np
import structlog
from scipy import linalg

from mbinv.config import get_settings
from mbinv.exceptions import DimensionMismatch, RankDeficientDesign
from mbinv.models.kernels import Example2DKernel, TableKernel
from mbinv.models.matrices import (
    BandedMatrix,
    BlockGeneratorForm,
    BlockTridiagonalMatrix,
    EstimateResult,
    LinearMeanModel,
    TridiagonalMatrix,
)
from mbinv.services.block_markov_service import block_markov_service
from mbinv.services.kernel_service import AnyKernel, kernel_service
from mbinv.services.scalar_markov_service import scalar_markov_service

logger = structlog.get_logger()
settings = get_settings()

StructuredInverse = Union[TridiagonalMatrix, BandedMatrix, BlockTridiagonalMatrix]


class BlueService:
    """Best linear unbiased estimation of mean-model coefficients under Markov noise"""

    def structured_precision(self, kernel: AnyKernel, grid, tol: Optional[float] = None) -> StructuredInverse:
        """
        K^-1 through the structured path matching the kernel:
        wiener / ou from the gamma coefficients, table through compress, the
        coupled 2D kernel through its transition blocks.
        """
        if isinstance(kernel, Example2DKernel):
            diag_blocks, super_blocks = kernel_service.covariance_blocks(kernel, grid)
            gen = BlockGeneratorForm(
                diag_blocks=diag_blocks,
                trans_blocks=block_markov_service.transition_blocks(diag_blocks, super_blocks, tol),
            )
            return block_markov_service.invert(gen, tol)

        if isinstance(kernel, TableKernel):
            gen = scalar_markov_service.compress(kernel_service.covariance_matrix(kernel, grid))
        else:
            gen = kernel_service.scalar_generator(kernel, grid)
        return scalar_markov_service.invert(gen, tol)

    def blue_estimate(self, model: LinearMeanModel, Z, Kinv: StructuredInverse) -> EstimateResult:
        """
        Generalized least squares with a structured precision operator

        Args:
            model: design F^T as an (N, p) table
            Z: N measurements, point-major for vector processes
            Kinv: structured inverse of the measurement covariance
        Returns:
            EstimateResult(B, D, residual_norm)
        Raises:
            RankDeficientDesign: smallest Cholesky pivot of F K^-1 F^T <= RANK_TOL * largest
        """
        X = model.design
        Z = np.asarray(Z, dtype=float).ravel()
        if Z.size != X.shape[0] or Kinv.size != X.shape[0]:
            raise DimensionMismatch(
                f"{Z.size} measurements, {X.shape[0]} design rows, precision of size {Kinv.size}"
            )

        weighted = Kinv.matmat(X)
        normal = X.T @ weighted
        normal = (normal + normal.T) / 2

        try:
            factor = linalg.cho_factor(normal, lower=True)
        except linalg.LinAlgError:
            logger.warning("normal_matrix_not_positive", parameters=model.parameters)
            raise RankDeficientDesign(0.0)

        pivots = np.diag(factor[0]) ** 2
        ratio = float(pivots.min() / pivots.max())
        if ratio <= settings.RANK_TOL:
            logger.warning("design_rank_deficient", ratio=ratio)
            raise RankDeficientDesign(ratio)

        D = linalg.cho_solve(factor, np.eye(model.parameters))
        D = (D + D.T) / 2
        B = D @ (weighted.T @ Z)

        residual = Z - X @ B
        residual_norm = float(np.sqrt(max(residual @ Kinv.matvec(residual), 0.0)))

        logger.info("blue_estimated", parameters=model.parameters, residual_norm=residual_norm)
        return EstimateResult(B=B, D=D, residual_norm=residual_norm)

    def predicted_mean(self, model: LinearMeanModel, B, index: int) -> Union[float, np.ndarray]:
        """f(t_index)^T B, 0-based index; a vector of component means when m > 1"""
        if not 0 <= index < model.points:
            raise DimensionMismatch(f"index {index} outside a grid of {model.points} points")
        m = model.components
        values = model.design[index * m:(index + 1) * m] @ np.asarray(B, dtype=float)
        return float(values[0]) if m == 1 else values

    def estimate(self, model: LinearMeanModel, Z, kernel: AnyKernel, grid, tol: Optional[float] = None) -> EstimateResult:
        return self.blue_estimate(model, Z, self.structured_precision(kernel, grid, tol))


blue_service = BlueService()
