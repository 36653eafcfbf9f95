import warnings
from typing import Optional

import numpy as np
import structlog
from scipy import linalg
from scipy.linalg import lapack

from mbinv.config import get_settings
from mbinv.exceptions import (
    DimensionMismatch,
    NotPositiveDefinite,
    NotSymmetric,
    SingularMatrix,
)

logger = structlog.get_logger()
settings = get_settings()


def _square(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
        raise DimensionMismatch(f"expected a non-empty square matrix, got shape {M.shape}")
    return M


class DenseOracleService:
    """Reference dense linear algebra every structured result is checked against"""

    def invert_dense(self, M, tol: Optional[float] = None) -> np.ndarray:
        """
        Inverse through LU with partial pivoting

        Args:
            M: square matrix
            tol: relative pivot threshold, scaled by max |M_ij|
        Returns:
            M^-1
        Examples:
            [[1, .5], [.5, 1]] -> [[4/3, -2/3], [-2/3, 4/3]]
        """
        M = _square(M)
        tol = settings.PIVOT_TOL if tol is None else tol
        n = M.shape[0]
        scale = np.max(np.abs(M))

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", linalg.LinAlgWarning)
            lu, piv = linalg.lu_factor(M, check_finite=True)

        pivots = np.abs(np.diag(lu))
        small = np.flatnonzero(pivots <= tol * scale) if scale > 0 else np.arange(n)
        if small.size:
            logger.warning("dense_pivot_singular", index=int(small[0]) + 1, pivot=float(pivots[small[0]]))
            raise SingularMatrix(int(small[0]) + 1)

        inverse = linalg.lu_solve((lu, piv), np.eye(n))

        residual = float(np.max(np.abs(M @ inverse - np.eye(n))))
        if residual > settings.RESIDUAL_BOUND:
            logger.warning("dense_inverse_residual_high", n=n, residual=residual)

        return inverse

    def determinant_dense(self, M) -> float:
        """Product of LU pivots with the permutation sign; 0.0 for exactly singular input"""
        M = _square(M)

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", linalg.LinAlgWarning)
            lu, piv = linalg.lu_factor(M)

        swaps = int(np.count_nonzero(piv != np.arange(piv.size)))
        sign = -1.0 if swaps % 2 else 1.0
        return float(sign * np.prod(np.diag(lu)))

    def leading_minors_dense(self, M) -> np.ndarray:
        M = _square(M)
        return np.array([self.determinant_dense(M[:k, :k]) for k in range(1, M.shape[0] + 1)])

    def check_symmetric(self, M, tol: Optional[float] = None) -> float:
        """Raise NotSymmetric when max|M_ij - M_ji| > tol * max|M|; returns the asymmetry"""
        M = _square(M)
        tol = settings.SYMMETRY_TOL if tol is None else tol
        asymmetry = float(np.max(np.abs(M - M.T)))
        if asymmetry > tol * np.max(np.abs(M)):
            raise NotSymmetric(asymmetry)
        return asymmetry

    def factor_spd(self, M, tol: Optional[float] = None, symmetry_tol: Optional[float] = None) -> np.ndarray:
        """
        Cholesky factor L with M = L L^T and positive diagonal

        Args:
            M: symmetric matrix
            tol: pivot threshold, L_ii^2 <= tol * max|M| fails (PIVOT_TOL by default)
            symmetry_tol: allowed asymmetry relative to max|M| (SYMMETRY_TOL by default)
        Examples:
            [[4, 2], [2, 5]] -> [[2, 0], [1, 2]]
            [[1, 2], [2, 1]] -> NotPositiveDefinite
        """
        M = _square(M)
        self.check_symmetric(M, symmetry_tol)
        tol = settings.PIVOT_TOL if tol is None else tol

        factor, info = lapack.dpotrf(M, lower=1, clean=1)
        if info > 0:
            logger.warning("spd_factor_failed", index=info)
            raise NotPositiveDefinite(int(info))
        if info < 0:
            raise DimensionMismatch(f"illegal value in argument {-info} of dpotrf")

        pivots = np.diag(factor) ** 2
        weak = np.flatnonzero(pivots <= tol * np.max(np.abs(M)))
        if weak.size:
            raise NotPositiveDefinite(int(weak[0]) + 1)

        return np.tril(factor)

    def gls_dense(self, design, covariance, Z):
        """
        Generalized least squares with an explicit dense inverse

        Returns:
            (B, D) with D = (X^T K^-1 X)^-1 and B = D X^T K^-1 Z
        """
        X = np.atleast_2d(np.asarray(design, dtype=float))
        if X.shape[0] == 1 and np.ndim(design) == 1:
            X = X.T
        Z = np.asarray(Z, dtype=float).ravel()
        precision = self.invert_dense(covariance)
        if precision.shape[0] != X.shape[0] or Z.size != X.shape[0]:
            raise DimensionMismatch("design, covariance and data disagree in length")

        D = self.invert_dense(X.T @ precision @ X)
        B = D @ (X.T @ precision @ Z)
        return B, D


dense_oracle_service = DenseOracleService()
