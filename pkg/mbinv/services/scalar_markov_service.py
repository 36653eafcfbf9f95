from typing import Iterator, Optional

import numpy as np
import structlog

from mbinv.config import get_settings
from mbinv.exceptions import DegenerateDiagonal, DimensionMismatch, NotGeneratorForm, SingularLeadingMinor
from mbinv.models.matrices import Determinant, OperationCount, ScalarGeneratorForm, TridiagonalMatrix

logger = structlog.get_logger()
settings = get_settings()


class ScalarMarkovService:
    """Matrices whose inverse is tridiagonal (covariances of simple Markov processes)"""

    def expand(self, gen: ScalarGeneratorForm) -> np.ndarray:
        """
        Dense matrix of a generator form

        a_ij = a_jj gamma_j ... gamma_{i-1} below the diagonal and
        a_ij = a_ii lambda_i ... lambda_{j-1} above it, for all 1 <= i, j <= n.
        """
        n = gen.n
        out = np.diag(gen.diag).astype(float)
        lower = gen.diag.copy()
        upper = gen.diag.copy()
        for offset in range(1, n):
            # a_{j+d, j} = a_{j+d-1, j} gamma_{j+d-1}
            lower = lower[: n - offset] * gen.gamma[offset - 1:]
            upper = upper[: n - offset] * gen.lam[offset - 1:]
            out += np.diag(lower, -offset) + np.diag(upper, offset)
        return out

    def _alphas(self, gen: ScalarGeneratorForm) -> np.ndarray:
        # alpha_1 = a_11, alpha_i = a_ii - gamma_{i-1} lambda_{i-1} a_{i-1,i-1}
        alphas = gen.diag.copy()
        alphas[1:] -= gen.gamma * gen.lam * gen.diag[:-1]
        return alphas

    def invert(self, gen: ScalarGeneratorForm, tol: Optional[float] = None) -> TridiagonalMatrix:
        """
        Tridiagonal inverse in O(n)

        Args:
            gen: generator form
            tol: pivot threshold relative to max |a_ii|
        Returns:
            TridiagonalMatrix with the alpha and mu sequences it was built from
        Raises:
            SingularLeadingMinor: |alpha_i| <= tol * max |a_ii|
        """
        tol = settings.PIVOT_TOL if tol is None else tol
        ops = OperationCount()
        n = gen.n
        a, g, l = gen.diag, gen.gamma, gen.lam

        alphas = self._alphas(gen)
        ops.multiply(2 * (n - 1))

        threshold = tol * np.max(np.abs(a))
        weak = np.flatnonzero(np.abs(alphas) <= threshold)
        if weak.size:
            logger.warning("leading_minor_singular", index=int(weak[0]) + 1, alpha=float(alphas[weak[0]]))
            raise SingularLeadingMinor(int(weak[0]) + 1)

        # mu_1 = a_22, mu_i = a_{i+1,i+1} - gamma_{i-1} gamma_i lambda_{i-1} lambda_i a_{i-1,i-1}
        mus = a[1:].copy()
        if n > 2:
            mus[1:] -= g[:-1] * g[1:] * l[:-1] * l[1:] * a[:-2]
            ops.multiply(4 * (n - 2))

        main = np.empty(n)
        main[:-1] = mus / (alphas[:-1] * alphas[1:])
        main[-1] = 1.0 / alphas[-1]
        upper = -l / alphas[1:]
        lower = -g / alphas[1:]
        ops.multiply(2 * (n - 1) + 1 + 2 * (n - 1))

        logger.info("tridiagonal_inverse_built", n=n, multiplications=ops.multiplications)
        return TridiagonalMatrix(main=main, upper=upper, lower=lower, alphas=alphas, mus=mus, operations=ops)

    def determinant(self, gen: ScalarGeneratorForm) -> Determinant:
        """Product of the alpha pivots, with every leading-minor determinant"""
        minors = np.cumprod(self._alphas(gen))
        return Determinant(value=float(minors[-1]), leading_minors=minors)

    def compress(self, M, tol: Optional[float] = None) -> ScalarGeneratorForm:
        """
        Generator form of a dense matrix, verified against its expansion

        gamma_i = M_{i+1,i} / M_ii and lambda_i = M_{i,i+1} / M_ii.

        Raises:
            DegenerateDiagonal: M_ii = 0 for some i < n
            NotGeneratorForm: an entry deviates from the reconstruction by more than tol * max|M|
        """
        M = np.asarray(M, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
            raise DimensionMismatch(f"expected a square matrix, got shape {M.shape}")
        tol = settings.STRUCTURE_TOL if tol is None else tol

        diag = np.diag(M).copy()
        zero = np.flatnonzero(diag[:-1] == 0)
        if zero.size:
            raise DegenerateDiagonal(int(zero[0]) + 1)

        gen = ScalarGeneratorForm(
            diag=diag,
            gamma=np.diag(M, -1) / diag[:-1],
            lam=np.diag(M, 1) / diag[:-1],
        )

        residual = np.abs(self.expand(gen) - M)
        worst = np.unravel_index(np.argmax(residual), residual.shape)
        if residual[worst] > tol * np.max(np.abs(M)):
            row, col = int(worst[0]) + 1, int(worst[1]) + 1
            logger.warning("generator_form_rejected", row=row, col=col, residual=float(residual[worst]))
            raise NotGeneratorForm(row, col, float(residual[worst]))

        return gen

    def bordering_steps(self, M, tol: Optional[float] = None) -> Iterator[np.ndarray]:
        """
        Successive inverses of the leading k x k corners, k = 1..n

        With u = A_k^-1 a, v = b A_k^-1 and alpha = a_{k+1,k+1} - b u, where a is the new
        column and b the new row:

            A_{k+1}^-1 = [[A_k^-1 + u v / alpha, -u / alpha], [-v / alpha, 1 / alpha]]
        """
        M = np.asarray(M, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
            raise DimensionMismatch(f"expected a square matrix, got shape {M.shape}")
        tol = settings.PIVOT_TOL if tol is None else tol
        threshold = tol * np.max(np.abs(M))

        if abs(M[0, 0]) <= threshold:
            raise SingularLeadingMinor(1)
        inverse = np.array([[1.0 / M[0, 0]]])
        yield inverse

        for k in range(1, M.shape[0]):
            column, row = M[:k, k], M[k, :k]
            u = inverse @ column
            v = row @ inverse
            alpha = M[k, k] - row @ u
            if abs(alpha) <= threshold:
                logger.warning("bordering_pivot_singular", index=k + 1, alpha=float(alpha))
                raise SingularLeadingMinor(k + 1)

            grown = np.empty((k + 1, k + 1))
            grown[:k, :k] = inverse + np.outer(u, v) / alpha
            grown[:k, k] = -u / alpha
            grown[k, :k] = -v / alpha
            grown[k, k] = 1.0 / alpha
            inverse = grown
            yield inverse

    def bordering_invert(self, M, tol: Optional[float] = None) -> np.ndarray:
        inverse = None
        for inverse in self.bordering_steps(M, tol):
            pass
        return inverse


scalar_markov_service = ScalarMarkovService()
