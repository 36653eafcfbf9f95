from typing import Optional

import numpy as np
import structlog
from scipy import linalg

from mbinv.config import get_settings
from mbinv.exceptions import InputError, NotPositiveDefinite, SingularLocalBlock
from mbinv.models.matrices import (
    BandedGeneratorForm,
    BandedMatrix,
    Determinant,
    OperationCount,
    StructureReport,
    TransitionVectorSet,
)
from mbinv.services.dense_oracle_service import dense_oracle_service

logger = structlog.get_logger()
settings = get_settings()


def _lookup(padded: np.ndarray, rows, cols) -> np.ndarray:
    rows = np.asarray(rows)
    cols = np.asarray(cols)
    return padded[np.abs(rows - cols), np.minimum(rows, cols)]


class BandedMarkovService:
    """
    Symmetric matrices with banded inverse (covariances of m-connected Markov processes).

    Transition vectors are stored left-padded: row i-1 of the (n-1, m) array holds
    Gamma_i against the columns i-m+1..i (1-based), zeros where those do not exist.
    """

    def _transitions(self, K: BandedGeneratorForm, tol: float, ops: OperationCount) -> np.ndarray:
        n, m = K.n, K.m
        padded = K.padded
        gammas = np.zeros((n - 1, m))

        # windows shorter than m near the top
        for i in range(min(m - 1, n - 1)):
            window = np.arange(0, i + 1)
            local = _lookup(padded, window[:, None], window[None, :])
            rhs = _lookup(padded, window, i + 1)
            sv = np.linalg.svd(local, compute_uv=False)
            if sv[-1] <= tol * sv[0]:
                logger.warning("local_block_singular", index=i + 1)
                raise SingularLocalBlock(i + 1)
            gammas[i, m - window.size:] = np.linalg.solve(local, rhs)

        if n - 1 >= m:
            ends = np.arange(m - 1, n - 1)
            rows = ends[:, None] - m + 1 + np.arange(m)
            local = _lookup(padded, rows[:, :, None], rows[:, None, :])
            rhs = _lookup(padded, rows, ends[:, None] + 1)

            sv = np.linalg.svd(local, compute_uv=False)
            weak = np.flatnonzero(sv[:, -1] <= tol * sv[:, 0])
            if weak.size:
                index = int(ends[weak[0]]) + 1
                logger.warning("local_block_singular", index=index)
                raise SingularLocalBlock(index)
            gammas[ends] = np.linalg.solve(local, rhs[..., None])[..., 0]

        ops.multiply((n - 1) * (m ** 3 // 3 + m * m))
        return gammas

    def _alphas(self, K: BandedGeneratorForm, gammas: np.ndarray, tol: float, ops: OperationCount) -> np.ndarray:
        # alpha_1 = k_11, alpha_i = k_ii - k_{i,[i-1]}^T Gamma_{i-1}
        n, m = K.n, K.m
        padded = K.padded
        r = np.arange(1, n)
        cols = np.maximum(r[:, None] - m + np.arange(m), 0)
        couplings = _lookup(padded, r[:, None], cols)

        alphas = K.diagonals[0].copy()
        alphas[1:] -= np.sum(couplings * gammas, axis=1)
        ops.multiply((n - 1) * m)

        weak = np.flatnonzero(alphas <= tol * np.max(np.abs(K.diagonals[0])))
        if weak.size:
            logger.warning("innovation_variance_not_positive", index=int(weak[0]) + 1, alpha=float(alphas[weak[0]]))
            raise NotPositiveDefinite(int(weak[0]) + 1)
        return alphas

    def transition_vectors(self, K: BandedGeneratorForm, tol: Optional[float] = None) -> TransitionVectorSet:
        """Gamma_i solving K_m[i] Gamma_i = k_[i],i+1, length min(i, m)"""
        tol = settings.PIVOT_TOL if tol is None else tol
        gammas = self._transitions(K, tol, OperationCount())
        lengths = np.minimum(np.arange(1, K.n), K.m)
        vectors = tuple(gammas[i, K.m - lengths[i]:].copy() for i in range(K.n - 1))
        return TransitionVectorSet(m=K.m, vectors=vectors)

    def expand(self, K: BandedGeneratorForm, tol: Optional[float] = None) -> np.ndarray:
        """
        Full symmetric matrix from its band

        Out-of-band entries follow k_ij = k_{i,[j-1]}^T K_m^-1[j-1] k_{[j-1],j}, filled column
        by column so every entry on the right-hand side already exists.
        """
        tol = settings.PIVOT_TOL if tol is None else tol
        n, m = K.n, K.m
        gammas = self._transitions(K, tol, OperationCount())

        out = K.band_dense()
        for col in range(m + 1, n):
            window = slice(col - m, col)
            out[: col - m, col] = out[: col - m, window] @ gammas[col - 1]
            out[col, : col - m] = out[: col - m, col]
        return out

    def invert(self, K: BandedGeneratorForm, tol: Optional[float] = None) -> BandedMatrix:
        """
        Banded inverse with half-width m

        Built from the bordering recursion with vector couplings: the inverse is
        sum_r b_r b_r^T / alpha_r with b_r = e_r - Gamma_{r-1} placed on the m
        predecessors of r. Accumulated straight into diagonal-major storage.

        Raises:
            SingularLocalBlock: a local m x m block is singular
            NotPositiveDefinite: alpha_i <= tol * max k_ii
        """
        tol = settings.PIVOT_TOL if tol is None else tol
        ops = OperationCount()
        n, m = K.n, K.m

        gammas = self._transitions(K, tol, ops)
        alphas = self._alphas(K, gammas, tol, ops)

        # coef[r, q] multiplies column r - m + q
        coef = np.zeros((n, m + 1))
        coef[1:, :m] = -gammas
        coef[:, m] = 1.0

        diagonals = []
        for offset in range(m + 1):
            values = np.zeros(n - offset)
            for q in range(m - offset + 1):
                contribution = coef[:, q] * coef[:, q + offset] / alphas
                values[: n - m + q] += contribution[m - q:]
                ops.multiply(2 * n)
            diagonals.append(values)

        logger.info("banded_inverse_built", n=n, m=m, multiplications=ops.multiplications)
        return BandedMatrix(n=n, m=m, diagonals=tuple(diagonals), alphas=alphas, operations=ops)

    def closed_form_entries(self, K: BandedGeneratorForm, tol: Optional[float] = None) -> BandedMatrix:
        """
        Entry-by-entry evaluation of the banded inverse (1-based indices):

            c_ii     = 1/alpha_i + sum_{j=0..w} gamma_{i+j, m-j}^2 / alpha_{i+j+1}
            c_i,i+k  = -gamma_{i+k-1, m-k+1} / alpha_{i+k}
                       + sum_{j=k..w} gamma_{i+j, m-j} gamma_{i+j, m+k-j} / alpha_{i+j+1}

        where gamma_{l,p} is the p-th entry of the left-padded Gamma_l and
        w = min(m - 1, n - i - 1). Empty sums are 0.
        """
        tol = settings.PIVOT_TOL if tol is None else tol
        ops = OperationCount()
        n, m = K.n, K.m
        gammas = self._transitions(K, tol, ops)
        alphas = self._alphas(K, gammas, tol, ops)

        def gamma(l: int, p: int) -> float:
            return gammas[l - 1, p - 1]

        def alpha(i: int) -> float:
            return alphas[i - 1]

        diagonals = [np.zeros(n - offset) for offset in range(m + 1)]
        for i in range(1, n + 1):
            w = min(m - 1, n - i - 1)
            diagonals[0][i - 1] = 1.0 / alpha(i) + sum(
                gamma(i + j, m - j) ** 2 / alpha(i + j + 1) for j in range(0, w + 1)
            )
            for k in range(1, min(m, n - i) + 1):
                diagonals[k][i - 1] = -gamma(i + k - 1, m - k + 1) / alpha(i + k) + sum(
                    gamma(i + j, m - j) * gamma(i + j, m + k - j) / alpha(i + j + 1)
                    for j in range(k, w + 1)
                )

        return BandedMatrix(n=n, m=m, diagonals=tuple(diagonals), alphas=alphas, operations=ops)

    def determinant(self, K: BandedGeneratorForm, tol: Optional[float] = None) -> Determinant:
        tol = settings.PIVOT_TOL if tol is None else tol
        ops = OperationCount()
        alphas = self._alphas(K, self._transitions(K, tol, ops), tol, ops)
        minors = np.cumprod(alphas)
        return Determinant(value=float(minors[-1]), leading_minors=minors)

    def connectivity_test(self, M, m: int, tol: Optional[float] = None) -> StructureReport:
        """
        Is the symmetric matrix M the covariance of an m-connected process?

        Every out-of-band entry must match its reconstruction from the band within
        tol * max|M|. m = 0 means M must be diagonal.
        """
        M = np.asarray(M, dtype=float)
        dense_oracle_service.check_symmetric(M)
        tol = settings.STRUCTURE_TOL if tol is None else tol
        n = M.shape[0]
        if m < 0:
            raise InputError("half-bandwidth must be non-negative")
        threshold = tol * float(np.max(np.abs(M)))

        if m >= n - 1:
            return StructureReport(passed=True, residual=0.0, threshold=threshold)

        if m == 0:
            residual = np.abs(M - np.diag(np.diag(M)))
        else:
            residual = np.abs(self.expand(BandedGeneratorForm.from_dense(M, m)) - M)

        worst = np.unravel_index(np.argmax(np.triu(residual)), residual.shape)
        value = float(residual[worst])
        report = StructureReport(
            passed=value <= threshold,
            residual=value,
            threshold=threshold,
            row=int(worst[0]) + 1,
            col=int(worst[1]) + 1,
        )
        logger.info("connectivity_tested", m=m, passed=report.passed, residual=value)
        return report

    def storage_count(self, n: int, m: int) -> int:
        """Independent values of an n x n matrix with half-bandwidth m: (2m+1)n - m(m+1)"""
        if n < 1 or not 0 <= m <= n - 1:
            raise InputError(f"need 0 <= m <= n - 1 (n={n}, m={m})")
        return (2 * m + 1) * n - m * (m + 1)

    def random_instance(self, n: int, m: int, seed: Optional[int] = None) -> BandedGeneratorForm:
        """
        SPD m-connected instance: x_r = sum of Gamma-weighted predecessors + innovation,
        innovation variances in [0.5, 2].
        """
        rng = np.random.default_rng(settings.DEFAULT_SEED if seed is None else seed)
        unit = np.eye(n)
        for r in range(1, n):
            width = min(r, m)
            unit[r, r - width: r] = -rng.uniform(-0.5, 0.5, size=width) / np.sqrt(m)
        variances = rng.uniform(0.5, 2.0, size=n)

        # K = B^-1 D B^-T with B the unit lower-triangular innovation map
        factor = linalg.solve_triangular(unit, np.diag(np.sqrt(variances)), lower=True, unit_diagonal=True)
        covariance = factor @ factor.T
        return BandedGeneratorForm.from_dense(covariance, m)


banded_markov_service = BandedMarkovService()
