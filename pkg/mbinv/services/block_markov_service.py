from typing import Optional

import numpy as np
import structlog

from mbinv.config import get_settings
from mbinv.exceptions import DimensionMismatch, InputError, SingularDiagonalBlock, SingularSchurBlock
from mbinv.models.matrices import (
    BlockGeneratorForm,
    BlockTridiagonalMatrix,
    Determinant,
    OperationCount,
    OperationModel,
    StructureReport,
)
from mbinv.services.dense_oracle_service import dense_oracle_service

logger = structlog.get_logger()
settings = get_settings()


def _first_singular(blocks: np.ndarray, tol: float) -> Optional[int]:
    """0-based index of the first block with min/max singular value <= tol"""
    if blocks.shape[0] == 0:
        return None
    sv = np.linalg.svd(blocks, compute_uv=False)
    weak = np.flatnonzero(sv[:, -1] <= tol * sv[:, 0])
    return int(weak[0]) if weak.size else None


def _product(left: np.ndarray, right: np.ndarray, ops: OperationCount) -> np.ndarray:
    m = left.shape[-1]
    ops.multiply(left.shape[0] * m ** 3)
    return left @ right


def _symmetric_product(left: np.ndarray, right: np.ndarray, ops: OperationCount) -> np.ndarray:
    """left @ right for products known to be symmetric: upper triangle only, mirrored"""
    batch, m = left.shape[0], left.shape[-1]
    iu0, iu1 = np.triu_indices(m)
    upper = np.einsum("btk,bkt->bt", left[:, iu0, :], right[:, :, iu1])
    ops.multiply(batch * iu0.size * m)

    out = np.empty((batch, m, m))
    out[:, iu0, iu1] = upper
    out[:, iu1, iu0] = upper
    return out


class BlockMarkovService:
    """
    Matrices with block-tridiagonal inverse: covariances of m-dimensional Markov processes
    sampled at n points, point-major (row i*m + c is component c at point i).
    """

    def transition_blocks(self, diag_blocks, super_blocks, tol: Optional[float] = None) -> np.ndarray:
        """Gamma_i solving K_ii Gamma_i = K_{i,i+1}"""
        tol = settings.PIVOT_TOL if tol is None else tol
        diag_blocks = np.asarray(diag_blocks, dtype=float)
        super_blocks = np.asarray(super_blocks, dtype=float)
        n = diag_blocks.shape[0]
        if super_blocks.shape != (n - 1,) + diag_blocks.shape[1:]:
            raise DimensionMismatch("need n - 1 off-diagonal blocks of the diagonal block size")
        if n == 1:
            return np.zeros((0,) + diag_blocks.shape[1:])

        weak = _first_singular(diag_blocks[:-1], tol)
        if weak is not None:
            logger.warning("diagonal_block_singular", index=weak + 1)
            raise SingularDiagonalBlock(weak + 1)

        return np.linalg.solve(diag_blocks[:-1], super_blocks)

    def generator_from_dense(self, M, m: int, tol: Optional[float] = None) -> BlockGeneratorForm:
        blocks = self._blocks(M, m)
        index = np.arange(blocks.shape[0])
        diag_blocks = blocks[index, index]
        super_blocks = blocks[index[:-1], index[1:]]
        return BlockGeneratorForm(
            diag_blocks=diag_blocks,
            trans_blocks=self.transition_blocks(diag_blocks, super_blocks, tol),
        )

    def expand(self, gen: BlockGeneratorForm) -> np.ndarray:
        """
        Dense point-major matrix: K_ij = K_ii Gamma_i ... Gamma_{j-1} for j > i, K_ji = K_ij^T
        """
        n, m = gen.n, gen.m
        out = np.zeros((n * m, n * m))
        view = out.reshape(n, m, n, m)
        index = np.arange(n)
        view[index, :, index, :] = gen.diag_blocks

        current = gen.diag_blocks
        for offset in range(1, n):
            current = current[: n - offset] @ gen.trans_blocks[offset - 1:]
            rows = index[: n - offset]
            view[rows, :, rows + offset, :] = current
            view[rows + offset, :, rows, :] = np.swapaxes(current, 1, 2)
        return out

    def _schur_blocks(self, gen: BlockGeneratorForm, tol: float, ops: OperationCount) -> np.ndarray:
        # A_1 = K_11, A_i = K_ii - Gamma_{i-1}^T K_{i-1,i-1} Gamma_{i-1}
        K, G = gen.diag_blocks, gen.trans_blocks
        A = K.copy()
        if gen.n > 1:
            KG = _product(K[:-1], G, ops)
            A[1:] -= _symmetric_product(np.swapaxes(G, 1, 2), KG, ops)

        weak = _first_singular(A, tol)
        if weak is not None:
            logger.warning("schur_block_singular", index=weak + 1)
            raise SingularSchurBlock(weak + 1)
        return A

    def invert(self, gen: BlockGeneratorForm, tol: Optional[float] = None) -> BlockTridiagonalMatrix:
        """
        Block-tridiagonal inverse

            C_ii     = A_i^-1 + Gamma_i A_{i+1}^-1 Gamma_i^T    (i < n)
            C_nn     = A_n^-1
            C_i,i+1  = -Gamma_i A_{i+1}^-1,   C_i+1,i = C_i,i+1^T
            M_1      = K_22,   M_i = A_{i+1} + Gamma_i^T A_i Gamma_i

        For commuting blocks C_ii equals A_{i+1}^-1 M_i A_i^-1.

        Raises:
            SingularSchurBlock: some A_i is numerically singular
        """
        tol = settings.PIVOT_TOL if tol is None else tol
        ops = OperationCount()
        n, m = gen.n, gen.m
        G = gen.trans_blocks
        GT = np.swapaxes(G, 1, 2)

        A = self._schur_blocks(gen, tol, ops)
        A_inv = np.linalg.inv(A)
        ops.invert(n)

        C_diag = A_inv.copy()
        if n > 1:
            W = _product(G, A_inv[1:], ops)
            C_diag[:-1] += _symmetric_product(W, GT, ops)
            C_super = -W
        else:
            C_super = np.zeros((0, m, m))

        M = np.empty((max(n - 1, 0), m, m))
        if n > 1:
            M[0] = gen.diag_blocks[1]
        if n > 2:
            AG = _product(A[1:-1], G[1:], ops)
            M[1:] = A[2:] + _symmetric_product(GT[1:], AG, ops)

        logger.info(
            "block_tridiagonal_inverse_built",
            n=n,
            m=m,
            multiplications=ops.multiplications,
            inversions=ops.inversions,
        )
        return BlockTridiagonalMatrix(
            diag_blocks=C_diag,
            super_blocks=C_super,
            sub_blocks=np.swapaxes(C_super, 1, 2).copy(),
            A_blocks=A,
            M_blocks=M,
            operations=ops,
        )

    def determinant(self, gen: BlockGeneratorForm, tol: Optional[float] = None) -> Determinant:
        """prod det(A_i); leading_minors[k] is the determinant of the leading k+1 block rows"""
        tol = settings.PIVOT_TOL if tol is None else tol
        A = self._schur_blocks(gen, tol, OperationCount())
        minors = np.cumprod(np.linalg.det(A))
        return Determinant(value=float(minors[-1]), leading_minors=minors)

    def block_determinants(self, inverse: BlockTridiagonalMatrix) -> np.ndarray:
        return np.linalg.det(inverse.A_blocks)

    def _blocks(self, M, m: int) -> np.ndarray:
        """(n, n, m, m) view: blocks[i, j] = K(t_i, t_j)"""
        M = np.asarray(M, dtype=float)
        if m < 1 or M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] % m:
            raise DimensionMismatch(f"a {M.shape} matrix cannot be split into {m}x{m} blocks")
        n = M.shape[0] // m
        return M.reshape(n, m, n, m).transpose(0, 2, 1, 3)

    def markov_block_test(self, M, m: int, tol: Optional[float] = None) -> StructureReport:
        """
        K(s, t) = K(s, tau) K(tau, tau)^-1 K(tau, t) for every s < tau < t (block indices)

        The report locates the worst triple as row=s, col=t, pivot=tau (1-based).

        Raises:
            NotSymmetric: M differs from M^T by more than SYMMETRY_TOL * max|M|
        """
        tol = settings.STRUCTURE_TOL if tol is None else tol
        dense_oracle_service.check_symmetric(M)
        blocks = self._blocks(M, m)
        n = blocks.shape[0]
        threshold = tol * float(np.max(np.abs(M)))

        index = np.arange(n)
        diag_blocks = blocks[index, index]
        if n < 3:
            return StructureReport(passed=True, residual=0.0, threshold=threshold)

        weak = _first_singular(diag_blocks[1:-1], settings.PIVOT_TOL)
        if weak is not None:
            raise SingularDiagonalBlock(weak + 2)

        worst, location = 0.0, (None, None, None)
        for tau in range(1, n - 1):
            left = blocks[:tau, tau]
            right = blocks[tau, tau + 1:]
            middle = np.linalg.inv(diag_blocks[tau])
            predicted = np.einsum("aij,jk,bkl->abil", left, middle, right)
            residual = np.abs(predicted - blocks[:tau, tau + 1:]).max(axis=(2, 3))
            s, t = np.unravel_index(np.argmax(residual), residual.shape)
            if residual[s, t] > worst:
                worst = float(residual[s, t])
                location = (int(s) + 1, tau + 1 + int(t) + 1, tau + 1)

        report = StructureReport(
            passed=worst <= threshold,
            residual=worst,
            threshold=threshold,
            row=location[0],
            col=location[1],
            pivot=location[2],
        )
        logger.info("markov_block_tested", m=m, passed=report.passed, residual=worst)
        return report

    def op_count_model(self, n: int, m: int, measured: Optional[OperationCount] = None) -> OperationModel:
        """
        Multiplications n m^2 (4m + 3) - m^2 (11m + 7) / 2 and additions
        (5n - 6.5) m^3 - (2n - 2.5) m^2 + (n - 1) m. Both numerators are even.
        """
        if n < 2 or m < 1:
            raise InputError(f"operation model needs n >= 2 and m >= 1 (n={n}, m={m})")
        mult = n * m * m * (4 * m + 3) - m * m * (11 * m + 7) // 2
        add = ((10 * n - 13) * m ** 3 - (4 * n - 5) * m * m) // 2 + (n - 1) * m
        return OperationModel(
            n=n,
            m=m,
            predicted_mult=mult,
            predicted_add=add,
            measured_mult=measured.multiplications if measured else None,
            measured_inversions=measured.inversions if measured else None,
        )

    def memory_ratio(self, n: int, m: int) -> float:
        """Dense symmetric storage N(N+1)/2 over generator storage (2n-1) m^2, N = n m"""
        if n < 1 or m < 1:
            raise InputError(f"memory ratio needs n >= 1 and m >= 1 (n={n}, m={m})")
        N = n * m
        return N * (N + 1) / 2 / ((2 * n - 1) * m * m)

    def component_major_permutation(self, n: int, m: int) -> np.ndarray:
        """perm[c*n + i] = i*m + c; M[perm][:, perm] is the component-major layout"""
        component, point = np.divmod(np.arange(n * m), n)
        return point * m + component

    def to_component_major(self, M, n: int, m: int) -> np.ndarray:
        M = np.asarray(M, dtype=float)
        if M.shape != (n * m, n * m):
            raise DimensionMismatch(f"expected a {n * m}x{n * m} matrix, got {M.shape}")
        perm = self.component_major_permutation(n, m)
        return M[np.ix_(perm, perm)]

    def random_instance(self, n: int, m: int, seed: Optional[int] = None) -> BlockGeneratorForm:
        """
        SPD instance of x_{i+1} = Gamma_i^T x_i + e_{i+1}: spectral norm of Gamma_i is 0.8,
        innovation covariances A_i are SPD with eigenvalues at least 0.5.
        """
        rng = np.random.default_rng(settings.DEFAULT_SEED if seed is None else seed)
        G = rng.normal(size=(n - 1, m, m))
        if n > 1:
            G *= 0.8 / np.linalg.norm(G, ord=2, axis=(1, 2))[:, None, None]

        Q = rng.normal(size=(n, m, m))
        innovations = Q @ np.swapaxes(Q, 1, 2) / m + 0.5 * np.eye(m)

        K = np.empty((n, m, m))
        K[0] = innovations[0]
        for i in range(n - 1):
            K[i + 1] = G[i].T @ K[i] @ G[i] + innovations[i + 1]
        return BlockGeneratorForm(diag_blocks=K, trans_blocks=G)


block_markov_service = BlockMarkovService()
