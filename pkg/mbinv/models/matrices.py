"""Numeric containers for generator forms and structured inverses.

Storage is 0-based; docstrings use the 1-based indexing of the formulas.
"""
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel

from mbinv.config import get_settings
from mbinv.exceptions import DimensionMismatch, InputError, NotSymmetric

settings = get_settings()


class OperationCount(BaseModel):
    """Per-call accumulator of arithmetic work"""
    multiplications: int = 0
    inversions: int = 0

    def multiply(self, count: int) -> None:
        self.multiplications += int(count)

    def invert(self, count: int = 1) -> None:
        self.inversions += int(count)


class OperationModel(BaseModel):
    """Predicted arithmetic of block-tridiagonal inversion, optionally beside a measurement"""
    n: int
    m: int
    predicted_mult: int
    predicted_add: int
    measured_mult: Optional[int] = None
    measured_inversions: Optional[int] = None


class StructureReport(BaseModel):
    """Outcome of a class-membership test, worst entry located 1-based"""
    passed: bool
    residual: float
    threshold: float
    row: Optional[int] = None
    col: Optional[int] = None
    pivot: Optional[int] = None


@dataclass(frozen=True)
class Determinant:
    value: float
    leading_minors: np.ndarray


def _as_vector(values, name: str) -> np.ndarray:
    array = np.asarray(values, dtype=float)
    if array.ndim != 1:
        raise InputError(f"{name} must be one-dimensional")
    return array


@dataclass(frozen=True)
class ScalarGeneratorForm:
    """Compact 3n-2 value form: a_11..a_nn, gamma_1..gamma_{n-1}, lambda_1..lambda_{n-1}.

    Below the diagonal a_ij = a_jj * gamma_j ... gamma_{i-1}; above it
    a_ij = a_ii * lambda_i ... lambda_{j-1}.
    """
    diag: np.ndarray
    gamma: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "diag", _as_vector(self.diag, "diag"))
        object.__setattr__(self, "gamma", _as_vector(self.gamma, "gamma"))
        object.__setattr__(self, "lam", _as_vector(self.lam, "lambda"))
        if self.diag.size < 1:
            raise InputError("generator needs at least one diagonal entry")
        if self.gamma.size != self.diag.size - 1 or self.lam.size != self.diag.size - 1:
            raise DimensionMismatch("gamma and lambda must have length n - 1")

    @property
    def n(self) -> int:
        return self.diag.size

    @property
    def value_count(self) -> int:
        return self.diag.size + self.gamma.size + self.lam.size

    @property
    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.gamma, self.lam))


@dataclass(frozen=True)
class TridiagonalMatrix:
    """
    Inverse of a scalar generator form.

    main[i] = mu_i / (alpha_i alpha_{i+1}) for i < n, main[n] = 1 / alpha_n,
    upper[i] = -lambda_i / alpha_{i+1}, lower[i] = -gamma_i / alpha_{i+1}.
    """
    main: np.ndarray
    upper: np.ndarray
    lower: np.ndarray
    alphas: np.ndarray
    mus: np.ndarray
    operations: OperationCount = field(default_factory=OperationCount, compare=False)

    @property
    def n(self) -> int:
        return self.main.size

    @property
    def size(self) -> int:
        return self.main.size

    def matmat(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        vector = X.ndim == 1
        if vector:
            X = X[:, None]
        if X.shape[0] != self.n:
            raise DimensionMismatch(f"operand has {X.shape[0]} rows, matrix has {self.n}")

        out = self.main[:, None] * X
        out[:-1] += self.upper[:, None] * X[1:]
        out[1:] += self.lower[:, None] * X[:-1]
        return out[:, 0] if vector else out

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.matmat(np.asarray(x, dtype=float).ravel())

    def to_dense(self) -> np.ndarray:
        return np.diag(self.main) + np.diag(self.upper, 1) + np.diag(self.lower, -1)


def _padded_diagonals(diagonals: Tuple[np.ndarray, ...], n: int) -> np.ndarray:
    padded = np.zeros((len(diagonals), n))
    for offset, values in enumerate(diagonals):
        padded[offset, : n - offset] = values
    return padded


@dataclass(frozen=True)
class BandedGeneratorForm:
    """
    In-band entries k_ij, |i - j| <= m, of a symmetric matrix with banded inverse.

    diagonals[k][r] holds k_{r, r+k} (0-based) for offsets k = 0..m.
    """
    n: int
    m: int
    diagonals: Tuple[np.ndarray, ...]

    def __post_init__(self):
        diagonals = tuple(_as_vector(values, "diagonal") for values in self.diagonals)
        object.__setattr__(self, "diagonals", diagonals)
        if self.n < 2 or not 1 <= self.m <= self.n - 1:
            raise InputError(f"half-bandwidth must satisfy 1 <= m <= n - 1 (n={self.n}, m={self.m})")
        if len(diagonals) != self.m + 1:
            raise DimensionMismatch("expected one sequence per offset 0..m")
        for offset, values in enumerate(diagonals):
            if values.size != self.n - offset:
                raise DimensionMismatch(f"diagonal {offset} must hold {self.n - offset} values")

    @classmethod
    def from_dense(cls, M: np.ndarray, m: int) -> "BandedGeneratorForm":
        M = np.asarray(M, dtype=float)
        n = M.shape[0]
        return cls(n=n, m=m, diagonals=tuple(np.diagonal(M, offset).copy() for offset in range(m + 1)))

    @property
    def padded(self) -> np.ndarray:
        return _padded_diagonals(self.diagonals, self.n)

    def entries(self, rows, cols) -> np.ndarray:
        """Vectorized access to in-band entries (0-based indices)"""
        rows = np.asarray(rows)
        cols = np.asarray(cols)
        offsets = np.abs(rows - cols)
        if np.any(offsets > self.m):
            raise InputError("requested entry lies outside the band")
        return self.padded[offsets, np.minimum(rows, cols)]

    def band_dense(self) -> np.ndarray:
        """Dense matrix with the band filled and zeros outside it"""
        out = np.diag(self.diagonals[0])
        for offset in range(1, self.m + 1):
            out += np.diag(self.diagonals[offset], offset) + np.diag(self.diagonals[offset], -offset)
        return out


@dataclass(frozen=True)
class TransitionVectorSet:
    """Gamma_1..Gamma_{n-1}; Gamma_i has length min(i, m)"""
    m: int
    vectors: Tuple[np.ndarray, ...]

    def padded(self) -> np.ndarray:
        """(n-1, m) array, short leading vectors zero-padded on the left"""
        out = np.zeros((len(self.vectors), self.m))
        for index, vector in enumerate(self.vectors):
            out[index, self.m - vector.size:] = vector
        return out


@dataclass(frozen=True)
class BandedMatrix:
    """Symmetric banded inverse; diagonals[k][r] = c_{r, r+k}"""
    n: int
    m: int
    diagonals: Tuple[np.ndarray, ...]
    alphas: np.ndarray
    operations: OperationCount = field(default_factory=OperationCount, compare=False)

    @property
    def size(self) -> int:
        return self.n

    def matmat(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        vector = X.ndim == 1
        if vector:
            X = X[:, None]
        if X.shape[0] != self.n:
            raise DimensionMismatch(f"operand has {X.shape[0]} rows, matrix has {self.n}")

        out = self.diagonals[0][:, None] * X
        for offset in range(1, self.m + 1):
            values = self.diagonals[offset][:, None]
            out[:-offset] += values * X[offset:]
            out[offset:] += values * X[:-offset]
        return out[:, 0] if vector else out

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.matmat(np.asarray(x, dtype=float).ravel())

    def to_dense(self) -> np.ndarray:
        out = np.diag(self.diagonals[0])
        for offset in range(1, self.m + 1):
            out += np.diag(self.diagonals[offset], offset) + np.diag(self.diagonals[offset], -offset)
        return out


def _as_block_stack(values, name: str) -> np.ndarray:
    array = np.asarray(values, dtype=float)
    if array.ndim != 3 or array.shape[1] != array.shape[2]:
        raise InputError(f"{name} must be a stack of square blocks")
    return array


@dataclass(frozen=True)
class BlockGeneratorForm:
    """
    Diagonal blocks K_11..K_nn and transition blocks Gamma_1..Gamma_{n-1}.

    K_ij = K_ii Gamma_i ... Gamma_{j-1} for j > i, and its transpose below.
    """
    diag_blocks: np.ndarray
    trans_blocks: np.ndarray

    def __post_init__(self):
        diag_blocks = _as_block_stack(self.diag_blocks, "K_diag")
        trans_blocks = np.asarray(self.trans_blocks, dtype=float)
        if trans_blocks.size == 0:
            trans_blocks = trans_blocks.reshape(0, diag_blocks.shape[1], diag_blocks.shape[1])
        trans_blocks = _as_block_stack(trans_blocks, "Gamma")
        object.__setattr__(self, "diag_blocks", diag_blocks)
        object.__setattr__(self, "trans_blocks", trans_blocks)
        if diag_blocks.shape[0] < 1:
            raise InputError("block generator needs at least one diagonal block")
        if trans_blocks.shape != (diag_blocks.shape[0] - 1,) + diag_blocks.shape[1:]:
            raise DimensionMismatch("need n - 1 transition blocks of the diagonal block size")

        # diagonal blocks are covariances: symmetric up to SYMMETRY_TOL
        asymmetry = np.max(np.abs(diag_blocks - np.swapaxes(diag_blocks, 1, 2)), axis=(1, 2))
        scale = np.max(np.abs(diag_blocks), axis=(1, 2))
        skewed = np.flatnonzero(asymmetry > settings.SYMMETRY_TOL * scale)
        if skewed.size:
            raise NotSymmetric(float(asymmetry[skewed[0]]))

    @property
    def n(self) -> int:
        return self.diag_blocks.shape[0]

    @property
    def m(self) -> int:
        return self.diag_blocks.shape[1]

    @property
    def size(self) -> int:
        return self.n * self.m

    @property
    def value_count(self) -> int:
        return (2 * self.n - 1) * self.m * self.m


@dataclass(frozen=True)
class BlockTridiagonalMatrix:
    """Block-tridiagonal inverse with the Schur blocks A_i and M_i it was built from"""
    diag_blocks: np.ndarray
    super_blocks: np.ndarray
    sub_blocks: np.ndarray
    A_blocks: np.ndarray
    M_blocks: np.ndarray
    operations: OperationCount = field(default_factory=OperationCount, compare=False)

    @property
    def n(self) -> int:
        return self.diag_blocks.shape[0]

    @property
    def m(self) -> int:
        return self.diag_blocks.shape[1]

    @property
    def size(self) -> int:
        return self.n * self.m

    def matmat(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        vector = X.ndim == 1
        if vector:
            X = X[:, None]
        if X.shape[0] != self.size:
            raise DimensionMismatch(f"operand has {X.shape[0]} rows, matrix has {self.size}")

        blocks = X.reshape(self.n, self.m, -1)
        out = np.einsum("bij,bjp->bip", self.diag_blocks, blocks)
        out[:-1] += np.einsum("bij,bjp->bip", self.super_blocks, blocks[1:])
        out[1:] += np.einsum("bij,bjp->bip", self.sub_blocks, blocks[:-1])
        out = out.reshape(self.size, -1)
        return out[:, 0] if vector else out

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.matmat(np.asarray(x, dtype=float).ravel())

    def to_dense(self) -> np.ndarray:
        n, m = self.n, self.m
        out = np.zeros((n * m, n * m))
        view = out.reshape(n, m, n, m)
        index = np.arange(n)
        view[index, :, index, :] = self.diag_blocks
        if n > 1:
            view[index[:-1], :, index[1:], :] = self.super_blocks
            view[index[1:], :, index[:-1], :] = self.sub_blocks
        return out


@dataclass(frozen=True)
class Example2DBlocks:
    """Closed-form blocks of the coupled Wiener / Ornstein-Uhlenbeck example"""
    K_diag: np.ndarray
    K_super: np.ndarray
    Gamma: np.ndarray
    A: np.ndarray
    A_inv: np.ndarray
    M: np.ndarray
    det_A: np.ndarray


@dataclass(frozen=True)
class LinearMeanModel:
    """
    Design matrix of the mean model, rows point-major: row i*m + c is component c at t_i.

    For m components each basis function gets one coefficient per component (F kron I_m).
    """
    design: np.ndarray
    components: int = 1
    basis: str = "custom"

    def __post_init__(self):
        design = np.asarray(self.design, dtype=float)
        if design.ndim == 1:
            design = design[:, None]
        if design.ndim != 2 or design.shape[0] % self.components:
            raise DimensionMismatch("design rows must be a multiple of the component count")
        object.__setattr__(self, "design", design)

    @property
    def parameters(self) -> int:
        return self.design.shape[1]

    @property
    def points(self) -> int:
        return self.design.shape[0] // self.components

    @classmethod
    def from_basis(cls, spec: str, points, components: int = 1) -> "LinearMeanModel":
        """
        "const" -> f(t) = 1;  "poly:K" -> f(t) = (1, t, ..., t^K)
        """
        t = np.asarray(points, dtype=float).ravel()
        if spec == "const":
            degree = 0
        elif spec.startswith("poly:") and spec[5:].isdigit():
            degree = int(spec[5:])
        else:
            raise InputError(f"unknown basis '{spec}' (expected const or poly:K)")

        F = np.vander(t, degree + 1, increasing=True)
        return cls(design=np.kron(F, np.eye(components)), components=components, basis=spec)

    def mean(self, B: np.ndarray) -> np.ndarray:
        return self.design @ np.asarray(B, dtype=float)


@dataclass(frozen=True)
class EstimateResult:
    """B = D F K^-1 Z with D = (F K^-1 F^T)^-1, and sqrt(r^T K^-1 r) for r = Z - F^T B"""
    B: np.ndarray
    D: np.ndarray
    residual_norm: float
