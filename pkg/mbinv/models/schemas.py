from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, model_validator
from typing import List, Literal, Optional, Union, Annotated
from enum import Enum

import numpy as np

from mbinv.models.matrices import (
    BandedGeneratorForm,
    BandedMatrix,
    BlockGeneratorForm,
    BlockTridiagonalMatrix,
    ScalarGeneratorForm,
    TridiagonalMatrix,
)

Vector = List[float]
Rows = List[List[float]]


class MatrixKind(str, Enum):
    DENSE = "dense"
    SCALAR_GENERATOR = "scalar_generator"
    TRIDIAGONAL = "tridiagonal"
    BAND = "band"
    BAND_INVERSE = "band_inverse"
    BLOCK = "block"
    BLOCK_TRIDIAGONAL = "block_tridiagonal"


class DenseDocument(BaseModel):
    """Row-major dense matrix"""
    kind: Literal["dense"] = "dense"
    rows: int = Field(ge=1)
    cols: int = Field(ge=1)
    data: Rows

    @model_validator(mode="after")
    def check_shape(self):
        if len(self.data) != self.rows or any(len(row) != self.cols for row in self.data):
            raise ValueError(f"data must be {self.rows} rows of {self.cols} values")
        return self

    @classmethod
    def from_array(cls, M: np.ndarray) -> "DenseDocument":
        M = np.atleast_2d(np.asarray(M, dtype=float))
        return cls(rows=M.shape[0], cols=M.shape[1], data=M.tolist())

    def to_array(self) -> np.ndarray:
        return np.asarray(self.data, dtype=float)


class ScalarGeneratorDocument(BaseModel):
    """3n-2 value generator of a matrix with tridiagonal inverse"""
    model_config = ConfigDict(populate_by_name=True)

    kind: Literal["scalar_generator"] = "scalar_generator"
    diag: Vector = Field(min_length=1)
    gamma: Vector
    lam: Vector = Field(alias="lambda")

    @classmethod
    def from_form(cls, gen: ScalarGeneratorForm) -> "ScalarGeneratorDocument":
        return cls(diag=gen.diag.tolist(), gamma=gen.gamma.tolist(), lam=gen.lam.tolist())

    def to_form(self) -> ScalarGeneratorForm:
        return ScalarGeneratorForm(diag=self.diag, gamma=self.gamma, lam=self.lam)


class TridiagonalDocument(BaseModel):
    kind: Literal["tridiagonal"] = "tridiagonal"
    main: Vector
    upper: Vector
    lower: Vector
    alphas: Vector
    mus: Vector

    @classmethod
    def from_matrix(cls, inv: TridiagonalMatrix) -> "TridiagonalDocument":
        return cls(
            main=inv.main.tolist(),
            upper=inv.upper.tolist(),
            lower=inv.lower.tolist(),
            alphas=inv.alphas.tolist(),
            mus=inv.mus.tolist(),
        )


class BandDocument(BaseModel):
    """In-band entries, one sequence per offset 0..m"""
    kind: Literal["band"] = "band"
    n: int = Field(ge=2)
    m: int = Field(ge=1)
    diagonals: Rows

    @classmethod
    def from_form(cls, K: BandedGeneratorForm) -> "BandDocument":
        return cls(n=K.n, m=K.m, diagonals=[values.tolist() for values in K.diagonals])

    def to_form(self) -> BandedGeneratorForm:
        return BandedGeneratorForm(n=self.n, m=self.m, diagonals=tuple(self.diagonals))


class BandInverseDocument(BaseModel):
    kind: Literal["band_inverse"] = "band_inverse"
    n: int
    m: int
    diagonals: Rows
    alphas: Vector

    @classmethod
    def from_matrix(cls, inv: BandedMatrix) -> "BandInverseDocument":
        return cls(
            n=inv.n,
            m=inv.m,
            diagonals=[values.tolist() for values in inv.diagonals],
            alphas=inv.alphas.tolist(),
        )


class BlockDocument(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    kind: Literal["block"] = "block"
    n: int = Field(ge=1)
    m: int = Field(ge=1)
    K_diag: List[Rows]
    Gamma: List[Rows] = Field(default_factory=list)

    @classmethod
    def from_form(cls, gen: BlockGeneratorForm) -> "BlockDocument":
        return cls(n=gen.n, m=gen.m, K_diag=gen.diag_blocks.tolist(), Gamma=gen.trans_blocks.tolist())

    def to_form(self) -> BlockGeneratorForm:
        gen = BlockGeneratorForm(
            diag_blocks=np.asarray(self.K_diag, dtype=float),
            trans_blocks=np.asarray(self.Gamma, dtype=float),
        )
        if gen.n != self.n or gen.m != self.m:
            raise ValueError(f"declared n={self.n}, m={self.m} but blocks give n={gen.n}, m={gen.m}")
        return gen


class BlockTridiagonalDocument(BaseModel):
    kind: Literal["block_tridiagonal"] = "block_tridiagonal"
    C_diag: List[Rows]
    C_super: List[Rows]
    A: List[Rows]
    M: List[Rows]

    @classmethod
    def from_matrix(cls, inv: BlockTridiagonalMatrix) -> "BlockTridiagonalDocument":
        return cls(
            C_diag=inv.diag_blocks.tolist(),
            C_super=inv.super_blocks.tolist(),
            A=inv.A_blocks.tolist(),
            M=inv.M_blocks.tolist(),
        )


MatrixDocument = Annotated[
    Union[
        DenseDocument,
        ScalarGeneratorDocument,
        TridiagonalDocument,
        BandDocument,
        BandInverseDocument,
        BlockDocument,
        BlockTridiagonalDocument,
    ],
    Field(discriminator="kind"),
]

_matrix_adapter = TypeAdapter(MatrixDocument)


def parse_matrix_document(data) -> MatrixDocument:
    """Validate a decoded JSON matrix by its kind"""
    return _matrix_adapter.validate_python(data)


class GridDocument(BaseModel):
    """Sampling grid as {"points": [...]}"""
    points: Vector = Field(min_length=1)


class InversionReport(BaseModel):
    """Summary written to stderr by `mbinv invert`"""
    kind: MatrixKind
    size: int
    determinant: float
    alphas: Optional[Vector] = None
    block_determinants: Optional[Vector] = None
    multiplications: int = 0
    inversions: int = 0


class EstimateDocument(BaseModel):
    """BLUE output"""
    B: Vector
    D: Rows
    residual_norm: float
