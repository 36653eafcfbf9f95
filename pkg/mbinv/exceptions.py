"""Error hierarchy shared by the services and the command line.

Every class carries the process exit code the CLI reports for it. Indices
stored on the exceptions are 1-based, like the formulas in the docstrings.
"""
from typing import Optional


class MarkovMatrixError(Exception):
    """Base error for the package."""

    exit_code: int = 1


class InputError(MarkovMatrixError, ValueError):
    """Inputs violate the contract: shape, ordering, unknown kinds."""

    exit_code = 1


class InvalidGrid(InputError):
    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(f"invalid sampling grid: {reason}")


class DimensionMismatch(InputError):
    pass


class StructureError(MarkovMatrixError):
    """The matrix is not a member of the claimed class."""

    exit_code = 2


class NotGeneratorForm(StructureError):
    def __init__(self, row: int, col: int, residual: float):
        self.row = row
        self.col = col
        self.residual = residual
        super().__init__(
            f"entry ({row},{col}) deviates from its generator reconstruction by {residual:.3e}"
        )


class NotSymmetric(StructureError):
    def __init__(self, residual: float):
        self.residual = residual
        super().__init__(f"matrix is not symmetric (max |M_ij - M_ji| = {residual:.3e})")


class DegenerateDiagonal(StructureError):
    def __init__(self, index: int):
        self.index = index
        super().__init__(f"diagonal entry {index} is zero; couplings are undetermined")


class SingularityError(MarkovMatrixError):
    """A pivot, minor or block fell below the singularity threshold."""

    exit_code = 3
    what = "pivot"

    def __init__(self, index: Optional[int] = None):
        self.index = index
        where = f" at index {index}" if index is not None else ""
        super().__init__(f"{self.what} is numerically singular{where}")


class SingularMatrix(SingularityError):
    what = "elimination pivot"


class SingularLeadingMinor(SingularityError):
    what = "leading principal minor"


class SingularLocalBlock(SingularityError):
    what = "local covariance block"


class SingularDiagonalBlock(SingularityError):
    what = "diagonal block"


class SingularSchurBlock(SingularityError):
    what = "Schur complement block"


class NotPositiveDefinite(SingularityError):
    what = "positive-definite pivot"


class ZeroVariance(SingularityError):
    what = "variance"


class RankDeficientDesign(MarkovMatrixError):
    exit_code = 4

    def __init__(self, ratio: float):
        self.ratio = ratio
        super().__init__(f"design is rank deficient (pivot ratio {ratio:.3e})")
