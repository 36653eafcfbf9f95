"""Covariance-function descriptors.

Scalar kernels evaluate k(s, t) and the coupled 2D kernel evaluates the 2x2
matrix K(s, t); both broadcast over array arguments.
"""
from dataclasses import dataclass
from typing import Annotated, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, Field, TypeAdapter, model_validator

from mbinv.exceptions import InvalidGrid


@dataclass(frozen=True)
class SamplingGrid:
    """Strictly increasing points t_1 < ... < t_n"""
    points: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float).ravel()
        if points.size < 1:
            raise InvalidGrid("grid is empty")
        if not np.all(np.isfinite(points)):
            raise InvalidGrid("grid contains non-finite points")
        if np.any(np.diff(points) <= 0):
            raise InvalidGrid("points must be strictly increasing")
        object.__setattr__(self, "points", points)

    @property
    def n(self) -> int:
        return self.points.size

    @classmethod
    def uniform(cls, tau: float, n: int, start: Optional[float] = None) -> "SamplingGrid":
        """t_i = start + (i - 1) tau, with start defaulting to tau"""
        first = tau if start is None else start
        return cls(first + tau * np.arange(n))


class WienerKernel(BaseModel):
    """sigma2 * min(s, t)"""
    kind: Literal["wiener"] = "wiener"
    sigma2: float = Field(gt=0)
    dimension: Literal[1] = 1

    def evaluate(self, s, t) -> np.ndarray:
        return self.sigma2 * np.minimum(s, t)


class OUKernel(BaseModel):
    """sigma2 * exp(-alpha |s - t|)"""
    kind: Literal["ou"] = "ou"
    sigma2: float = Field(gt=0)
    alpha: float = Field(gt=0)
    dimension: Literal[1] = 1

    def evaluate(self, s, t) -> np.ndarray:
        return self.sigma2 * np.exp(-self.alpha * np.abs(np.subtract(s, t)))


class TableKernel(BaseModel):
    """Covariance tabulated on a fixed set of points"""
    kind: Literal["table"] = "table"
    grid: List[float] = Field(min_length=1)
    values: List[List[float]]
    dimension: Literal[1] = 1

    @model_validator(mode="after")
    def check_table(self):
        n = len(self.grid)
        if len(self.values) != n or any(len(row) != n for row in self.values):
            raise ValueError(f"values must be a {n}x{n} table")
        return self

    def _locate(self, points) -> np.ndarray:
        table_points = np.asarray(self.grid, dtype=float)
        points = np.asarray(points, dtype=float)
        index = np.clip(np.searchsorted(table_points, points), 0, table_points.size - 1)
        if not np.all(np.isclose(table_points[index], points, rtol=1e-12, atol=1e-12)):
            raise InvalidGrid("table kernel evaluated away from its tabulated points")
        return index

    def evaluate(self, s, t) -> np.ndarray:
        values = np.asarray(self.values, dtype=float)
        return values[self._locate(s), self._locate(t)]


class Example2DKernel(BaseModel):
    """
    Wiener component and Ornstein-Uhlenbeck component driven by one white noise.

    k11 = sigma1^2 min(s, t)
    k22 = sigma2^2 / (2 alpha) [exp(-alpha |s - t|) - exp(-alpha (s + t))]
    k12 = (sigma1 sigma2 / alpha) [exp(-alpha (t - s)) - exp(-alpha t)]    for s <= t
        = (sigma1 sigma2 / alpha) [1 - exp(-alpha t)]                      for s > t
    k21(s, t) = k12(t, s)
    """
    kind: Literal["example2d"] = "example2d"
    sigma1: float = Field(gt=0)
    sigma2: float = Field(gt=0)
    alpha: float = Field(gt=0)
    dimension: Literal[2] = 2

    def cross(self, s, t) -> np.ndarray:
        s, t = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
        scale = self.sigma1 * self.sigma2 / self.alpha
        # s == t falls in the s <= t branch; both branches agree there
        before = np.exp(-self.alpha * (t - np.minimum(s, t))) - np.exp(-self.alpha * t)
        after = 1.0 - np.exp(-self.alpha * t)
        return scale * np.where(s <= t, before, after)

    def evaluate(self, s, t) -> np.ndarray:
        s, t = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
        a = self.alpha
        out = np.empty(s.shape + (2, 2))
        out[..., 0, 0] = self.sigma1 ** 2 * np.minimum(s, t)
        out[..., 0, 1] = self.cross(s, t)
        out[..., 1, 0] = self.cross(t, s)
        out[..., 1, 1] = self.sigma2 ** 2 / (2 * a) * (np.exp(-a * np.abs(s - t)) - np.exp(-a * (s + t)))
        return out


ScalarKernel = Union[WienerKernel, OUKernel, TableKernel]
MatrixKernel = Example2DKernel

Kernel = Annotated[
    Union[WienerKernel, OUKernel, TableKernel, Example2DKernel],
    Field(discriminator="kind"),
]

_kernel_adapter = TypeAdapter(Kernel)


def parse_kernel(data) -> Kernel:
    return _kernel_adapter.validate_python(data)
