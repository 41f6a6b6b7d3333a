"""Domain types shared across the package.

Images are stored flat in row-major order: pixel ``(j, k)`` (1-indexed row
``j``, column ``k``) lives at index ``(j - 1) * cols + (k - 1)``.  Coefficient
vectors are stacked coefficient-major, so coefficient ``l`` occupies the slice
``[l * rows * cols, (l + 1) * rows * cols)``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np


class PenaltyKind(str, Enum):
    SCAD2TV = "scad2tv"
    TV_L1 = "tvl1"
    GRAPHNET = "graphnet"

    @classmethod
    def parse(cls, value: "str | PenaltyKind") -> "PenaltyKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "").replace("_", "")
        for kind in cls:
            if kind.value == key or kind.name.replace("_", "").lower() == key:
                return kind
        raise ValueError(f"unknown penalty kind {value!r}")


@dataclass(frozen=True)
class GridShape:
    rows: int
    cols: int

    def __post_init__(self):
        if int(self.rows) != self.rows or int(self.cols) != self.cols:
            raise ValueError("grid dimensions must be integers")
        if self.rows < 2 or self.cols < 2:
            raise ValueError(f"grid must be at least 2x2, got {self.rows}x{self.cols}")

    @property
    def size(self) -> int:
        return self.rows * self.cols

    def index(self, j: int, k: int) -> int:
        """Flat index of the 1-indexed pixel ``(j, k)``."""
        return (j - 1) * self.cols + (k - 1)

    def __str__(self):
        return f"{self.rows}x{self.cols}"


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Image:
    shape: GridShape
    values: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values).ravel()
        if values.size != self.shape.size:
            raise ValueError(
                f"image has {values.size} values, shape {self.shape} needs {self.shape.size}")
        if not np.all(np.isfinite(values)):
            raise ValueError("image values must be finite")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_array(cls, arr) -> "Image":
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError("expected a 2-D array")
        return cls(GridShape(*arr.shape), arr.ravel())

    def to_array(self) -> np.ndarray:
        return self.values.reshape(self.shape.rows, self.shape.cols)

    def __getitem__(self, jk):
        j, k = jk
        return self.values[self.shape.index(j, k)]

    def __eq__(self, other):
        if not isinstance(other, Image):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.values, other.values)


def vectorize(image: Image) -> np.ndarray:
    return image.values.copy()


def devectorize(vec, shape: GridShape) -> Image:
    vec = np.asarray(vec, dtype=np.float64)
    if vec.ndim != 1 or vec.size != shape.size:
        raise ValueError(f"vector of length {vec.size} does not match shape {shape}")
    return Image(shape, vec)


@dataclass(frozen=True, eq=False)
class CoefficientField:
    shape: GridShape
    images: tuple

    def __post_init__(self):
        images = tuple(self.images)
        if not images:
            raise ValueError("a coefficient field needs at least one image")
        for im in images:
            if im.shape != self.shape:
                raise ValueError("all coefficient images must share the field shape")
        object.__setattr__(self, "images", images)

    @property
    def p(self) -> int:
        return len(self.images)

    @classmethod
    def from_vector(cls, vec, shape: GridShape, p: int) -> "CoefficientField":
        vec = np.asarray(vec, dtype=np.float64)
        if vec.size != p * shape.size:
            raise ValueError(f"vector of length {vec.size} does not hold {p} images of {shape}")
        return cls(shape, tuple(Image(shape, v) for v in vec.reshape(p, shape.size)))

    @classmethod
    def from_array(cls, arr) -> "CoefficientField":
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 3:
            raise ValueError("expected a (p, rows, cols) array")
        return cls(GridShape(arr.shape[1], arr.shape[2]), tuple(Image.from_array(a) for a in arr))

    @classmethod
    def zeros(cls, shape: GridShape, p: int) -> "CoefficientField":
        return cls.from_vector(np.zeros(p * shape.size), shape, p)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([im.values for im in self.images])

    def to_array(self) -> np.ndarray:
        return np.stack([im.to_array() for im in self.images])

    def __eq__(self, other):
        if not isinstance(other, CoefficientField):
            return NotImplemented
        return self.shape == other.shape and self.images == other.images


@dataclass(frozen=True, eq=False)
class Dataset:
    """Covariate/response-image pairs for ``n`` subjects on one grid."""

    shape: GridShape
    covariates: np.ndarray
    responses: np.ndarray

    def __post_init__(self):
        X = _frozen(self.covariates)
        if X.ndim == 1:
            X = _frozen(X.reshape(-1, 1))
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError("covariates must be an (n, p) array with n, p >= 1")
        Y = self.responses
        if isinstance(Y, (list, tuple)) and Y and isinstance(Y[0], Image):
            if any(im.shape != self.shape for im in Y):
                raise ValueError("all responses must share the dataset shape")
            Y = np.stack([im.values for im in Y])
        Y = _frozen(Y)
        if Y.ndim == 3:
            if Y.shape[1:] != (self.shape.rows, self.shape.cols):
                raise ValueError("response grid does not match dataset shape")
            Y = _frozen(Y.reshape(Y.shape[0], -1))
        if Y.ndim != 2 or Y.shape[1] != self.shape.size:
            raise ValueError("responses must be n images on the dataset shape")
        if Y.shape[0] != X.shape[0]:
            raise ValueError(
                f"{X.shape[0]} covariate rows but {Y.shape[0]} response images")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise ValueError("dataset contains non-finite values")
        if not np.all(np.isfinite(X.T @ X)):
            raise ValueError("covariate Gram matrix is not finite")
        object.__setattr__(self, "covariates", X)
        object.__setattr__(self, "responses", Y)

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def p(self) -> int:
        return self.covariates.shape[1]

    def response(self, i: int) -> Image:
        return Image(self.shape, self.responses[i])

    def subset(self, idx: Sequence[int]) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.shape, self.covariates[idx], self.responses[idx])

    def crop(self, row_slice: slice, col_slice: slice) -> "Dataset":
        Y = self.responses.reshape(self.n, self.shape.rows, self.shape.cols)[:, row_slice, col_slice]
        return Dataset(GridShape(Y.shape[1], Y.shape[2]), self.covariates, Y)


@dataclass(frozen=True)
class SolverConfig:
    lam: float = 5.0
    gamma: float = 0.5
    rho: float = 1.0
    a: float = 3.7
    eps_abs: float = 1e-4
    eps_rel: float = 1e-3
    max_iter: int = 2000
    penalty_kind: PenaltyKind = PenaltyKind.SCAD2TV
    seed: int = 0
    # "sum": sum_i ||Y_i - X_i beta||^2;  "mean": the same divided by n
    loss: str = "sum"

    def __post_init__(self):
        object.__setattr__(self, "penalty_kind", PenaltyKind.parse(self.penalty_kind))
        if self.loss not in ("sum", "mean"):
            raise ValueError("loss must be 'sum' or 'mean'")
        if not self.lam >= 0:
            raise ValueError("lam must be nonnegative")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if not self.a > 2:
            raise ValueError("SCAD shape a must exceed 2")
        if not (self.eps_abs > 0 and self.eps_rel > 0):
            raise ValueError("stopping tolerances must be positive")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError("max_iter must be a positive integer")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValueError("seed must be an unsigned integer")

    def loss_weight(self, n: int) -> float:
        return 1.0 if self.loss == "sum" else 1.0 / n

    def replace(self, **changes) -> "SolverConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["penalty_kind"] = self.penalty_kind.value
        return d


@dataclass
class FitResult:
    beta: CoefficientField
    alpha: np.ndarray
    beta_sparse: CoefficientField
    iterations: int
    primal_residuals: np.ndarray
    dual_residuals: np.ndarray
    objective_trace: np.ndarray
    converged: bool
    config: SolverConfig | None = None
    linsolve_residuals: np.ndarray | None = None
    tile_results: list = field(default_factory=list)

    def trace_record(self) -> dict:
        return {
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "primal_residuals": [float(v) for v in self.primal_residuals],
            "dual_residuals": [float(v) for v in self.dual_residuals],
            "objective": [float(v) for v in self.objective_trace],
        }
