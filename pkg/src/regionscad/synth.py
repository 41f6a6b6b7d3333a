"""Synthetic image-on-scalar data with piecewise-constant coefficient images."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import CoefficientField, Dataset, GridShape, Image


def default_truth(shape: GridShape) -> CoefficientField:
    """Square (2), centred disk (3) and centred cross (-2) on a zero background."""
    R, C = shape.rows, shape.cols
    if R < 16 or C < 16:
        raise ValueError(f"default truth needs at least a 16x16 grid, got {shape}")
    rr, cc = np.mgrid[0:R, 0:C]

    sq_r, sq_c = R // 4, C // 4
    r0, c0 = (R // 2 - sq_r) // 2, (C // 2 - sq_c) // 2
    b0 = np.zeros((R, C))
    b0[r0:r0 + sq_r, c0:c0 + sq_c] = 2.0

    radius = min(R, C) // 6
    b1 = np.where((rr - (R - 1) / 2) ** 2 + (cc - (C - 1) / 2) ** 2 <= radius ** 2, 3.0, 0.0)

    wr, wc = R // 8, C // 8
    b2 = np.zeros((R, C))
    b2[(R - wr) // 2:(R - wr) // 2 + wr, :] = -2.0
    b2[:, (C - wc) // 2:(C - wc) // 2 + wc] = -2.0
    return CoefficientField.from_array(np.stack([b0, b1, b2]))


def _grid_factor(n: int, length_scale: float) -> np.ndarray:
    d = np.arange(n)[:, None] - np.arange(n)[None, :]
    K = np.exp(-d ** 2 / (2.0 * length_scale ** 2))
    w, U = np.linalg.eigh(K)
    return U * np.sqrt(np.clip(w, 0.0, None))


def gaussian_random_field(shape: GridShape, variance: float, length_scale: float,
                          seed=None, size: Optional[int] = None):
    """Zero-mean field with covariance ``variance * exp(-d^2 / (2 l^2))``.

    The squared-exponential kernel factorizes over rows and columns, so a draw
    is ``L_r Z L_c^T`` with ``L L^T`` the 1-D kernel matrices.  Returns one
    Image, or an ``(size, rows, cols)`` array when ``size`` is given.
    """
    if variance < 0:
        raise ValueError("variance must be nonnegative")
    if length_scale <= 0:
        raise ValueError("length_scale must be positive")
    rng = np.random.default_rng(seed)
    m = 1 if size is None else int(size)
    Z = rng.standard_normal((m, shape.rows, shape.cols))
    if variance == 0:
        fields = np.zeros_like(Z)
    else:
        Lr = _grid_factor(shape.rows, length_scale)
        Lc = _grid_factor(shape.cols, length_scale)
        fields = np.sqrt(variance) * np.einsum("ab,nbc,dc->nad", Lr, Z, Lc)
    if size is None:
        return Image.from_array(fields[0])
    return fields


@dataclass(frozen=True, eq=False)
class SynthConfig:
    shape: GridShape = GridShape(64, 64)
    n: int = 100
    sigma: float = 1.0
    field_variance: Optional[float] = None
    field_length_scale: float = 8.0
    seed: int = 0
    truth: Optional[CoefficientField] = field(default=None)

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError("sigma must be nonnegative")
        if self.field_variance is not None and self.field_variance < 0:
            raise ValueError("field_variance must be nonnegative")
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.truth is not None and self.truth.shape != self.shape:
            raise ValueError("truth shape does not match config shape")

    @property
    def eta_variance(self) -> float:
        return self.sigma ** 2 if self.field_variance is None else self.field_variance

    def resolved_truth(self) -> CoefficientField:
        return self.truth if self.truth is not None else default_truth(self.shape)

    def to_dict(self) -> dict:
        return {
            "rows": self.shape.rows, "cols": self.shape.cols, "n": self.n,
            "sigma": self.sigma, "field_variance": self.eta_variance,
            "field_length_scale": self.field_length_scale, "seed": self.seed,
        }


def generate(config: SynthConfig, return_components: bool = False):
    """Draw ``Y_i = X_i^T beta + eta_i + eps_i`` with ``X_i = (1, U(0,2), ...)``.

    Returns ``(dataset, truth)``; with ``return_components`` also a dict holding
    the mean images, the spatial fields and the white noise.
    """
    truth = config.resolved_truth()
    shape, n, p = config.shape, config.n, truth.p
    rng = np.random.default_rng(config.seed)
    X = np.ones((n, p))
    X[:, 1:] = rng.uniform(0.0, 2.0, size=(n, p - 1))
    field_seed, noise_seed = rng.integers(0, 2 ** 63, size=2)
    eta = gaussian_random_field(shape, config.eta_variance, config.field_length_scale,
                                seed=field_seed, size=n).reshape(n, -1)
    eps = config.sigma * np.random.default_rng(noise_seed).standard_normal((n, shape.size))
    mean = X @ truth.to_vector().reshape(p, shape.size)
    Y = mean + eta + eps
    dataset = Dataset(shape, X, Y)
    if return_components:
        return dataset, truth, {"mean": mean, "eta": eta, "eps": eps}
    return dataset, truth
