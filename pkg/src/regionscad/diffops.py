"""Discrete gradient, anisotropic TV and the grouped difference operator ``D``.

``D`` maps the stacked coefficient vector to one group of rows per pixel and
coefficient.  A pixel ``(j, k)`` with both a lower and a right neighbour emits

    beta[j+1,k] - beta[j,k]      (gradient)
    beta[j,k+1] - beta[j,k]      (gradient)
    beta[j,k], beta[j+1,k], beta[j,k+1]      (values)

Pixels on the last row or column drop the entries that would leave the grid
and the bottom-right corner emits nothing.  The mixing weight ``gamma`` is kept
per row instead of being folded into the matrix entries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .core import GridShape, Image

GRADIENT = 0
VALUE = 1


def gradient(image: Image) -> np.ndarray:
    """Forward differences with zero rows/columns at the far boundary.

    Returns an array of shape ``(rows, cols, 2)`` holding
    ``(beta[j+1,k] - beta[j,k], beta[j,k+1] - beta[j,k])``.
    """
    b = image.to_array()
    g = np.zeros(b.shape + (2,))
    g[:-1, :, 0] = b[1:, :] - b[:-1, :]
    g[:, :-1, 1] = b[:, 1:] - b[:, :-1]
    return g


def tv_norm(image: Image) -> float:
    return float(np.abs(gradient(image)).sum())


def expected_row_count(shape: GridShape, p: int) -> int:
    r, c = shape.rows - 1, shape.cols - 1
    return p * (5 * r * c + 3 * r + 3 * c)


@dataclass(frozen=True, eq=False)
class DiffOperator:
    shape: GridShape
    p: int
    gamma: float
    matrix: sp.csr_matrix
    row_kind: np.ndarray
    row_weight: np.ndarray
    value_column: np.ndarray
    value_multiplicity: np.ndarray

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_cols(self) -> int:
        return self.matrix.shape[1]

    @property
    def is_gradient(self) -> np.ndarray:
        return self.row_kind == GRADIENT

    @property
    def is_value(self) -> np.ndarray:
        return self.row_kind == VALUE

    def apply(self, beta_vec) -> np.ndarray:
        beta_vec = np.asarray(beta_vec, dtype=np.float64)
        if beta_vec.shape != (self.n_cols,):
            raise ValueError(f"expected a vector of length {self.n_cols}, got {beta_vec.shape}")
        return self.matrix @ beta_vec

    def apply_adjoint(self, alpha_vec) -> np.ndarray:
        alpha_vec = np.asarray(alpha_vec, dtype=np.float64)
        if alpha_vec.shape != (self.n_rows,):
            raise ValueError(f"expected a vector of length {self.n_rows}, got {alpha_vec.shape}")
        return self.matrix.T @ alpha_vec

    def gram(self) -> sp.csc_matrix:
        return (self.matrix.T @ self.matrix).tocsc()

    def gradient_gram(self) -> sp.csc_matrix:
        """``grad^T grad`` built from the gradient rows only (a graph Laplacian)."""
        G = self.matrix[np.flatnonzero(self.is_gradient)]
        return (G.T @ G).tocsc()


def _single_block(shape: GridShape):
    R, C = shape.rows, shape.cols
    r, c = np.divmod(np.arange(R * C), C)
    self_idx = r * C + c
    down = np.where(r < R - 1, self_idx + C, -1)
    right = np.where(c < C - 1, self_idx + 1, -1)
    has_down = down >= 0
    has_right = right >= 0

    # slot order per pixel: grad-down, grad-right, value-self, value-down, value-right
    present = np.stack([has_down, has_right, has_down | has_right, has_down, has_right], axis=1)
    kind = np.array([GRADIENT, GRADIENT, VALUE, VALUE, VALUE])
    plus = np.stack([down, right, self_idx, down, right], axis=1)
    minus = np.stack([self_idx, self_idx, np.full_like(self_idx, -1), np.full_like(self_idx, -1),
                      np.full_like(self_idx, -1)], axis=1)

    mask = present.ravel()
    kinds = np.broadcast_to(kind, present.shape).ravel()[mask]
    plus = plus.ravel()[mask]
    minus = minus.ravel()[mask]
    n = kinds.size

    rows = np.concatenate([np.arange(n), np.flatnonzero(minus >= 0)])
    cols = np.concatenate([plus, minus[minus >= 0]])
    data = np.concatenate([np.ones(n), -np.ones(int((minus >= 0).sum()))])
    D = sp.csr_matrix((data, (rows, cols)), shape=(n, R * C))
    D.sort_indices()
    value_col = np.where(kinds == VALUE, plus, -1)
    return D, kinds, value_col


def build_diff_operator(shape: GridShape, p: int, gamma: float) -> DiffOperator:
    if not isinstance(shape, GridShape):
        raise TypeError("shape must be a GridShape")
    if int(p) != p or p < 1:
        raise ValueError("p must be a positive integer")
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")

    D1, kinds1, vcol1 = _single_block(shape)
    m1, npix = D1.shape
    D = sp.block_diag([D1] * p, format="csr") if p > 1 else D1
    kinds = np.tile(kinds1, p)
    offsets = np.repeat(np.arange(p) * npix, m1)
    vcol = np.where(np.tile(vcol1, p) >= 0, np.tile(vcol1, p) + offsets, -1)
    weight = np.where(kinds == GRADIENT, gamma, 1.0 - gamma)
    mult = np.bincount(vcol[vcol >= 0], minlength=p * npix)
    for arr in (kinds, weight, vcol, mult):
        arr.setflags(write=False)
    return DiffOperator(shape, int(p), float(gamma), D, kinds, weight, vcol, mult)
