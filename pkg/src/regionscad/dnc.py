"""Overlapped-tile divide and conquer.

The grid is cut into base tiles ("cores").  Each core is padded by ``halo``
pixels on every side that stays inside the grid, the padded sub-problem is
fitted on its own, and only the core of the estimate is kept.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import CoefficientField, Dataset, FitResult, GridShape, SolverConfig
from . import solver
from .diffops import build_diff_operator

log = logging.getLogger(__name__)


class TileFailure(RuntimeError):
    def __init__(self, index: int, tile, cause: BaseException):
        super().__init__(f"tile {index} (core rows {tile.core[0]}:{tile.core[1]}, "
                         f"cols {tile.core[2]}:{tile.core[3]}) failed: {cause}")
        self.index = index
        self.tile = tile
        self.cause = cause


@dataclass(frozen=True)
class Tile:
    # half-open, 0-indexed (row_start, row_stop, col_start, col_stop)
    core: tuple
    padded: tuple

    @property
    def padded_shape(self) -> GridShape:
        r0, r1, c0, c1 = self.padded
        return GridShape(r1 - r0, c1 - c0)

    def core_in_padded(self) -> tuple:
        """Core rectangle in the padded tile's local coordinates."""
        return (self.core[0] - self.padded[0], self.core[1] - self.padded[0],
                self.core[2] - self.padded[2], self.core[3] - self.padded[2])


@dataclass(frozen=True)
class Tiling:
    shape: GridShape
    tile_rows: int
    tile_cols: int
    halo: int
    tiles: tuple

    def __len__(self):
        return len(self.tiles)

    def assignment(self) -> np.ndarray:
        """Tile index owning each pixel (``-1`` if uncovered)."""
        out = np.full((self.shape.rows, self.shape.cols), -1)
        for t, tile in enumerate(self.tiles):
            r0, r1, c0, c1 = tile.core
            out[r0:r1, c0:c1] = t
        return out


def make_tiling(shape: GridShape, tile, halo: int = 1) -> Tiling:
    br, bc = tile
    if not (1 <= br <= shape.rows and 1 <= bc <= shape.cols):
        raise ValueError(f"tile {br}x{bc} does not fit grid {shape}")
    if int(halo) != halo or halo < 1:
        raise ValueError("halo must be a positive integer")
    tiles = []
    for r0 in range(0, shape.rows, br):
        r1 = min(r0 + br, shape.rows)
        for c0 in range(0, shape.cols, bc):
            c1 = min(c0 + bc, shape.cols)
            padded = (max(r0 - halo, 0), min(r1 + halo, shape.rows),
                      max(c0 - halo, 0), min(c1 + halo, shape.cols))
            if padded[1] - padded[0] < 2 or padded[3] - padded[2] < 2:
                raise ValueError(f"padded tile {padded} is smaller than 2x2")
            tiles.append(Tile((r0, r1, c0, c1), padded))
    return Tiling(shape, int(br), int(bc), int(halo), tuple(tiles))


def tile_seed(seed: int, index: int) -> int:
    return int(seed) ^ int(index)


def _fit_tile(args):
    index, tile, dataset, config = args
    r0, r1, c0, c1 = tile.padded
    sub = dataset.crop(slice(r0, r1), slice(c0, c1))
    try:
        return solver.fit(sub, config.replace(seed=tile_seed(config.seed, index)))
    except Exception as exc:  # re-raised with the tile named
        raise TileFailure(index, tile, exc) from exc


def fit_tiled(dataset: Dataset, config: SolverConfig, tiling: Tiling,
              workers: int = 1) -> FitResult:
    """Fit every padded tile independently and stitch the cores together.

    ``workers > 1`` runs tiles in a process pool; the merge always happens in
    tile order, so the result does not depend on the pool width.
    """
    if dataset.shape != tiling.shape:
        raise ValueError(f"dataset grid {dataset.shape} does not match tiling grid {tiling.shape}")
    jobs = [(i, tile, dataset, config) for i, tile in enumerate(tiling.tiles)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_fit_tile, jobs))
    else:
        results = [_fit_tile(job) for job in jobs]

    if len(results) == 1:
        only = results[0]
        only.tile_results = [only]
        return only

    p, R, C = dataset.p, dataset.shape.rows, dataset.shape.cols
    beta = np.zeros((p, R, C))
    beta_sparse = np.zeros((p, R, C))
    for tile, res in zip(tiling.tiles, results):
        r0, r1, c0, c1 = tile.core
        lr0, lr1, lc0, lc1 = tile.core_in_padded()
        beta[:, r0:r1, c0:c1] = res.beta.to_array()[:, lr0:lr1, lc0:lc1]
        beta_sparse[:, r0:r1, c0:c1] = res.beta_sparse.to_array()[:, lr0:lr1, lc0:lc1]

    sparse_field = CoefficientField.from_array(beta_sparse)
    op = build_diff_operator(dataset.shape, p, config.gamma)
    log.info("tiled fit: %d tiles, %d total iterations", len(results),
             sum(r.iterations for r in results))
    return FitResult(
        beta=CoefficientField.from_array(beta),
        # the stitched alpha is D applied to the stitched sparse estimate
        alpha=op.apply(sparse_field.to_vector()),
        beta_sparse=sparse_field,
        iterations=sum(r.iterations for r in results),
        primal_residuals=np.concatenate([r.primal_residuals for r in results]),
        dual_residuals=np.concatenate([r.dual_residuals for r in results]),
        objective_trace=np.concatenate([r.objective_trace for r in results]),
        converged=all(r.converged for r in results),
        config=config,
        linsolve_residuals=np.concatenate([r.linsolve_residuals for r in results]),
        tile_results=results,
    )
