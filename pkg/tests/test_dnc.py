import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from regionscad.core import GridShape, SolverConfig
from regionscad.diffops import build_diff_operator
from regionscad.dnc import TileFailure, fit_tiled, make_tiling, tile_seed
from regionscad import dnc, solver
from regionscad.synth import SynthConfig, generate


@pytest.fixture(scope="module")
def data16():
    ds, truth = generate(SynthConfig(shape=GridShape(16, 16), n=30, sigma=0.1, seed=5))
    return ds, truth


def test_tiling_24_by_8():
    t = make_tiling(GridShape(24, 24), (8, 8), halo=1)
    assert len(t) == 9
    sizes = sorted((tile.padded_shape.rows, tile.padded_shape.cols) for tile in t.tiles)
    assert sizes.count((9, 9)) == 4
    assert sizes.count((9, 10)) + sizes.count((10, 9)) == 4
    assert sizes.count((10, 10)) == 1
    assert t.tiles[0].core == (0, 8, 0, 8) and t.tiles[0].padded == (0, 9, 0, 9)
    assert t.tiles[4].padded == (7, 17, 7, 17)


def test_tiling_150_by_100():
    t = make_tiling(GridShape(150, 100), (10, 10), halo=1)
    assert len(t) == 150


def test_tiling_rejects_bad_sizes():
    with pytest.raises(ValueError):
        make_tiling(GridShape(8, 8), (9, 4))
    with pytest.raises(ValueError):
        make_tiling(GridShape(8, 8), (4, 4), halo=0)
    with pytest.raises(ValueError):
        make_tiling(GridShape(8, 8), (0, 4))


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 40), st.integers(2, 40), st.integers(1, 40), st.integers(1, 40),
       st.integers(1, 4))
def test_cores_partition_grid(R, C, br, bc, halo):
    br, bc = min(br, R), min(bc, C)
    shape = GridShape(R, C)
    t = make_tiling(shape, (br, bc), halo)
    cover = np.zeros((R, C), dtype=int)
    for tile in t.tiles:
        r0, r1, c0, c1 = tile.core
        cover[r0:r1, c0:c1] += 1
        p0, p1, q0, q1 = tile.padded
        assert p0 == max(r0 - halo, 0) and p1 == min(r1 + halo, R)
        assert q0 == max(c0 - halo, 0) and q1 == min(c1 + halo, C)
    assert np.all(cover == 1)
    assert np.all(t.assignment() >= 0)


def test_tile_seed():
    assert tile_seed(0, 5) == 5
    assert tile_seed(6, 3) == 5


def test_single_tile_equals_batch(data16):
    ds, _ = data16
    cfg = SolverConfig(seed=3)
    batch = solver.fit(ds, cfg)
    tiled = fit_tiled(ds, cfg, make_tiling(ds.shape, (16, 16), halo=1))
    np.testing.assert_array_equal(tiled.beta.to_vector(), batch.beta.to_vector())
    np.testing.assert_array_equal(tiled.beta_sparse.to_vector(), batch.beta_sparse.to_vector())
    np.testing.assert_array_equal(tiled.alpha, batch.alpha)
    assert tiled.iterations == batch.iterations


def test_tiled_fit_close_to_batch(data16):
    ds, truth = data16
    cfg = SolverConfig()
    batch = solver.fit(ds, cfg)
    tiled = fit_tiled(ds, cfg, make_tiling(ds.shape, (8, 8), halo=2))
    assert len(tiled.tile_results) == 4
    assert tiled.iterations == sum(r.iterations for r in tiled.tile_results)
    assert len(tiled.primal_residuals) == tiled.iterations
    # alpha is rebuilt from the stitched sparse estimate
    op = build_diff_operator(ds.shape, ds.p, cfg.gamma)
    np.testing.assert_array_equal(tiled.alpha, op.apply(tiled.beta_sparse.to_vector()))
    yb = solver.predict_array(batch.beta_sparse, ds.covariates)
    yt = solver.predict_array(tiled.beta_sparse, ds.covariates)
    mse_b = np.mean((yb - ds.responses) ** 2)
    mse_t = np.mean((yt - ds.responses) ** 2)
    assert abs(mse_t - mse_b) <= 0.1 * mse_b


def test_result_independent_of_workers(data16):
    ds, _ = data16
    cfg = SolverConfig()
    tiling = make_tiling(ds.shape, (8, 8), halo=1)
    serial = fit_tiled(ds, cfg, tiling, workers=1)
    pooled = fit_tiled(ds, cfg, tiling, workers=2)
    np.testing.assert_array_equal(serial.beta.to_vector(), pooled.beta.to_vector())
    np.testing.assert_array_equal(serial.objective_trace, pooled.objective_trace)


def test_tile_order_does_not_matter(data16):
    ds, _ = data16
    cfg = SolverConfig()
    tiling = make_tiling(ds.shape, (8, 8), halo=1)
    ref = fit_tiled(ds, cfg, tiling)
    # refit each tile alone in reverse order and stitch by hand
    out = np.zeros((ds.p, 16, 16))
    for i in reversed(range(len(tiling))):
        tile = tiling.tiles[i]
        r0, r1, c0, c1 = tile.padded
        res = solver.fit(ds.crop(slice(r0, r1), slice(c0, c1)),
                         cfg.replace(seed=tile_seed(cfg.seed, i)))
        a0, a1, b0, b1 = tile.core
        l0, l1, m0, m1 = tile.core_in_padded()
        out[:, a0:a1, b0:b1] = res.beta.to_array()[:, l0:l1, m0:m1]
    np.testing.assert_array_equal(out, ref.beta.to_array())


def test_tile_failure_names_tile(data16, monkeypatch):
    ds, _ = data16

    def boom(*a, **k):
        raise solver.SolverDivergence("bad", 1, [], [], [])

    monkeypatch.setattr(dnc.solver, "fit", boom)
    with pytest.raises(TileFailure, match="tile 0"):
        fit_tiled(ds, SolverConfig(), make_tiling(ds.shape, (8, 8)))


def test_shape_mismatch(data16):
    ds, _ = data16
    with pytest.raises(ValueError):
        fit_tiled(ds, SolverConfig(), make_tiling(GridShape(8, 8), (4, 4)))
