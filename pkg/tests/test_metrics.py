import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from regionscad.core import GridShape, Image, SolverConfig
from regionscad.metrics import (cv_folds, derive_seed, prediction_mse, roi_ttest, run_benchmark,
                                run_cv, selection_rate)
from regionscad.synth import SynthConfig, generate


def test_selection_rate_examples():
    t = Image.from_array([[0, 1], [2, 0]])
    assert selection_rate(t, t) == 1.0
    assert selection_rate(t, Image.from_array([[1, 0], [0, 1]])) == 0.0
    assert selection_rate(t, Image.from_array([[0, 5], [0, 0]])) == 0.75
    with pytest.raises(ValueError):
        selection_rate(t, Image.from_array(np.zeros((2, 3))))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_selection_rate_symmetric_bounded(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=20) * (rng.random(20) < 0.5)
    b = rng.normal(size=20) * (rng.random(20) < 0.5)
    sr = selection_rate(a, b)
    assert 0 <= sr <= 1 and sr == selection_rate(b, a)
    assert selection_rate(a, 3 * a) == 1.0


def test_prediction_mse_identities():
    Y = np.random.default_rng(0).normal(size=(4, 9))
    assert prediction_mse(Y, Y) == 0.0
    assert prediction_mse(Y + 2.0, Y) == pytest.approx(4.0)
    ims = [Image(GridShape(3, 3), y) for y in Y]
    assert prediction_mse(ims, ims) == 0.0
    with pytest.raises(ValueError):
        prediction_mse(Y[:3], Y)


def _two_groups(gap, n=50, shape=(16, 16), seed=0):
    rng = np.random.default_rng(seed)
    roi = np.zeros(shape, dtype=bool)
    roi[4:12, 4:12] = True
    A = rng.normal(size=(n, *shape))
    B = rng.normal(size=(n, *shape)) + gap * roi
    return A.reshape(n, -1), B.reshape(n, -1), roi


def test_roi_ttest_power_and_calibration():
    A, B, roi = _two_groups(5.0)
    frac, p = roi_ttest(A, B, roi)
    assert frac == 1.0
    assert p.shape == roi.shape and np.all(np.isnan(p[~roi]))
    # no true difference: about 5% rejections at the 5% level
    fracs = [roi_ttest(*_two_groups(0.0, seed=s)[:2], np.ones((16, 16), bool))[0]
             for s in range(10)]
    assert abs(np.mean(fracs) - 0.05) < 0.02


def test_roi_ttest_constant_pixels_not_significant():
    A = np.zeros((5, 4))
    B = np.zeros((5, 4))
    frac, p = roi_ttest(A, B, np.ones(4, bool))
    assert frac == 0.0


def test_roi_ttest_errors():
    A, B, roi = _two_groups(1.0)
    with pytest.raises(ValueError, match="at least two"):
        roi_ttest(A[:1], B, roi)
    with pytest.raises(ValueError, match="empty"):
        roi_ttest(A, B, np.zeros_like(roi))
    with pytest.raises(ValueError):
        roi_ttest(A, B, np.ones((3, 3), bool))


def test_cv_folds_accounting():
    folds = cv_folds(23, 5, seed=1)
    assert [len(f) for f in folds] == [5, 5, 5, 4, 4]
    allidx = np.concatenate(folds)
    assert sorted(allidx.tolist()) == list(range(23))
    again = cv_folds(23, 5, seed=1)
    assert all(np.array_equal(a, b) for a, b in zip(folds, again))
    assert not all(np.array_equal(a, b) for a, b in zip(folds, cv_folds(23, 5, seed=2)))
    with pytest.raises(ValueError):
        cv_folds(3, 5)
    with pytest.raises(ValueError):
        cv_folds(10, 1)


def test_run_cv_deterministic():
    ds, _ = generate(SynthConfig(shape=GridShape(16, 16), n=20, sigma=0.2, seed=1))
    cfgs = {"scad2tv": SolverConfig(), "tvl1": SolverConfig(penalty_kind="tvl1")}
    a = run_cv(ds, cfgs, folds=4, seed=3)
    b = run_cv(ds, cfgs, folds=4, seed=3)
    assert a == b
    assert len(a["scad2tv"]["fold_mse"]) == 4
    assert a["scad2tv"]["mse"] == pytest.approx(np.mean(a["scad2tv"]["fold_mse"]))
    assert sum(len(f) for f in a["folds"]) == 20


def test_derive_seed_stable():
    assert derive_seed(5, 0) == derive_seed(5, 0)
    assert derive_seed(5, 0) != derive_seed(5, 1)


def test_benchmark_one_replicate():
    sc = SynthConfig(shape=GridShape(16, 16), n=20, sigma=0.1, seed=2)
    rep = run_benchmark(sc, replicates=1)
    assert rep.methods == ["scad2tv", "tvl1", "graphnet"]
    for m in rep.methods:
        assert len(rep.sr[m]) == 3 and all(0 <= v <= 1 for v in rep.sr[m])
        assert rep.failures[m] == 0 and rep.mse[m] > 0
    d = rep.to_dict()
    assert d["replicates"] == 1 and len(d["records"]) == 1
    with pytest.raises(ValueError):
        run_benchmark(sc, replicates=0)
