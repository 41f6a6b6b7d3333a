import numpy as np
import pytest

from regionscad.core import CoefficientField, GridShape
from regionscad.diffops import tv_norm
from regionscad.synth import SynthConfig, default_truth, gaussian_random_field, generate


@pytest.mark.parametrize("N", [16, 32, 64])
def test_default_truth_shapes(N):
    t = default_truth(GridShape(N, N))
    assert t.p == 3
    b0, b1, b2 = t.to_array()
    s = N // 4
    assert np.count_nonzero(b0) == s * s and set(np.unique(b0)) == {0.0, 2.0}
    # a square of side s at height 2 crosses 4s pixel edges
    assert tv_norm(t.images[0]) == 8 * s
    assert set(np.unique(b1)) == {0.0, 3.0}
    assert set(np.unique(b2)) == {0.0, -2.0}
    w = N // 8
    assert np.count_nonzero(b2) == 2 * w * N - w * w
    for b in (b0, b1, b2):
        assert np.mean(b == 0) > 0.5


def test_default_truth_disk_is_centred_and_symmetric():
    b1 = default_truth(GridShape(64, 64)).to_array()[1]
    np.testing.assert_array_equal(b1, b1[::-1, :])
    np.testing.assert_array_equal(b1, b1.T)
    r = 64 // 6
    area = np.count_nonzero(b1)
    assert abs(area - np.pi * r * r) < 2 * np.pi * r


def test_default_truth_rejects_small():
    with pytest.raises(ValueError):
        default_truth(GridShape(8, 8))


def test_grf_moments():
    shape = GridShape(32, 32)
    F = gaussian_random_field(shape, 2.0, 8.0, seed=1, size=500)
    assert F.shape == (500, 32, 32)
    var = F.var(axis=0).mean()
    assert abs(var - 2.0) <= 0.1 * 2.0
    # correlation at lag 8 along rows and columns should be exp(-1/2)
    lag = 8
    for a, b in ((F[:, :-lag, :], F[:, lag:, :]), (F[:, :, :-lag], F[:, :, lag:])):
        c = np.mean(a * b) / np.sqrt(np.mean(a * a) * np.mean(b * b))
        assert abs(c - np.exp(-0.5)) <= 0.1


def test_grf_zero_variance_and_errors():
    im = gaussian_random_field(GridShape(4, 5), 0.0, 3.0, seed=0)
    assert not im.values.any()
    with pytest.raises(ValueError):
        gaussian_random_field(GridShape(4, 5), -1.0, 3.0)
    with pytest.raises(ValueError):
        gaussian_random_field(GridShape(4, 5), 1.0, 0.0)


def test_generate_model_identity():
    cfg = SynthConfig(shape=GridShape(16, 16), n=20, sigma=0.5, seed=3)
    ds, truth, parts = generate(cfg, return_components=True)
    B = truth.to_vector().reshape(3, -1)
    np.testing.assert_allclose(ds.responses, ds.covariates @ B + parts["eta"] + parts["eps"],
                               atol=1e-12)
    np.testing.assert_array_equal(ds.covariates[:, 0], 1.0)
    assert np.all((ds.covariates[:, 1:] >= 0) & (ds.covariates[:, 1:] < 2))


def test_generate_statistics():
    cfg = SynthConfig(shape=GridShape(32, 32), n=400, sigma=0.7, seed=9)
    ds, truth = generate(cfg)
    assert abs(ds.covariates[:, 1].mean() - 1.0) <= 0.05
    assert abs(ds.covariates[:, 2].mean() - 1.0) <= 0.05
    resid = ds.responses - ds.covariates @ truth.to_vector().reshape(3, -1)
    # field and white noise each carry sigma^2
    assert abs(resid.var() - 2 * 0.49) <= 0.15 * 2 * 0.49


def test_generate_reproducible_and_seed_sensitive():
    cfg = SynthConfig(shape=GridShape(16, 16), n=5, seed=42)
    a, _ = generate(cfg)
    b, _ = generate(cfg)
    np.testing.assert_array_equal(a.responses, b.responses)
    np.testing.assert_array_equal(a.covariates, b.covariates)
    c, _ = generate(SynthConfig(shape=GridShape(16, 16), n=5, seed=43))
    assert not np.array_equal(a.responses, c.responses)


def test_custom_truth():
    shape = GridShape(6, 7)
    truth = CoefficientField.from_array(np.ones((2, 6, 7)))
    ds, t = generate(SynthConfig(shape=shape, n=4, sigma=0.0, field_variance=0.0, truth=truth))
    assert ds.p == 2
    np.testing.assert_allclose(ds.responses, (ds.covariates @ np.ones((2, 42))))
    with pytest.raises(ValueError):
        SynthConfig(shape=GridShape(5, 5), truth=truth)
