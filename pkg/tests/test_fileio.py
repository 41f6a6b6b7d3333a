import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
import hypothesis.extra.numpy as npst

from regionscad.core import GridShape
from regionscad.fileio import (FormatError, decode_tensor, dumps_record, encode_tensor,
                               load_run_config, parse_run_config, read_covariates, read_dataset,
                               read_tensor, write_covariates, write_dataset, write_tensor)
from regionscad.synth import SynthConfig, generate


def test_tensor_header_layout():
    buf = encode_tensor(np.arange(6.0).reshape(2, 3))
    assert buf[:4] == b"IOSR"
    assert struct.unpack("<IIII", buf[4:20]) == (1, 2, 2, 3)
    assert len(buf) == 20 + 6 * 8
    assert struct.unpack("<d", buf[20 + 8:20 + 16])[0] == 1.0


@settings(max_examples=50, deadline=None)
@given(npst.arrays(np.float64, npst.array_shapes(min_dims=1, max_dims=3, max_side=6),
                   elements=st.floats(allow_nan=False, allow_infinity=False)))
def test_tensor_roundtrip_bitwise(arr):
    out = decode_tensor(encode_tensor(arr))
    assert out.shape == arr.shape
    assert out.tobytes() == arr.astype("<f8").tobytes()


def test_tensor_rejects_corruption():
    buf = encode_tensor(np.ones((2, 2)))
    with pytest.raises(FormatError, match="magic"):
        decode_tensor(b"XXXX" + buf[4:])
    with pytest.raises(FormatError, match="version"):
        decode_tensor(buf[:4] + struct.pack("<I", 2) + buf[8:])
    with pytest.raises(FormatError, match="payload"):
        decode_tensor(buf[:-8])
    bad = encode_tensor(np.array([1.0, np.nan]))
    with pytest.raises(FormatError, match="non-finite"):
        decode_tensor(bad)


def test_covariates_roundtrip_exact(tmp_path):
    X = np.random.default_rng(0).uniform(0, 2, size=(7, 3))
    write_covariates(tmp_path / "c.csv", X)
    np.testing.assert_array_equal(read_covariates(tmp_path / "c.csv"), X)
    (tmp_path / "bad.csv").write_text("1,2\n3\n")
    with pytest.raises(FormatError):
        read_covariates(tmp_path / "bad.csv")


def test_dataset_roundtrip(tmp_path):
    ds, _ = generate(SynthConfig(shape=GridShape(16, 20), n=6, seed=1))
    write_dataset(ds, tmp_path / "d")
    back = read_dataset(tmp_path / "d")
    assert back.shape == ds.shape
    np.testing.assert_array_equal(back.covariates, ds.covariates)
    np.testing.assert_array_equal(back.responses, ds.responses)
    assert not list((tmp_path / "d").glob("*.tmp"))


def test_dataset_count_mismatch(tmp_path):
    ds, _ = generate(SynthConfig(shape=GridShape(16, 16), n=6, seed=1))
    write_dataset(ds, tmp_path)
    write_covariates(tmp_path / "covariates.csv", ds.covariates[:5])
    with pytest.raises(FormatError, match="5 rows but responses.iosr holds 6"):
        read_dataset(tmp_path)


def test_dataset_missing_file(tmp_path):
    write_tensor(tmp_path / "responses.iosr", np.zeros((2, 3, 3)))
    with pytest.raises(FileNotFoundError, match="covariates.csv"):
        read_dataset(tmp_path)


def test_dumps_record_full_precision():
    x = 0.1 + 0.2
    text = dumps_record({"a": x, "b": [1, 2.5], "c": {"d": None, "e": True}, "f": "s"})
    back = json.loads(text)
    assert back["a"] == x and back["b"] == [1, 2.5] and back["c"] == {"d": None, "e": True}
    assert "0.30000000000000004" in text


def test_run_config_parsing(tmp_path):
    cfg = parse_run_config({"solver": {"lam": 2.0, "penalty_kind": "tvl1"},
                            "synth": {"rows": 20, "cols": 24, "sigma": 0.1},
                            "tiling": {"tile": [8, 8], "halo": 2}})
    assert cfg.solver.lam == 2.0 and cfg.solver.penalty_kind.value == "tvl1"
    assert cfg.synth.shape == GridShape(20, 24)
    assert cfg.tile == (8, 8) and cfg.halo == 2
    with pytest.raises(FormatError, match="unknown key.*lamda"):
        parse_run_config({"solver": {"lamda": 1.0}})
    with pytest.raises(FormatError, match="unknown key"):
        parse_run_config({"solvers": {}})
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(FormatError):
        load_run_config(p)
    p.write_text(json.dumps({"replicates": 3}))
    assert load_run_config(p).replicates == 3
