"""On-disk formats.

Tensor files (``.iosr``) are little-endian throughout::

    b"IOSR" | u32 version (=1) | u32 rank | rank x u32 dims | float64 payload

A dataset directory holds ``covariates.csv`` (headerless, one subject per
row) and ``responses.iosr`` (rank 3, ``n x rows x cols``).
"""

from __future__ import annotations

import dataclasses
import json
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import Dataset, GridShape, SolverConfig
from .synth import SynthConfig

MAGIC = b"IOSR"
VERSION = 1


class FormatError(ValueError):
    pass


def _atomic_write(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix="." + path.name, suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode_tensor(arr) -> bytes:
    arr = np.asarray(arr, dtype=np.float64)
    header = MAGIC + struct.pack("<II", VERSION, arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape)
    return header + np.ascontiguousarray(arr).astype("<f8").tobytes()


def decode_tensor(buf: bytes, name: str = "<buffer>") -> np.ndarray:
    if len(buf) < 12 or buf[:4] != MAGIC:
        raise FormatError(f"{name}: bad magic, not an IOSR tensor")
    version, rank = struct.unpack_from("<II", buf, 4)
    if version != VERSION:
        raise FormatError(f"{name}: unsupported version {version}")
    off = 12 + 4 * rank
    if len(buf) < off:
        raise FormatError(f"{name}: truncated header")
    dims = struct.unpack_from(f"<{rank}I", buf, 12)
    count = int(np.prod(dims, dtype=np.int64))
    if len(buf) - off != 8 * count:
        raise FormatError(f"{name}: payload holds {(len(buf) - off) / 8:g} values, "
                          f"dims {dims} need {count}")
    arr = np.frombuffer(buf, dtype="<f8", offset=off, count=count).astype(np.float64)
    if not np.all(np.isfinite(arr)):
        raise FormatError(f"{name}: non-finite values")
    return arr.reshape(dims)


def write_tensor(path, arr) -> None:
    _atomic_write(path, encode_tensor(arr))


def read_tensor(path) -> np.ndarray:
    path = Path(path)
    return decode_tensor(path.read_bytes(), str(path))


def write_covariates(path, X) -> None:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    text = "".join(",".join(f"{v:.17g}" for v in row) + "\n" for row in X)
    _atomic_write(path, text.encode())


def read_covariates(path) -> np.ndarray:
    path = Path(path)
    rows = [line for line in path.read_text().splitlines() if line.strip()]
    try:
        X = np.array([[float(v) for v in line.split(",")] for line in rows], dtype=np.float64)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    if X.ndim != 2 or X.size == 0:
        raise FormatError(f"{path}: expected a non-empty rectangular table")
    if not np.all(np.isfinite(X)):
        raise FormatError(f"{path}: non-finite values")
    return X


def write_dataset(dataset: Dataset, directory) -> None:
    d = Path(directory)
    write_covariates(d / "covariates.csv", dataset.covariates)
    write_tensor(d / "responses.iosr",
                 dataset.responses.reshape(dataset.n, dataset.shape.rows, dataset.shape.cols))


def read_dataset(directory) -> Dataset:
    d = Path(directory)
    for name in ("covariates.csv", "responses.iosr"):
        if not (d / name).is_file():
            raise FileNotFoundError(f"{d / name}: missing")
    X = read_covariates(d / "covariates.csv")
    Y = read_tensor(d / "responses.iosr")
    if Y.ndim != 3:
        raise FormatError(f"responses.iosr must have rank 3, got {Y.ndim}")
    if Y.shape[0] != X.shape[0]:
        raise FormatError(f"covariates.csv has {X.shape[0]} rows but responses.iosr "
                          f"holds {Y.shape[0]} images")
    return Dataset(GridShape(Y.shape[1], Y.shape[2]), X, Y)


def _fmt_float(v: float) -> str:
    v = float(v)
    if np.isnan(v):
        return "NaN"
    if np.isinf(v):
        return "Infinity" if v > 0 else "-Infinity"
    return format(v, ".17g")


def dumps_record(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON text with every float printed at 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps_record(v, indent, _level + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.number)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps_record(v, indent, _level + 1) for v in obj) + "]"
        items = [pad + dumps_record(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(obj)
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def write_json(path, obj) -> None:
    _atomic_write(path, (dumps_record(obj) + "\n").encode())


# run configuration --------------------------------------------------------

@dataclass
class RunConfig:
    """Everything a CLI run needs; unset sections fall back to these defaults.

    solver: lam=5, gamma=0.5, rho=1, a=3.7 (the synthetic-study tuning),
    eps_abs=1e-4, eps_rel=1e-3, max_iter=2000, loss="sum".
    synth: 64x64 grid, n=100, sigma=1, eta variance sigma^2, length scale 8.
    tiling: no tiling unless ``tile`` is set; halo 1; one worker.
    """

    solver: SolverConfig = field(default_factory=SolverConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    tile: tuple | None = None
    halo: int = 1
    workers: int = 1
    methods: list = field(default_factory=lambda: ["scad2tv", "tvl1", "graphnet"])
    replicates: int = 10
    folds: int = 5
    output: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "solver": self.solver.to_dict(),
            "synth": self.synth.to_dict(),
            "tiling": {"tile": list(self.tile) if self.tile else None,
                       "halo": self.halo, "workers": self.workers},
            "methods": list(self.methods),
            "replicates": self.replicates,
            "folds": self.folds,
            "output": dict(self.output),
        }


_SOLVER_KEYS = {f.name for f in dataclasses.fields(SolverConfig)}
_SYNTH_KEYS = {"rows", "cols", "n", "sigma", "field_variance", "field_length_scale", "seed"}
_TILING_KEYS = {"tile", "halo", "workers"}
_TOP_KEYS = {"solver", "synth", "tiling", "methods", "replicates", "folds", "output"}


def _check_keys(section: str, got: dict, allowed: set) -> None:
    unknown = sorted(set(got) - allowed)
    if unknown:
        raise FormatError(f"unknown key(s) in [{section}]: {', '.join(unknown)}")


def parse_run_config(obj: dict) -> RunConfig:
    if not isinstance(obj, dict):
        raise FormatError("run config must be a JSON object")
    _check_keys("top level", obj, _TOP_KEYS)
    cfg = RunConfig()
    if "solver" in obj:
        _check_keys("solver", obj["solver"], _SOLVER_KEYS)
        cfg.solver = SolverConfig(**obj["solver"])
    if "synth" in obj:
        s = dict(obj["synth"])
        _check_keys("synth", s, _SYNTH_KEYS)
        shape = GridShape(s.pop("rows", 64), s.pop("cols", 64))
        cfg.synth = SynthConfig(shape=shape, **s)
    if "tiling" in obj:
        t = obj["tiling"]
        _check_keys("tiling", t, _TILING_KEYS)
        if t.get("tile") is not None:
            cfg.tile = tuple(int(v) for v in t["tile"])
        cfg.halo = int(t.get("halo", cfg.halo))
        cfg.workers = int(t.get("workers", cfg.workers))
    if "methods" in obj:
        cfg.methods = list(obj["methods"])
    if "replicates" in obj:
        cfg.replicates = int(obj["replicates"])
    if "folds" in obj:
        cfg.folds = int(obj["folds"])
    if "output" in obj:
        cfg.output = dict(obj["output"])
    return cfg


def load_run_config(path) -> RunConfig:
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: {exc}") from None
    return parse_run_config(obj)
