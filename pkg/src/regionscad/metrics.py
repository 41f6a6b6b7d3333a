"""Selection rate, prediction error, pixelwise tests, and replicated runs."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .core import Dataset, GridShape, Image, PenaltyKind, SolverConfig
from . import solver
from .synth import SynthConfig, generate

log = logging.getLogger(__name__)

METHODS = (PenaltyKind.SCAD2TV, PenaltyKind.TV_L1, PenaltyKind.GRAPHNET)


def _values(x) -> np.ndarray:
    if isinstance(x, Image):
        return x.values
    return np.asarray(x, dtype=np.float64)


def selection_rate(truth, estimate) -> float:
    """Fraction of pixels whose zero / nonzero status agrees."""
    if isinstance(truth, Image) and isinstance(estimate, Image) and truth.shape != estimate.shape:
        raise ValueError("truth and estimate have different shapes")
    t, e = _values(truth), _values(estimate)
    if t.shape != e.shape:
        raise ValueError("truth and estimate have different shapes")
    return float(np.mean((t != 0) == (e != 0)))


def prediction_mse(predicted, observed) -> float:
    """``1/(n |S|) sum_i ||Yhat_i - Y_i||^2``."""
    P = np.stack([_values(y) for y in predicted]) if not isinstance(predicted, np.ndarray) else predicted
    O = np.stack([_values(y) for y in observed]) if not isinstance(observed, np.ndarray) else observed
    if P.shape != O.shape:
        raise ValueError(f"predicted {P.shape} and observed {O.shape} do not match")
    d = (P - O).ravel()
    return float(np.dot(d, d) / d.size)


def roi_ttest(group_a, group_b, roi_mask, level: float = 0.05):
    """Welch t-test at every ROI pixel.

    Returns ``(fraction_significant, pvalues)`` where ``pvalues`` is a
    ``(rows, cols)`` array, NaN outside the mask and at pixels where both
    groups have zero variance (those count as not significant).
    """
    if len(group_a) < 2 or len(group_b) < 2:
        raise ValueError(f"each group needs at least two images, got {len(group_a)} "
                         f"and {len(group_b)}")
    A = np.stack([_values(y) for y in group_a])
    B = np.stack([_values(y) for y in group_b])
    if isinstance(roi_mask, Image):
        shape = roi_mask.shape
        mask = roi_mask.values != 0
    else:
        mask = np.asarray(roi_mask, dtype=bool)
        shape = GridShape(*mask.shape) if mask.ndim == 2 else None
        mask = mask.ravel()
    if A.shape[1] != mask.size or B.shape[1] != mask.size:
        raise ValueError("mask and images differ in size")
    if not mask.any():
        raise ValueError("ROI mask is empty")

    p = np.full(mask.size, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        res = stats.ttest_ind(A[:, mask], B[:, mask], axis=0, equal_var=False)
    p[mask] = res.pvalue
    significant = np.nan_to_num(p[mask], nan=1.0) < level
    frac = float(significant.mean())
    if shape is not None:
        p = p.reshape(shape.rows, shape.cols)
    return frac, p


def derive_seed(base: int, *keys: int) -> int:
    return int(np.random.SeedSequence([int(base), *map(int, keys)]).generate_state(1)[0])


@dataclass
class BenchmarkReport:
    methods: list
    sr: dict
    mse: dict
    replicates: int
    failures: dict
    config: dict
    records: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "replicates": self.replicates,
            "methods": list(self.methods),
            "selection_rate": {m: [float(v) for v in self.sr[m]] for m in self.methods},
            "mse": {m: float(self.mse[m]) for m in self.methods},
            "failures": dict(self.failures),
            "config": self.config,
            "records": self.records,
        }


def _run_replicate(args):
    r, synth_config, configs = args
    dataset, truth = generate(synth_config)
    out = {"replicate": r, "seed": synth_config.seed, "methods": {}}
    for name, cfg in configs.items():
        try:
            res = solver.fit(dataset, cfg)
        except Exception as exc:
            log.warning("replicate %d, %s failed: %s", r, name, exc)
            out["methods"][name] = {"failed": str(exc)}
            continue
        yhat = solver.predict_array(res.beta_sparse, dataset.covariates)
        out["methods"][name] = {
            "sr": [selection_rate(t, e) for t, e in zip(truth.images, res.beta_sparse.images)],
            "mse": prediction_mse(yhat, dataset.responses),
            "iterations": res.iterations,
            "converged": res.converged,
        }
    return out


def default_method_configs(base: SolverConfig | None = None) -> dict:
    base = base or SolverConfig()
    return {k.value: base.replace(penalty_kind=k) for k in METHODS}


def run_benchmark(synth_config: SynthConfig, configs: dict | None = None,
                  replicates: int = 10, workers: int = 1) -> BenchmarkReport:
    """Generate ``replicates`` datasets and fit every method on each.

    SR is computed per coefficient and MSE per fit, both from the sparse
    estimate; means skip failed fits, which are counted in ``failures``.
    """
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    configs = configs or default_method_configs()
    jobs = []
    for r in range(replicates):
        sc = SynthConfig(shape=synth_config.shape, n=synth_config.n, sigma=synth_config.sigma,
                         field_variance=synth_config.field_variance,
                         field_length_scale=synth_config.field_length_scale,
                         seed=derive_seed(synth_config.seed, r), truth=synth_config.truth)
        jobs.append((r, sc, configs))
    if workers > 1 and replicates > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_replicate, jobs))
    else:
        records = [_run_replicate(j) for j in jobs]
    records.sort(key=lambda rec: rec["replicate"])

    names = list(configs)
    sr, mse, failures = {}, {}, {}
    for m in names:
        ok = [rec["methods"][m] for rec in records if "failed" not in rec["methods"][m]]
        failures[m] = replicates - len(ok)
        sr[m] = np.mean([o["sr"] for o in ok], axis=0).tolist() if ok else []
        mse[m] = float(np.mean([o["mse"] for o in ok])) if ok else float("nan")
    snapshot = {"synth": synth_config.to_dict(),
                "solvers": {m: c.to_dict() for m, c in configs.items()},
                "replicates": replicates}
    return BenchmarkReport(names, sr, mse, replicates, failures, snapshot, records)


def cv_folds(n: int, folds: int, seed: int = 0) -> list:
    """Shuffle ``0..n-1`` with ``seed`` and cut into contiguous near-equal blocks."""
    if folds < 2:
        raise ValueError("need at least two folds")
    if folds > n:
        raise ValueError(f"cannot split {n} subjects into {folds} folds")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(block) for block in np.array_split(perm, folds)]


def run_cv(dataset: Dataset, configs: dict | SolverConfig, folds: int = 5, seed: int = 0) -> dict:
    """Mean held-out prediction MSE per method over ``folds`` folds."""
    if isinstance(configs, SolverConfig):
        configs = {configs.penalty_kind.value: configs}
    blocks = cv_folds(dataset.n, folds, seed)
    out = {}
    for name, cfg in configs.items():
        errs = []
        for k, test in enumerate(blocks):
            train = np.setdiff1d(np.arange(dataset.n), test)
            res = solver.fit(dataset.subset(train), cfg)
            yhat = solver.predict_array(res.beta_sparse, dataset.covariates[test])
            errs.append(prediction_mse(yhat, dataset.responses[test]))
        out[name] = {"mse": float(np.mean(errs)), "fold_mse": [float(e) for e in errs]}
    out["folds"] = [b.tolist() for b in blocks]
    return out
