"""Command-line interface: simulate, fit, predict, evaluate, benchmark, cv."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from .core import CoefficientField, GridShape
from . import dnc, fileio, metrics, solver
from .dnc import TileFailure
from .fileio import FormatError, RunConfig
from .solver import SolverDivergence
from .synth import generate

log = logging.getLogger("regionscad")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_DIVERGED = 4
EXIT_INTERNAL = 5

EPILOG = """\
exit codes:
  0  success
  2  bad command line (unknown flag, missing argument)
  3  unreadable or malformed input (missing file, bad tensor, bad config)
  4  solver divergence or a failed tile
  5  unexpected internal error

--workers defaults to $REGIONSCAD_WORKERS when set, else 1.
"""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _tile_arg(text: str) -> tuple:
    try:
        r, c = text.lower().split("x")
        return int(r), int(c)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected RxC, got {text!r}") from None


def _default_workers() -> int:
    env = os.environ.get("REGIONSCAD_WORKERS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def _add_solver_flags(p):
    g = p.add_argument_group("solver")
    g.add_argument("--method", choices=["scad2tv", "tvl1", "graphnet"])
    g.add_argument("--lambda", dest="lam", type=float)
    g.add_argument("--gamma", type=float)
    g.add_argument("--rho", type=float)
    g.add_argument("--a", type=float)
    g.add_argument("--eps-abs", type=float)
    g.add_argument("--eps-rel", type=float)
    g.add_argument("--max-iter", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--loss", choices=["sum", "mean"])


def _add_synth_flags(p):
    g = p.add_argument_group("synthetic data")
    g.add_argument("--rows", type=int)
    g.add_argument("--cols", type=int)
    g.add_argument("--n", type=int)
    g.add_argument("--sigma", type=float)
    g.add_argument("--field-variance", type=float)
    g.add_argument("--length-scale", type=float)
    g.add_argument("--data-seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="regionscad", description=__doc__, epilog=EPILOG,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="generate a synthetic dataset and its truth")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--config", type=Path)
    _add_synth_flags(p)

    p = sub.add_parser("fit", help="fit coefficient images to a dataset")
    p.add_argument("--data", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--config", type=Path)
    p.add_argument("--tile", type=_tile_arg, help="base tile size RxC")
    p.add_argument("--halo", type=int)
    p.add_argument("--workers", type=int)
    _add_solver_flags(p)

    p = sub.add_parser("predict", help="predict response images from coefficient images")
    p.add_argument("--beta", required=True, type=Path)
    p.add_argument("--covariates", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)

    p = sub.add_parser("evaluate", help="selection rate, MSE and ROI tests")
    p.add_argument("--truth", type=Path, help="true coefficient tensor")
    p.add_argument("--estimate", required=True, type=Path, help="estimated coefficient tensor")
    p.add_argument("--data", type=Path, help="dataset directory for MSE / ROI tests")
    p.add_argument("--predictions", type=Path, help="predicted response tensor")
    p.add_argument("--roi-test", type=int, metavar="COL",
                   help="split subjects by covariate COL (0 vs nonzero) and t-test the ROI")
    p.add_argument("--roi-coef", type=int, help="coefficient defining the ROI (default COL)")
    p.add_argument("--level", type=float, default=0.05)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("benchmark", help="replicated synthetic comparison of methods")
    p.add_argument("--out", type=Path)
    p.add_argument("--config", type=Path)
    p.add_argument("--replicates", type=int)
    p.add_argument("--methods", nargs="+", choices=["scad2tv", "tvl1", "graphnet"])
    p.add_argument("--workers", type=int)
    _add_synth_flags(p)
    _add_solver_flags(p)

    p = sub.add_parser("cv", help="K-fold held-out MSE comparison")
    p.add_argument("--data", required=True, type=Path)
    p.add_argument("--out", type=Path)
    p.add_argument("--config", type=Path)
    p.add_argument("--folds", type=int)
    p.add_argument("--fold-seed", type=int, default=0)
    p.add_argument("--methods", nargs="+", choices=["scad2tv", "tvl1", "graphnet"])
    _add_solver_flags(p)
    return parser


def _resolve(args) -> RunConfig:
    cfg = fileio.load_run_config(args.config) if getattr(args, "config", None) else RunConfig()
    changes = {}
    for flag, key in [("method", "penalty_kind"), ("lam", "lam"), ("gamma", "gamma"),
                      ("rho", "rho"), ("a", "a"), ("eps_abs", "eps_abs"),
                      ("eps_rel", "eps_rel"), ("max_iter", "max_iter"), ("seed", "seed"),
                      ("loss", "loss")]:
        v = getattr(args, flag, None)
        if v is not None:
            changes[key] = v
    if changes:
        cfg.solver = cfg.solver.replace(**changes)

    s = cfg.synth
    synth_changes = {}
    for flag, key in [("n", "n"), ("sigma", "sigma"), ("field_variance", "field_variance"),
                      ("length_scale", "field_length_scale"), ("data_seed", "seed")]:
        v = getattr(args, flag, None)
        if v is not None:
            synth_changes[key] = v
    rows = getattr(args, "rows", None) or s.shape.rows
    cols = getattr(args, "cols", None) or s.shape.cols
    cfg.synth = dataclasses.replace(s, shape=GridShape(rows, cols), **synth_changes)

    if getattr(args, "tile", None) is not None:
        cfg.tile = args.tile
    if getattr(args, "halo", None) is not None:
        cfg.halo = args.halo
    workers = getattr(args, "workers", None)
    cfg.workers = workers if workers is not None else (
        cfg.workers if cfg.workers != 1 else _default_workers())
    if getattr(args, "methods", None):
        cfg.methods = list(args.methods)
    if getattr(args, "replicates", None) is not None:
        cfg.replicates = args.replicates
    if getattr(args, "folds", None) is not None:
        cfg.folds = args.folds
    return cfg


def _echo(command: str, cfg: RunConfig) -> None:
    print(f"# regionscad {command} resolved config: "
          + json.dumps(cfg.to_dict(), sort_keys=True), file=sys.stderr)


def cmd_simulate(args) -> int:
    cfg = _resolve(args)
    _echo("simulate", cfg)
    dataset, truth = generate(cfg.synth)
    fileio.write_dataset(dataset, args.out)
    fileio.write_tensor(args.out / "truth.iosr", truth.to_array())
    fileio.write_json(args.out / "simulate.json", cfg.synth.to_dict())
    print(f"wrote {dataset.n} subjects on a {dataset.shape} grid to {args.out}")
    return EXIT_OK


def cmd_fit(args) -> int:
    cfg = _resolve(args)
    _echo("fit", cfg)
    dataset = fileio.read_dataset(args.data)
    if cfg.tile is not None:
        tiling = dnc.make_tiling(dataset.shape, cfg.tile, cfg.halo)
        res = dnc.fit_tiled(dataset, cfg.solver, tiling, workers=cfg.workers)
    else:
        res = solver.fit(dataset, cfg.solver)
    out = args.out
    fileio.write_tensor(out / "beta.iosr", res.beta.to_array())
    fileio.write_tensor(out / "beta_sparse.iosr", res.beta_sparse.to_array())
    fileio.write_tensor(out / "alpha.iosr", res.alpha)
    record = {"config": cfg.to_dict(), **res.trace_record()}
    if res.tile_results and len(res.tile_results) > 1:
        record["tiles"] = [r.trace_record() for r in res.tile_results]
    fileio.write_json(out / "fit.json", record)
    print(f"{cfg.solver.penalty_kind.value}: {res.iterations} iterations, "
          f"converged={res.converged}")
    return EXIT_OK


def cmd_predict(args) -> int:
    field = CoefficientField.from_array(fileio.read_tensor(args.beta))
    X = fileio.read_covariates(args.covariates)
    Yhat = solver.predict_array(field, X)
    fileio.write_tensor(args.out, Yhat.reshape(len(X), field.shape.rows, field.shape.cols))
    print(f"wrote {len(X)} predictions to {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    est = fileio.read_tensor(args.estimate)
    if est.ndim != 3:
        raise FormatError("estimate tensor must have rank 3 (p x rows x cols)")
    report = {}
    if args.truth is not None:
        truth = fileio.read_tensor(args.truth)
        if truth.shape != est.shape:
            raise FormatError(f"truth {truth.shape} and estimate {est.shape} differ")
        report["selection_rate"] = [metrics.selection_rate(t, e) for t, e in zip(truth, est)]
    dataset = fileio.read_dataset(args.data) if args.data is not None else None
    if args.predictions is not None or dataset is not None:
        if dataset is None:
            raise FormatError("--predictions needs --data for the observed images")
        if args.predictions is not None:
            Yhat = fileio.read_tensor(args.predictions).reshape(dataset.n, -1)
        else:
            Yhat = solver.predict_array(CoefficientField.from_array(est), dataset.covariates)
        report["mse"] = metrics.prediction_mse(Yhat, dataset.responses)
    if args.roi_test is not None:
        if dataset is None:
            raise FormatError("--roi-test needs --data")
        col = args.roi_test
        coef = col if args.roi_coef is None else args.roi_coef
        grp = dataset.covariates[:, col] != 0
        mask = est[coef] != 0
        frac, _ = metrics.roi_ttest(dataset.responses[~grp], dataset.responses[grp],
                                    mask, args.level)
        report["roi_test"] = {"covariate": col, "coefficient": coef, "level": args.level,
                              "roi_pixels": int(mask.sum()), "fraction_significant": frac}
    text = fileio.dumps_record(report)
    print(text)
    if args.out is not None:
        fileio.write_json(args.out, report)
    return EXIT_OK


def cmd_benchmark(args) -> int:
    cfg = _resolve(args)
    _echo("benchmark", cfg)
    configs = {m: cfg.solver.replace(penalty_kind=m) for m in cfg.methods}
    report = metrics.run_benchmark(cfg.synth, configs, cfg.replicates, workers=cfg.workers)
    for m in report.methods:
        sr = " ".join(f"{v:.4f}" for v in report.sr[m])
        print(f"{m:10s} SR {sr}  MSE {report.mse[m]:.4f}  failures {report.failures[m]}")
    if args.out is not None:
        fileio.write_json(args.out, report.to_dict())
    return EXIT_OK


def cmd_cv(args) -> int:
    cfg = _resolve(args)
    _echo("cv", cfg)
    dataset = fileio.read_dataset(args.data)
    configs = {m: cfg.solver.replace(penalty_kind=m) for m in cfg.methods}
    result = metrics.run_cv(dataset, configs, cfg.folds, seed=args.fold_seed)
    for m in cfg.methods:
        print(f"{m:10s} held-out MSE {result[m]['mse']:.6f}")
    if args.out is not None:
        fileio.write_json(args.out, result)
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "predict": cmd_predict,
            "evaluate": cmd_evaluate, "benchmark": cmd_benchmark, "cv": cmd_cv}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (SolverDivergence, TileFailure) as exc:
        print(f"regionscad: solver failure: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (FileNotFoundError, IsADirectoryError, PermissionError, FormatError, ValueError,
            TypeError) as exc:
        print(f"regionscad: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # pragma: no cover - last resort
        print(f"regionscad: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
