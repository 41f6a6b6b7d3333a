"""ADMM for penalized image-on-scalar regression.

The problem

    min_beta  c sum_i ||Y_i - X_i beta||^2 + pen(beta)

with ``c = 1`` (``loss="sum"``) or ``c = 1/n`` (``loss="mean"``) is split as
``alpha = D beta``.  Each iteration runs, in this order,

    alpha <- threshold_rows(D beta - eta / rho)
    beta  <- M^{-1} (b + D^T eta + rho D^T alpha)
    eta   <- eta + rho (alpha - D beta)

with ``M = 2c sum_i X_i^T X_i + rho D^T D`` factorized once per fit.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import (CoefficientField, Dataset, FitResult, GridShape, Image,
                   PenaltyKind, SolverConfig)
from .diffops import DiffOperator, build_diff_operator
from .penalty import effective_row_weights, penalty_value_vec, threshold_rows

log = logging.getLogger(__name__)

RIDGE = 1e-10


class SolverDivergence(RuntimeError):
    """Raised when the iterates stop being finite."""

    def __init__(self, message, iteration, primal_residuals, dual_residuals, objective_trace):
        super().__init__(message)
        self.iteration = iteration
        self.primal_residuals = np.asarray(primal_residuals)
        self.dual_residuals = np.asarray(dual_residuals)
        self.objective_trace = np.asarray(objective_trace)


@dataclass(frozen=True, eq=False)
class NormalSystem:
    matrix: sp.csc_matrix
    rhs_base: np.ndarray
    solve: Callable[[np.ndarray], np.ndarray]
    ridge: float = 0.0

    def residual(self, x, rhs) -> float:
        """Relative residual ``||M x - rhs|| / (1 + ||rhs||)``."""
        return float(np.linalg.norm(self.matrix @ x - rhs) / (1.0 + np.linalg.norm(rhs)))


def data_gram(dataset: Dataset, config: SolverConfig) -> np.ndarray:
    """``2c X^T X``, the p-by-p covariate block of the normal matrix."""
    X = dataset.covariates
    return 2.0 * config.loss_weight(dataset.n) * (X.T @ X)


def assemble(dataset: Dataset, op: DiffOperator, config: SolverConfig) -> NormalSystem:
    if dataset.shape != op.shape or dataset.p != op.p:
        raise ValueError("dataset does not match the difference operator")
    npix = dataset.shape.size
    M = sp.kron(sp.csr_matrix(data_gram(dataset, config)), sp.identity(npix), format="csc")
    M = M + config.rho * op.gram()
    if config.penalty_kind is PenaltyKind.GRAPHNET and config.lam * config.gamma > 0:
        M = M + 2.0 * config.lam * config.gamma * op.gradient_gram()
    M = sp.csc_matrix(M)
    M.sort_indices()
    c2 = 2.0 * config.loss_weight(dataset.n)
    rhs = (c2 * (dataset.covariates.T @ dataset.responses)).ravel()

    ridge = 0.0
    try:
        lu = spla.splu(M, permc_spec="MMD_AT_PLUS_A")
        if not np.all(np.isfinite(lu.U.diagonal())) or np.any(lu.U.diagonal() == 0):
            raise RuntimeError("singular factor")
    except RuntimeError:
        ridge = RIDGE
        warnings.warn("normal matrix is numerically singular; adding a 1e-10 ridge",
                      RuntimeWarning, stacklevel=2)
        M = sp.csc_matrix(M + ridge * sp.identity(M.shape[0], format="csc"))
        lu = spla.splu(M, permc_spec="MMD_AT_PLUS_A")
    return NormalSystem(M, rhs, lu.solve, ridge)


def data_loss(beta_vec, dataset: Dataset, config: SolverConfig) -> float:
    B = np.asarray(beta_vec).reshape(dataset.p, dataset.shape.size)
    resid = dataset.responses - dataset.covariates @ B
    return config.loss_weight(dataset.n) * float(np.einsum("ij,ij->", resid, resid))


def objective(beta_vec, dataset: Dataset, config: SolverConfig, op: DiffOperator) -> float:
    return data_loss(beta_vec, dataset, config) + penalty_value_vec(beta_vec, config, op)


def initial_beta(n_cols: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).uniform(0.0, 1.0, size=n_cols)


def fit(dataset: Dataset, config: SolverConfig, op: DiffOperator | None = None,
        system: NormalSystem | None = None, callback=None) -> FitResult:
    """Run the ADMM loop until both residuals fall under tolerance or ``max_iter``.

    Parameters
    ----------
    dataset : Dataset
    config : SolverConfig
    op, system : optional
        Prebuilt operator and factorized normal system, reused when fitting
        several datasets that share the covariates and configuration.
    callback : callable, optional
        Called as ``callback(iteration, beta, alpha, eta)`` after each iteration.
    """
    if op is None:
        op = build_diff_operator(dataset.shape, dataset.p, config.gamma)
    if system is None:
        system = assemble(dataset, op, config)

    rho = config.rho
    weights = effective_row_weights(op, config.penalty_kind)
    sqrt_m = np.sqrt(op.n_rows)
    sqrt_n = np.sqrt(op.n_cols)

    beta = initial_beta(op.n_cols, config.seed)
    Dbeta = op.apply(beta)
    alpha = Dbeta.copy()
    eta = np.zeros(op.n_rows)

    r_hist, s_hist, obj_hist, lin_hist = [], [], [], []
    converged = False
    it = 0
    for it in range(1, config.max_iter + 1):
        alpha_new = threshold_rows(Dbeta - eta / rho, op, config, weights)
        rhs = system.rhs_base + op.apply_adjoint(eta + rho * alpha_new)
        beta = system.solve(rhs)
        lin_hist.append(system.residual(beta, rhs))
        Dbeta = op.apply(beta)
        r = alpha_new - Dbeta
        eta = eta + rho * r
        s = rho * op.apply_adjoint(alpha_new - alpha)
        alpha = alpha_new

        r_norm = float(np.linalg.norm(r))
        s_norm = float(np.linalg.norm(s))
        r_hist.append(r_norm)
        s_hist.append(s_norm)
        obj_hist.append(objective(beta, dataset, config, op))
        if callback is not None:
            callback(it, beta, alpha, eta)

        if not (np.isfinite(r_norm) and np.isfinite(s_norm) and np.isfinite(obj_hist[-1])):
            raise SolverDivergence(f"non-finite iterate at iteration {it}", it,
                                   r_hist, s_hist, obj_hist)
        eps_pri = sqrt_m * config.eps_abs + config.eps_rel * max(
            np.linalg.norm(alpha), np.linalg.norm(Dbeta))
        eps_dual = sqrt_n * config.eps_abs + config.eps_rel * np.linalg.norm(op.apply_adjoint(eta))
        if r_norm <= eps_pri and s_norm <= eps_dual:
            converged = True
            break

    log.debug("fit %s: %d iterations, converged=%s", config.penalty_kind.value, it, converged)
    shape, p = dataset.shape, dataset.p
    result = FitResult(
        beta=CoefficientField.from_vector(beta, shape, p),
        alpha=alpha,
        beta_sparse=extract_sparse_beta(alpha, op),
        iterations=it,
        primal_residuals=np.array(r_hist),
        dual_residuals=np.array(s_hist),
        objective_trace=np.array(obj_hist),
        converged=converged,
        config=config,
        linsolve_residuals=np.array(lin_hist),
    )
    return result


def extract_sparse_beta(alpha, op: DiffOperator) -> CoefficientField:
    """Average the value rows of ``alpha`` that reference each pixel."""
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != (op.n_rows,):
        raise ValueError(f"expected alpha of length {op.n_rows}")
    val = op.is_value
    cols = op.value_column[val]
    entries = alpha[val]
    mult = op.value_multiplicity
    if np.any(mult == 0):
        raise RuntimeError("pixel without a value row; operator is malformed")
    out = np.bincount(cols, weights=entries, minlength=op.n_cols) / mult
    # keep "zero iff all entries are zero" even under exact cancellation
    nnz = np.bincount(cols, weights=(entries != 0).astype(float), minlength=op.n_cols)
    cancelled = np.flatnonzero((out == 0) & (nnz > 0))
    for c in cancelled:
        e = entries[cols == c]
        out[c] = e[np.argmax(np.abs(e))]
    return CoefficientField.from_vector(out, op.shape, op.p)


def predict_array(field: CoefficientField, covariates) -> np.ndarray:
    X = np.atleast_2d(np.asarray(covariates, dtype=np.float64))
    if X.shape[1] != field.p:
        raise ValueError(f"covariates have {X.shape[1]} entries, field has {field.p}")
    B = field.to_vector().reshape(field.p, field.shape.size)
    return X @ B


def predict(field: CoefficientField, covariates: Sequence) -> list:
    Yhat = predict_array(field, covariates)
    return [Image(field.shape, y) for y in Yhat]
