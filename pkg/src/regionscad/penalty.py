"""SCAD penalty, its exact proximal map, and the row-wise thresholding step."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CoefficientField, PenaltyKind, SolverConfig
from .diffops import DiffOperator, tv_norm, gradient


@dataclass(frozen=True)
class ScadParams:
    lam: float
    a: float = 3.7

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError("lam must be nonnegative")
        if not self.a > 2:
            raise ValueError("SCAD shape a must exceed 2")


def scad_derivative(t, params: ScadParams):
    """``rho'(t)`` for ``t >= 0``."""
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise ValueError("scad_derivative is defined for t >= 0")
    lam, a = params.lam, params.a
    if lam == 0:
        return np.zeros_like(t)[()]
    tail = np.maximum(a * lam - t, 0.0) / (a - 1.0)
    return np.where(t <= lam, lam, tail)[()]


def scad_value(t, params: ScadParams):
    """``rho(|t|)``: linear, then quadratic blend, then flat at ``lam^2 (a+1)/2``."""
    t = np.abs(np.asarray(t, dtype=np.float64))
    lam, a = params.lam, params.a
    mid = (2 * a * lam * t - t * t - lam * lam) / (2 * (a - 1))
    flat = lam * lam * (a + 1) / 2
    return np.where(t <= lam, lam * t, np.where(t <= a * lam, mid, flat))[()]


def soft_threshold(z, threshold):
    z = np.asarray(z, dtype=np.float64)
    return (np.sign(z) * np.maximum(np.abs(z) - threshold, 0.0))[()]


def _prox_objective(theta, z, rho, w, params):
    return 0.5 * rho * (z - theta) ** 2 + w * scad_value(theta, params)


def _scad_prox_enumerate(z, rho, w, params):
    # Minimize piece by piece over t = |theta| with sign(theta) = sign(z).
    lam, a = params.lam, params.a
    az = np.abs(z)
    kappa = w / rho
    with np.errstate(divide="ignore", invalid="ignore"):
        mid = ((a - 1) * az - kappa * a * lam) / (a - 1 - kappa)
    mid = np.where(np.isfinite(mid), np.clip(mid, lam, a * lam), lam)
    cands = np.stack([
        np.zeros_like(az),
        np.clip(az - kappa * lam, 0.0, lam),
        np.full_like(az, lam),
        mid,
        np.full_like(az, a * lam),
        np.maximum(az, a * lam),
    ])
    obj = _prox_objective(cands, az, rho, w, params)
    best = obj.min(axis=0)
    # ties go to the smallest |theta|
    tied = obj <= best + 1e-14 * np.maximum(1.0, np.abs(best))
    t = np.where(tied, cands, np.inf).min(axis=0)
    return np.sign(z) * t


def scad_prox(z, quad_weight, pen_weight, params: ScadParams):
    """Global minimizer of ``quad_weight/2 (z - theta)^2 + pen_weight * rho(|theta|)``.

    Works elementwise on arrays; ``pen_weight`` broadcasts against ``z``.
    """
    rho = float(quad_weight)
    if not rho > 0:
        raise ValueError("quad_weight must be positive")
    z = np.asarray(z, dtype=np.float64)
    w = np.broadcast_to(np.asarray(pen_weight, dtype=np.float64), z.shape)
    if np.any(w < 0):
        raise ValueError("pen_weight must be nonnegative")
    lam, a = params.lam, params.a
    kappa = w / rho
    az = np.abs(z)

    out = np.array(z, copy=True)
    convex = kappa < a - 1
    soft = convex & (az <= (1 + kappa) * lam)
    middle = convex & ~soft & (az <= a * lam)
    out[soft] = (np.sign(z) * np.maximum(az - kappa * lam, 0.0))[soft]
    if np.any(middle):
        km = kappa[middle]
        out[middle] = np.sign(z[middle]) * ((a - 1) * az[middle] - km * a * lam) / (a - 1 - km)
    hard = ~convex
    if np.any(hard):
        out[hard] = _scad_prox_enumerate(z[hard], rho, w[hard], params)
    out[w == 0] = z[w == 0]
    return out[()]


def effective_row_weights(op: DiffOperator, kind: PenaltyKind) -> np.ndarray:
    """Per-row penalty weights for the given variant.

    SCAD2TV uses the grouped weights as they are.  The convex baselines count
    each pixel once in their l1 term, so a value row is divided by the number
    of groups that reference its pixel.
    """
    kind = PenaltyKind.parse(kind)
    if kind is PenaltyKind.SCAD2TV:
        return np.asarray(op.row_weight)
    w = np.array(op.row_weight, dtype=np.float64)
    val = op.is_value
    w[val] = w[val] / op.value_multiplicity[op.value_column[val]]
    if kind is PenaltyKind.GRAPHNET:
        w[op.is_gradient] = 0.0
    return w


def threshold_rows(z, op: DiffOperator, config: SolverConfig, weights=None) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (op.n_rows,):
        raise ValueError(f"expected a vector of length {op.n_rows}, got {z.shape}")
    kind = config.penalty_kind
    if weights is None:
        weights = effective_row_weights(op, kind)
    if kind is PenaltyKind.SCAD2TV:
        return scad_prox(z, config.rho, weights, ScadParams(config.lam, config.a))
    out = soft_threshold(z, config.lam * weights / config.rho)
    if kind is PenaltyKind.GRAPHNET:
        grad = op.is_gradient
        out[grad] = z[grad]
    return out


def penalty_value_vec(beta_vec, config: SolverConfig, op: DiffOperator) -> float:
    kind = config.penalty_kind
    lam, g = config.lam, config.gamma
    if kind is PenaltyKind.SCAD2TV:
        Db = op.apply(beta_vec)
        return float(np.dot(op.row_weight, scad_value(Db, ScadParams(lam, config.a))))
    Db = op.apply(beta_vec)
    grad = Db[op.is_gradient]
    l1 = float(np.abs(beta_vec).sum())
    if kind is PenaltyKind.TV_L1:
        return lam * (g * float(np.abs(grad).sum()) + (1 - g) * l1)
    return lam * (g * float(np.dot(grad, grad)) + (1 - g) * l1)


def penalty_value(field: CoefficientField, config: SolverConfig, op: DiffOperator) -> float:
    if field.shape != op.shape or field.p != op.p:
        raise ValueError("coefficient field does not match the operator")
    kind = config.penalty_kind
    if kind is PenaltyKind.SCAD2TV:
        return penalty_value_vec(field.to_vector(), config, op)
    lam, g = config.lam, config.gamma
    total = 0.0
    for im in field.images:
        l1 = float(np.abs(im.values).sum())
        if kind is PenaltyKind.TV_L1:
            smooth = tv_norm(im)
        else:
            smooth = float((gradient(im) ** 2).sum())
        total += lam * (g * smooth + (1 - g) * l1)
    return total
