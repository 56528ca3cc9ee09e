# -*- coding: utf-8 -*-
"""
Aggregated linear demand model for customers without smart meters.

    demand_h = alpha_h + sum_l beta[h, l] * p_l

fitted by exponentially weighted least squares under the elasticity sign
constraints:
    beta[h, h] <= -SELF_ELASTICITY_EPS      (own price raises cut demand)
    beta[h, l] >= 0, h != l                 (substitution between hours)
    sum_l beta[l, h] <= 0 for every h       (a price rise never adds total demand)
"""
from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass

import numpy as np

from dynprice.errors import InputError, SolverError
from dynprice.hems import as_prices
from dynprice.numerics import QuadraticProgram, SolveStatus, solve_qp

logger = logging.getLogger(__name__)

SELF_ELASTICITY_EPS = 1e-9
DEMAND_SCALE_FLOOR = 1e-6
DEFAULT_FORGETTING = 1.0


@dataclass(frozen=True, eq=False)
class AggregateDemandModel:
    intercept: np.ndarray    # (H,)
    elasticity: np.ndarray   # (H, H), row h: response of hour h to each hour's price

    def __post_init__(self):
        a = np.asarray(self.intercept, dtype=float).ravel()
        B = np.atleast_2d(np.asarray(self.elasticity, dtype=float))
        if B.shape != (a.size, a.size):
            raise InputError(f"elasticity matrix {B.shape} does not match {a.size} intercepts")
        object.__setattr__(self, "intercept", a)
        object.__setattr__(self, "elasticity", B)

    @property
    def horizon(self) -> int:
        return self.intercept.size


@dataclass(frozen=True, eq=False)
class DemandHistory:
    prices: np.ndarray   # (D, H)
    demand: np.ndarray   # (D, H)
    forgetting: float = DEFAULT_FORGETTING

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.prices, dtype=float))
        Y = np.atleast_2d(np.asarray(self.demand, dtype=float))
        if P.shape != Y.shape:
            raise InputError(f"price history {P.shape} and demand history {Y.shape} differ")
        if np.any(Y < 0):
            raise InputError("aggregate demand must be non-negative")
        if not 0.0 <= self.forgetting <= 1.0:
            raise InputError(f"forgetting factor {self.forgetting} outside [0, 1]")
        object.__setattr__(self, "prices", P)
        object.__setattr__(self, "demand", Y)

    @property
    def days(self) -> int:
        return self.prices.shape[0]

    @property
    def horizon(self) -> int:
        return self.prices.shape[1]

    @property
    def weights(self) -> np.ndarray:
        """lambda^(D-d) for d = 1..D, newest day weight 1."""
        return self.forgetting ** np.arange(self.days - 1, -1, -1, dtype=float)

    def append(self, prices, demand) -> "DemandHistory":
        return DemandHistory(np.vstack([self.prices, np.asarray(prices, dtype=float)]),
                             np.vstack([self.demand, np.asarray(demand, dtype=float)]),
                             self.forgetting)


def predict_aggregate(model: AggregateDemandModel, prices, clamp: bool = True) -> np.ndarray:
    p = as_prices(prices, model.horizon)
    raw = model.intercept + model.elasticity @ p
    return np.maximum(raw, 0.0) if clamp else raw


def weighted_residual(model: AggregateDemandModel, history: DemandHistory) -> float:
    fitted = model.intercept[None, :] + history.prices @ model.elasticity.T
    return float(history.weights @ np.sum((fitted - history.demand) ** 2, axis=1))


def check_constraints(model: AggregateDemandModel) -> float:
    """Largest violation of the three constraint families, 0.0 for a valid model."""
    B = model.elasticity
    diag = np.diag(B)
    off = B[~np.eye(model.horizon, dtype=bool)]
    return float(max(
        np.max(diag + SELF_ELASTICITY_EPS, initial=0.0),
        np.max(-off, initial=0.0),
        np.max(B.sum(axis=0), initial=0.0),
        0.0,
    ))


def project_feasible(elasticity: np.ndarray) -> np.ndarray:
    """Clip signs, then lower each diagonal entry by its column's positive excess."""
    H = elasticity.shape[0]
    B = np.array(elasticity, dtype=float)
    off = ~np.eye(H, dtype=bool)
    B[off] = np.maximum(B[off], 0.0)
    idx = np.arange(H)
    B[idx, idx] = np.minimum(B[idx, idx], -SELF_ELASTICITY_EPS)
    for h in range(H):
        excess = B.sum(axis=0)[h]
        if excess > 0:
            B[h, h] -= excess
        # column sums reduced as in check_constraints
        while B.sum(axis=0)[h] > 0:
            B[h, h] = np.nextafter(B[h, h], -np.inf)
    return B


def _constraint_rows(H: int, self_bound: float = -SELF_ELASTICITY_EPS):
    """Constraint matrix over x = [theta_0, ..., theta_{H-1}], theta_h = [alpha_h, beta[h, :]]."""
    width = H + 1
    rows, lower, upper = [], [], []
    for h in range(H):
        for l in range(H):
            row = np.zeros(H * width)
            row[h * width + 1 + l] = 1.0
            rows.append(row)
            if h == l:
                lower.append(-np.inf)
                upper.append(self_bound)
            else:
                lower.append(0.0)
                upper.append(np.inf)
    for h in range(H):
        row = np.zeros(H * width)
        row[[l * width + 1 + h for l in range(H)]] = 1.0
        rows.append(row)
        lower.append(-np.inf)
        upper.append(0.0)
    return np.array(rows), np.array(lower), np.array(upper)


def fit_aggregate_demand(history: DemandHistory, tol: float = 1e-8,
                         max_iter: int = 100_000) -> AggregateDemandModel:
    D, H = history.days, history.horizon
    if D < H + 1:
        raise InputError(f"{D} days cannot identify {H + 1} coefficients per hour (need {H + 1})")

    w = history.weights
    total = w.sum()
    if total <= 0:
        raise InputError("forgetting factor leaves no weighted days")
    # centred prices only shift the intercept; beta and its constraints are unchanged
    centre = (w @ history.prices) / total
    X = np.hstack([np.ones((D, 1)), history.prices - centre])
    gram = (X.T * w) @ X / total
    gram = 0.5 * (gram + gram.T)
    # solve for unit-mean demand; the objective is homogeneous so only the own-price bound moves
    scale = max(float(w @ history.demand.mean(axis=1)) / total, DEMAND_SCALE_FLOOR)
    y = history.demand / scale

    width = H + 1
    Q = np.zeros((H * width, H * width))
    q = np.zeros(H * width)
    for h in range(H):
        block = slice(h * width, (h + 1) * width)
        Q[block, block] = 2.0 * gram
        q[block] = -2.0 * (X.T * w) @ y[:, h] / total

    A, lower, upper = _constraint_rows(H, self_bound=-SELF_ELASTICITY_EPS / scale)
    report = solve_qp(QuadraticProgram(Q, q, A, lower, upper), tol=tol, max_iter=max_iter)
    if report.status is SolveStatus.INFEASIBLE:
        raise SolverError("elasticity-constrained fit reported an empty feasible set")
    if report.status is SolveStatus.MAX_ITERATIONS:
        logger.warning("aggregate demand fit stopped at %d iterations; projecting onto the constraints",
                       report.iterations)

    theta = scale * report.x.reshape(H, width)
    elasticity = project_feasible(theta[:, 1:])
    intercept = theta[:, 0] - elasticity @ centre
    logger.debug("aggregate demand fit: %d days, demand scale %.4g, status %s, %d iterations",
                 D, scale, report.status.value, report.iterations)
    return AggregateDemandModel(intercept, elasticity)


def save_model(model: AggregateDemandModel, path: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    payload = {
        "intercept": model.intercept.tolist(),
        "elasticity": model.elasticity.tolist(),
        "max_violation": check_constraints(model),
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)
    return path


def load_model(path: str) -> AggregateDemandModel:
    try:
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
        return AggregateDemandModel(np.array(payload["intercept"]), np.array(payload["elasticity"]))
    except (OSError, json.JSONDecodeError, KeyError) as e:
        raise InputError(f"cannot read demand model {path}: {e}") from e
