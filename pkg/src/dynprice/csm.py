# -*- coding: utf-8 -*-
"""
Demand models for smart-meter customers without a HEMS.

Shiftable appliances: a distribution over "ran the i-th cheapest schedule"
ranks, updated once per metered day. Curtailable appliances: a per-slot
linear demand function of the window prices fitted by least squares.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
from sklearn.linear_model import LinearRegression, Ridge

from dynprice.errors import ConfigError, InfeasibleError, InputError, SingularFitError
from dynprice.hems import (
    ENERGY_EPS,
    ApplianceKind,
    ApplianceSpec,
    ConsumptionProfile,
    as_prices,
    price_units,
)

logger = logging.getLogger(__name__)

MAX_SCHEDULES = 4096
RIDGE_ALPHA = 1e-8
RIDGE_CONDITION = 1e10
PROB_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ScheduleSet:
    name: str
    kind: ApplianceKind
    schedules: tuple[tuple[int, ...], ...]
    per_slot: float
    horizon: int

    @property
    def k(self) -> int:
        return len(self.schedules)

    @cached_property
    def incidence(self) -> np.ndarray:
        """k x horizon 0/1 matrix, row i marks the slots of schedule i."""
        M = np.zeros((self.k, self.horizon))
        for i, slots in enumerate(self.schedules):
            M[i, list(slots)] = 1.0
        return M


@dataclass(frozen=True, eq=False)
class RankedCosts:
    order: np.ndarray   # schedule index at each rank, cheapest first
    costs: np.ndarray   # price sum of the schedule at each rank
    units: np.ndarray   # same sums in integer price units, used for tie detection


@dataclass(frozen=True, eq=False)
class RankProbabilityModel:
    probabilities: np.ndarray
    days: int = 0

    def __post_init__(self):
        P = np.asarray(self.probabilities, dtype=float)
        if P.ndim != 1 or P.size == 0:
            raise InputError("rank probabilities must be a non-empty vector")
        if np.any(P < -PROB_TOL) or np.any(P > 1 + PROB_TOL) or abs(P.sum() - 1.0) > PROB_TOL:
            raise InputError("rank probabilities must lie in [0, 1] and sum to 1")
        if self.days < 0:
            raise InputError("observation count must be non-negative")
        object.__setattr__(self, "probabilities", np.clip(P, 0.0, 1.0))

    @classmethod
    def uniform(cls, k: int, pseudo_days: int = 0) -> "RankProbabilityModel":
        """Uniform prior; pseudo_days > 0 counts it as that many observed days."""
        return cls(np.full(k, 1.0 / k), pseudo_days)

    @property
    def k(self) -> int:
        return self.probabilities.size


@dataclass(frozen=True, eq=False)
class CurtailableDemandModel:
    name: str
    slots: np.ndarray          # window slot indices
    intercept: np.ndarray      # (W,)
    coefficients: np.ndarray   # (W, W), row h: sensitivity of slot h to each window price

    def __post_init__(self):
        if not (np.all(np.isfinite(self.intercept)) and np.all(np.isfinite(self.coefficients))):
            raise InputError(f"{self.name}: demand coefficients must be finite")


# ====== Shiftable appliances ======

def enumerate_schedules(spec: ApplianceSpec, horizon: int = 24) -> ScheduleSet:
    if not spec.kind.shiftable:
        raise InputError(f"{spec.name}: only shiftable appliances have schedule sets")
    window = spec.window(horizon)
    run = spec.slots_needed
    T = window.size
    if run > T:
        raise InfeasibleError(f"{spec.name}: needs {run} slots, window has {T}")

    if spec.kind is ApplianceKind.INTERRUPTIBLE:
        k = math.comb(T, run)
        if k > MAX_SCHEDULES:
            raise ConfigError(f"{spec.name}: {k} candidate schedules exceed the cap of {MAX_SCHEDULES}")
        positions = itertools.combinations(range(T), run)
    else:
        positions = (tuple(range(s, s + run)) for s in range(T - run + 1))
    schedules = tuple(tuple(int(window[i]) for i in pos) for pos in positions)
    energy = spec.energy if spec.kind is ApplianceKind.INTERRUPTIBLE else spec.rated * run
    return ScheduleSet(spec.name, spec.kind, schedules, energy / run, horizon)


def rank_costs(prices, schedules: ScheduleSet) -> RankedCosts:
    p = as_prices(prices, schedules.horizon)
    M = schedules.incidence
    units = M.astype(np.int64) @ price_units(p)
    order = np.argsort(units, kind="stable")
    return RankedCosts(order=order, costs=(M @ p)[order], units=units[order])


def update_rank_probabilities(model: RankProbabilityModel, ranked: RankedCosts,
                              observed_index: int) -> RankProbabilityModel:
    """One day of the recursive frequency update P <- P + (delta - P) / (d + 1)."""
    if model.k != ranked.order.size:
        raise InputError(f"model has {model.k} ranks, ranking has {ranked.order.size}")
    hits = np.flatnonzero(ranked.order == observed_index)
    if hits.size != 1:
        raise InputError(f"schedule {observed_index} is not one of the {model.k} candidates")
    rank = int(hits[0])
    P = model.probabilities

    tied = np.flatnonzero(ranked.units == ranked.units[rank])
    delta = np.zeros(model.k)
    if tied.size == 1:
        delta[rank] = 1.0
    else:
        denominator = P[tied].sum()
        if denominator > 0:
            delta[tied] = P[tied] / denominator
        else:
            delta[tied] = 1.0 / tied.size

    updated = P + (delta - P) / (model.days + 1)
    updated = np.clip(updated, 0.0, 1.0)
    return RankProbabilityModel(updated / updated.sum(), model.days + 1)


def expected_shiftable_demand(prices, model: RankProbabilityModel,
                              schedules: ScheduleSet) -> ConsumptionProfile:
    if model.k != schedules.k:
        raise InputError(f"model has {model.k} ranks, schedule set has {schedules.k}")
    p = as_prices(prices, schedules.horizon)
    ranked = rank_costs(p, schedules)
    weights = np.zeros(schedules.k)
    weights[ranked.order] = model.probabilities
    kwh = schedules.per_slot * (weights @ schedules.incidence)
    return ConsumptionProfile.from_kwh(p, kwh)


def match_schedule(schedules: ScheduleSet, kwh) -> int:
    """Index of the schedule whose slot set equals the metered slots with positive use."""
    used = frozenset(int(h) for h in np.flatnonzero(np.asarray(kwh, dtype=float) > ENERGY_EPS))
    for i, slots in enumerate(schedules.schedules):
        if frozenset(slots) == used:
            return i
    raise InputError(f"{schedules.name}: metered use in slots {sorted(used)} matches no candidate schedule")


def fit_rank_probabilities(schedules: ScheduleSet, price_days, kwh_days,
                           pseudo_days: int = 0) -> RankProbabilityModel:
    """Replay a metered history, one update per day in day order."""
    model = RankProbabilityModel.uniform(schedules.k, pseudo_days)
    for prices, kwh in zip(price_days, kwh_days, strict=True):
        model = update_rank_probabilities(model, rank_costs(prices, schedules),
                                          match_schedule(schedules, kwh))
    return model


# ====== Curtailable appliances ======

def fit_curtailable_demand(window_prices, window_kwh, slots=None, name: str = "",
                           ridge: bool = True) -> CurtailableDemandModel:
    X = np.atleast_2d(np.asarray(window_prices, dtype=float))
    Y = np.atleast_2d(np.asarray(window_kwh, dtype=float))
    if X.shape != Y.shape:
        raise InputError(f"{name}: price history {X.shape} and consumption history {Y.shape} differ")
    D, W = X.shape
    if D < W + 1:
        raise InputError(f"{name}: {D} days cannot identify {W + 1} coefficients per slot")

    design = np.hstack([np.ones((D, 1)), X])
    condition = np.linalg.cond(design.T @ design)
    if condition > RIDGE_CONDITION:
        if not ridge:
            raise SingularFitError(f"{name}: price history is rank-deficient (cond {condition:.2e})")
        logger.warning("%s: normal matrix condition %.2e, fitting with ridge %.0e", name, condition, RIDGE_ALPHA)
        reg = Ridge(alpha=RIDGE_ALPHA, fit_intercept=True)
    else:
        reg = LinearRegression(fit_intercept=True)
    reg.fit(X, Y)

    slots = np.arange(W) if slots is None else np.asarray(slots, dtype=int)
    return CurtailableDemandModel(name, slots, np.atleast_1d(reg.intercept_).astype(float),
                                  np.atleast_2d(reg.coef_).astype(float))


def predict_curtailable(model: CurtailableDemandModel, prices) -> ConsumptionProfile:
    p = as_prices(prices)
    kwh = np.zeros(p.size)
    raw = model.intercept + model.coefficients @ p[model.slots]
    kwh[model.slots] = np.maximum(raw, 0.0)
    return ConsumptionProfile.from_kwh(p, kwh)


# ====== Per-appliance learner ======

@dataclass(frozen=True, eq=False)
class ApplianceLearner:
    """What the retailer knows about one metered appliance."""

    spec: ApplianceSpec
    schedules: ScheduleSet | None = None
    rank_model: RankProbabilityModel | None = None
    curtailable_model: CurtailableDemandModel | None = None

    @classmethod
    def shiftable(cls, spec: ApplianceSpec, horizon: int, price_days, kwh_days,
                  pseudo_days: int = 0) -> "ApplianceLearner":
        schedules = enumerate_schedules(spec, horizon)
        return cls(spec, schedules, fit_rank_probabilities(schedules, price_days, kwh_days, pseudo_days))

    @classmethod
    def curtailable(cls, spec: ApplianceSpec, horizon: int, price_days, kwh_days,
                    ridge: bool = True) -> "ApplianceLearner":
        slots = spec.window(horizon)
        prices = np.asarray(price_days, dtype=float)[:, slots]
        kwh = np.asarray(kwh_days, dtype=float)[:, slots]
        return cls(spec, curtailable_model=fit_curtailable_demand(prices, kwh, slots, spec.name, ridge))

    def respond(self, prices) -> ConsumptionProfile:
        if self.rank_model is not None:
            return expected_shiftable_demand(prices, self.rank_model, self.schedules)
        return predict_curtailable(self.curtailable_model, prices)

    def observe(self, prices, kwh) -> "ApplianceLearner":
        """Fold one metered day into the rank model; curtailable models are left as fitted."""
        if self.rank_model is None:
            return self
        ranked = rank_costs(prices, self.schedules)
        model = update_rank_probabilities(self.rank_model, ranked, match_schedule(self.schedules, kwh))
        return replace(self, rank_model=model)
