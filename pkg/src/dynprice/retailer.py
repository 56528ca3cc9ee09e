# -*- coding: utf-8 -*-
"""Retailer economics: procurement cost, revenue, profit and market constraints."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from dynprice.errors import InputError
from dynprice.hems import HORIZON, ConsumptionProfile, as_prices

logger = logging.getLogger(__name__)

# wholesale cost C_h(L) = a L^2 + b L + c, cents
COST_A = 0.005
COST_B = 5.0
COST_C = 0.0

P_MIN = 6.0
P_MAX = 14.0
REVENUE_CAP_PER_CUSTOMER = 350.0
PV_REVENUE_CAP_PER_CUSTOMER = 270.0
CAPACITY_HEADROOM = 1.5


def _per_slot(values, horizon: int, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        arr = np.full(horizon, float(arr))
    if arr.shape != (horizon,):
        raise InputError(f"{name} has shape {arr.shape}, expected ({horizon},)")
    return arr


@dataclass(frozen=True, eq=False)
class CostModel:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        H = np.asarray(self.a).size
        a, b, c = (_per_slot(v, H, n) for v, n in ((self.a, "a"), (self.b, "b"), (self.c, "c")))
        if np.any(a <= 0) or np.any(b < 0) or np.any(c < 0):
            raise InputError("cost coefficients need a > 0, b >= 0, c >= 0")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @classmethod
    def uniform(cls, a: float = COST_A, b: float = COST_B, c: float = COST_C,
                horizon: int = HORIZON) -> "CostModel":
        return cls(np.full(horizon, a), np.full(horizon, b), np.full(horizon, c))

    @property
    def horizon(self) -> int:
        return self.a.size

    def slot_cost(self, load) -> np.ndarray:
        """Per-slot cost; exported energy (negative load) is bought at zero cost."""
        L = np.maximum(np.asarray(load, dtype=float), 0.0)
        return self.a * L ** 2 + self.b * L + self.c

    def total(self, load) -> float:
        return float(self.slot_cost(load).sum())


@dataclass(frozen=True, eq=False)
class MarketLimits:
    p_min: np.ndarray
    p_max: np.ndarray
    capacity: np.ndarray
    revenue_cap: float

    def __post_init__(self):
        H = np.asarray(self.p_min).size
        p_min = _per_slot(self.p_min, H, "p_min")
        p_max = _per_slot(self.p_max, H, "p_max")
        capacity = _per_slot(self.capacity, H, "capacity")
        if np.any(p_min > p_max):
            raise InputError("p_min exceeds p_max")
        if np.any(capacity <= 0) or self.revenue_cap <= 0:
            raise InputError("capacity and revenue cap must be positive")
        object.__setattr__(self, "p_min", p_min)
        object.__setattr__(self, "p_max", p_max)
        object.__setattr__(self, "capacity", capacity)
        object.__setattr__(self, "revenue_cap", float(self.revenue_cap))

    @classmethod
    def uniform(cls, capacity: float, revenue_cap: float, p_min: float = P_MIN,
                p_max: float = P_MAX, horizon: int = HORIZON) -> "MarketLimits":
        return cls(np.full(horizon, p_min), np.full(horizon, p_max), np.full(horizon, capacity), revenue_cap)

    @property
    def horizon(self) -> int:
        return self.p_min.size


@dataclass(frozen=True, eq=False)
class MarketEvaluation:
    demand: np.ndarray
    revenue: float
    cost: float
    profit: float
    violation: float

    @property
    def feasible(self) -> bool:
        return self.violation == 0.0

    def as_dict(self) -> dict:
        return {
            "revenue": self.revenue,
            "cost": self.cost,
            "profit": self.profit,
            "violation": self.violation,
            "feasible": self.feasible,
        }


def violation(demand: np.ndarray, revenue: float, limits: MarketLimits) -> float:
    over_capacity = np.maximum(demand - limits.capacity, 0.0) / limits.capacity
    over_revenue = max(revenue - limits.revenue_cap, 0.0) / limits.revenue_cap
    return float(over_capacity.sum() + over_revenue)


def evaluate_prices(prices, responses: Sequence[ConsumptionProfile], cost_model: CostModel,
                    limits: MarketLimits) -> MarketEvaluation:
    """Aggregate group responses into demand, revenue, cost and constraint violation.

    Each response carries a group's hourly demand and its total (expected) bill.
    """
    H = limits.horizon
    if cost_model.horizon != H:
        raise InputError(f"cost model covers {cost_model.horizon} slots, limits cover {H}")
    as_prices(prices, H)
    demand = np.zeros(H)
    revenue = 0.0
    for response in responses:
        if response.kwh.shape != (H,):
            raise InputError(f"group response has shape {response.kwh.shape}, expected ({H},)")
        demand = demand + response.kwh
        revenue += response.bill
    cost = cost_model.total(demand)
    return MarketEvaluation(demand=demand, revenue=float(revenue), cost=cost,
                            profit=float(revenue) - cost, violation=violation(demand, revenue, limits))


@dataclass(frozen=True, eq=False)
class Market:
    """The retailer's view of one day: customer groups plus cost and limits."""

    groups: tuple
    cost_model: CostModel
    limits: MarketLimits

    @property
    def horizon(self) -> int:
        return self.limits.horizon

    @property
    def customers(self) -> int:
        return sum(len(g) for g in self.groups)

    def responses(self, prices) -> list[ConsumptionProfile]:
        return [g.respond(prices) for g in self.groups]

    def evaluate(self, prices) -> MarketEvaluation:
        p = as_prices(prices, self.horizon)
        return evaluate_prices(p, self.responses(p), self.cost_model, self.limits)
