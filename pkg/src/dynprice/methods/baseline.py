# -*- coding: utf-8 -*-
"""
Two-step iterative best response, the comparison method for the GA.

Round: customers respond to the current prices; the retailer then re-prices
with the demand held fixed. With demand fixed the retailer's problem is
"maximise p.D subject to bounds and the revenue cap", solved by scaling a
uniform price between p_min and p_max until the cap binds.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
from tqdm import tqdm

from dynprice.errors import SolverError
from dynprice.hems import as_prices
from dynprice.methods.ga import deb_compare
from dynprice.numerics import LinearProgram, solve_lp
from dynprice.retailer import MarketEvaluation, MarketLimits

logger = logging.getLogger(__name__)

TOL = 0.01
CAP_MARGIN = 1e-9  # relative slack under the revenue cap
MAX_ROUNDS = 50
RESTARTS = 3


@dataclass(frozen=True)
class BaselineConfig:
    tol: float = TOL
    max_rounds: int = MAX_ROUNDS
    restarts: int = RESTARTS
    seed: int = 0
    use_lp: bool = False


@dataclass
class BaselineResult:
    prices: np.ndarray
    evaluation: MarketEvaluation
    rounds: int
    trace: list[dict] = field(default_factory=list)
    restart: int = 0
    seconds: float = 0.0
    method: str = "baseline"


def uniform_scaling(demand: np.ndarray, limits: MarketLimits) -> np.ndarray:
    """Revenue-maximising prices for fixed demand: p_min + t (p_max - p_min), t in [0, 1]."""
    floor = float(limits.p_min @ demand)
    spread = float((limits.p_max - limits.p_min) @ demand)
    if spread <= 0:
        t = 0.0 if spread < 0 else 1.0
    else:
        t = float(np.clip((limits.revenue_cap * (1.0 - CAP_MARGIN) - floor) / spread, 0.0, 1.0))
    return limits.p_min + t * (limits.p_max - limits.p_min)


def lp_reprice(demand: np.ndarray, limits: MarketLimits) -> np.ndarray:
    lp = LinearProgram(c=-demand, A=demand[None, :], row_lower=[-np.inf], row_upper=[limits.revenue_cap],
                       lower=limits.p_min, upper=limits.p_max)
    report = solve_lp(lp)
    if not report.optimal:
        raise SolverError(f"retailer inner LP ended with status {report.status.value}")
    return report.x


def iterative_optimize(initial_prices, market, tol: float = TOL, max_rounds: int = MAX_ROUNDS,
                       use_lp: bool = False, restart: int = 0) -> BaselineResult:
    limits = market.limits
    prices = as_prices(initial_prices, limits.horizon)
    best_prices, best_eval = None, None
    trace = []
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        evaluation = market.evaluate(prices)
        if best_eval is None or deb_compare(best_eval, evaluation) > 0:
            best_prices, best_eval = prices, evaluation

        new_prices = uniform_scaling(evaluation.demand, limits)
        if use_lp:
            reference = lp_reprice(evaluation.demand, limits)
            gap = abs(float(reference @ evaluation.demand - new_prices @ evaluation.demand))
            if gap > 1e-6 * max(1.0, limits.revenue_cap):
                logger.warning("round %d: LP revenue differs from uniform scaling by %.3g cents", rounds, gap)
        change = float(np.max(np.abs(new_prices - prices)))
        trace.append({
            "restart": restart,
            "round": rounds,
            "profit": evaluation.profit,
            "revenue": evaluation.revenue,
            "violation": evaluation.violation,
            "price_change": change,
        })
        logger.debug("baseline restart %d round %d: profit %.4f, change %.4f",
                     restart, rounds, evaluation.profit, change)
        if change <= tol:
            break
        prices = new_prices
    return BaselineResult(prices=best_prices, evaluation=best_eval, rounds=rounds, trace=trace, restart=restart)


def starting_points(limits: MarketLimits, restarts: int, seed: int) -> list[np.ndarray]:
    """Restart 0 is the price floor; the others are seeded random vectors on the cent grid."""
    points = [limits.p_min.copy()]
    for stream in np.random.SeedSequence(seed).spawn(max(restarts - 1, 0)):
        rng = np.random.default_rng(stream)
        points.append(np.round(rng.uniform(limits.p_min, limits.p_max), 2))
    return points[:max(restarts, 1)]


def solve(market, settings: BaselineConfig, progress: bool = True) -> BaselineResult:
    started = time.perf_counter()
    best = None
    trace = []
    points = starting_points(market.limits, settings.restarts, settings.seed)
    for i, start in enumerate(tqdm(points, desc="baseline restarts", disable=not progress)):
        result = iterative_optimize(start, market, settings.tol, settings.max_rounds, settings.use_lp, restart=i)
        trace.extend(result.trace)
        if best is None or deb_compare(best.evaluation, result.evaluation) > 0:
            best = result
    best.trace = trace
    best.seconds = time.perf_counter() - started
    logger.info("baseline finished: profit %.2f cents (restart %d, %d rounds)",
                best.evaluation.profit, best.restart, best.rounds)
    return best
