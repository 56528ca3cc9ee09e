# -*- coding: utf-8 -*-
"""
Scenario configuration, synthetic histories and case-study orchestration.

A case run builds the three customer groups (C-HEMS, C-SM, C-NONE), fits
the learned models from their histories, wires the market evaluation into
the GA and, optionally, the iterative baseline.
"""
from __future__ import annotations

import contextlib
import dataclasses
import logging
import os
import time
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import yaml
from tqdm import tqdm

from dynprice.cnone import DemandHistory, fit_aggregate_demand, AggregateDemandModel
from dynprice.csm import ApplianceLearner
from dynprice.errors import ConfigError, InputError, ParseError, StageError
from dynprice.groups import get_group
from dynprice.groups.sm_group import SmartMeterHousehold
from dynprice.hems import (
    HORIZON,
    ApplianceKind,
    ApplianceSpec,
    HouseholdSpec,
    StorageSpec,
    clock_window,
    daylight_pv,
    household_response,
    schedule_appliance,
    schedule_with_waiting_cost,
)
from dynprice.methods import get_method
from dynprice.methods.baseline import BaselineConfig, BaselineResult, uniform_scaling
from dynprice.methods.ga import GaConfig, encode
from dynprice.retailer import CostModel, Market, MarketLimits

logger = logging.getLogger(__name__)

DATA_PATH = os.path.join(os.path.dirname(__file__), "data")
DEFAULT_CONFIG = os.path.join(DATA_PATH, "default_scenario.yaml")
CONFIG_ENV = "DYNPRICE_CONFIG"

DAILY_KWH_PER_HOUSEHOLD = 36.0
MIN_CSM_DAYS = 30
REFERENCE_PRICE = 10.0


# =====================================================================
# ====== Configuration ================================================
# =====================================================================

@dataclass(frozen=True)
class CustomerCounts:
    hems: int = 0
    sm: int = 0
    none: int = 0

    def __post_init__(self):
        if min(self.hems, self.sm, self.none) < 0:
            raise InputError("customer counts must be non-negative")

    @property
    def total(self) -> int:
        return self.hems + self.sm + self.none

    def scaled(self, total: int) -> "CustomerCounts":
        """Same mix for a pool of `total` customers; the last non-empty group takes the rounding remainder."""
        if self.total == total:
            return self
        shares = [self.hems, self.sm, self.none]
        counts = [round(s * total / self.total) for s in shares]
        last = max(i for i, s in enumerate(shares) if s > 0)
        counts[last] = total - sum(counts[:last])
        if counts[last] < 0:
            raise ConfigError(f"cannot scale {self} to {total} customers")
        return CustomerCounts(*counts)


@dataclass(frozen=True)
class StorageConfig:
    enabled: bool = False
    capacity: float = 10.0
    rate: float = 2.0
    initial: float = 8.0
    final: float = 8.0
    sell_back: bool = False

    def spec(self) -> StorageSpec | None:
        if not self.enabled:
            return None
        return StorageSpec(self.capacity, self.rate, self.initial, self.final, self.sell_back)


@dataclass(frozen=True)
class PvConfig:
    enabled: bool = False
    peak_kwh: float = 1.25

    def curve(self, horizon: int = HORIZON) -> np.ndarray | None:
        return daylight_pv(self.peak_kwh, horizon) if self.enabled else None


@dataclass(frozen=True)
class CostConfig:
    a: float = 0.005
    b: float = 5.0
    c: float = 0.0


@dataclass(frozen=True)
class MarketConfig:
    p_min: float = 6.0
    p_max: float = 14.0
    revenue_cap_per_customer: float = 350.0
    pv_revenue_cap_per_customer: float = 270.0
    capacity_per_customer: float | None = None
    capacity_headroom: float = 1.5


@dataclass(frozen=True)
class CsmConfig:
    history_days: int = 90
    w_max: float = 0.5
    noise: float = 0.1
    pseudo_days: int = 0
    ridge: bool = True


@dataclass(frozen=True)
class CnoneConfig:
    history_csv: str | None = None
    history_days: int = 60
    forgetting: float = 1.0
    tol: float = 1e-8
    max_iter: int = 100_000


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 7
    customers: int = 100
    case: int = 6
    cases: dict = field(default_factory=dict)
    appliances: tuple[ApplianceSpec, ...] = ()
    background_kwh: float = 0.05
    jitter: float = 0.0
    storage: StorageConfig = StorageConfig()
    pv: PvConfig = PvConfig()
    cost_model: CostConfig = CostConfig()
    market: MarketConfig = MarketConfig()
    ga: GaConfig = GaConfig()
    csm: CsmConfig = CsmConfig()
    cnone: CnoneConfig = CnoneConfig()
    baseline: BaselineConfig = BaselineConfig()
    jobs: int | None = None

    def counts(self, case: int | None = None) -> CustomerCounts:
        case = self.case if case is None else case
        if case not in self.cases:
            raise ConfigError(f"case {case} is not in the case table {sorted(self.cases)}")
        return self.cases[case].scaled(self.customers)

    def household(self, storage: bool = True) -> HouseholdSpec:
        pv = self.pv.curve()
        return HouseholdSpec(appliances=self.appliances, background=(self.background_kwh,) * HORIZON,
                             storage=self.storage.spec() if storage else None,
                             pv=None if pv is None else tuple(pv))

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)


def _build(cls, raw, key: str):
    """Dataclass from a YAML mapping; unknown keys and bad values become ConfigError."""
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"{key}: expected a mapping, got {type(raw).__name__}")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"{key}: unknown key(s) {', '.join(map(str, unknown))}")
    try:
        return cls(**raw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{key}: {e}") from e


def _parse_appliance(raw: dict, index: int) -> ApplianceSpec:
    key = f"household.appliances[{index}]"
    allowed = {"name", "kind", "start_hour", "end_hour", "energy", "rated", "run_hours",
               "u_lower", "u_upper", "u_min"}
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ConfigError(f"{key}: unknown key(s) {', '.join(unknown)}")
    try:
        start, length = clock_window(int(raw["start_hour"]), int(raw["end_hour"]))
        return ApplianceSpec(
            name=str(raw["name"]),
            kind=ApplianceKind(raw["kind"]),
            start=start,
            length=length,
            rated=float(raw.get("rated", 0.0)),
            energy=float(raw.get("energy", 0.0)),
            run_length=int(raw.get("run_hours", 0)),
            u_lower=float(raw.get("u_lower", 0.0)),
            u_upper=float(raw.get("u_upper", 0.0)),
            u_min=float(raw.get("u_min", 0.0)),
        )
    except KeyError as e:
        raise ConfigError(f"{key}: missing {e}") from e
    except ValueError as e:
        raise ConfigError(f"{key}: {e}") from e


def default_config_path() -> str:
    return os.environ.get(CONFIG_ENV) or DEFAULT_CONFIG


def load_config(path: str | None = None) -> ScenarioConfig:
    path = path or default_config_path()
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = yaml.safe_load(f) or {}
    except OSError as e:
        raise ConfigError(f"cannot read scenario config {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"{path} is not valid YAML: {e}") from e
    return parse_config(raw, base_dir=os.path.dirname(os.path.abspath(path)))


def parse_config(raw: dict, base_dir: str = ".") -> ScenarioConfig:
    known = {f.name for f in dataclasses.fields(ScenarioConfig)} - {"appliances", "background_kwh"} | {"household"}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown top-level key(s) {', '.join(map(str, unknown))}")

    household = raw.get("household") or {}
    extra = sorted(set(household) - {"background_kwh", "appliances"})
    if extra:
        raise ConfigError(f"household: unknown key(s) {', '.join(extra)}")
    appliances = tuple(_parse_appliance(a, i) for i, a in enumerate(household.get("appliances") or []))
    if not appliances:
        raise ConfigError("household.appliances must list at least one appliance")

    cases = {int(k): _build(CustomerCounts, v, f"cases.{k}") for k, v in (raw.get("cases") or {}).items()}
    if not cases:
        raise ConfigError("cases: the case table is empty")
    if any(c.total == 0 for c in cases.values()):
        raise ConfigError("cases: every case needs at least one customer")

    cnone = _build(CnoneConfig, raw.get("cnone"), "cnone")
    if cnone.history_csv and not os.path.isabs(cnone.history_csv):
        cnone = dataclasses.replace(cnone, history_csv=os.path.join(base_dir, cnone.history_csv))
    if cnone.history_csv and not os.path.exists(cnone.history_csv):
        raise ConfigError(f"cnone.history_csv: {cnone.history_csv} does not exist")

    csm = _build(CsmConfig, raw.get("csm"), "csm")
    if csm.history_days < MIN_CSM_DAYS:
        raise ConfigError(f"csm.history_days must be at least {MIN_CSM_DAYS}")

    seed = int(raw.get("seed", 7))
    customers = int(raw.get("customers", 100))
    if customers <= 0:
        raise ConfigError("customers must be positive")
    config = ScenarioConfig(
        seed=seed,
        customers=customers,
        case=int(raw.get("case", min(cases))),
        cases=cases,
        appliances=appliances,
        background_kwh=float(household.get("background_kwh", 0.05)),
        jitter=float(raw.get("jitter", 0.0)),
        storage=_build(StorageConfig, raw.get("storage"), "storage"),
        pv=_build(PvConfig, raw.get("pv"), "pv"),
        cost_model=_build(CostConfig, raw.get("cost_model"), "cost_model"),
        market=_build(MarketConfig, raw.get("market"), "market"),
        ga=_build(GaConfig, raw.get("ga"), "ga"),
        csm=csm,
        cnone=cnone,
        baseline=_build(BaselineConfig, raw.get("baseline"), "baseline"),
        jobs=raw.get("jobs"),
    )
    if not 0.0 <= config.jitter < 1.0:
        raise ConfigError("jitter must lie in [0, 1)")
    if config.case not in cases:
        raise ConfigError(f"case {config.case} is not in the case table")
    return config


# =====================================================================
# ====== Histories ====================================================
# =====================================================================

def _random_prices(rng, days: int, p_min: float, p_max: float, horizon: int = HORIZON) -> np.ndarray:
    return np.round(rng.uniform(p_min, p_max, size=(days, horizon)), 2)


def generate_csm_history(household: HouseholdSpec, days: int, seed, w_max: float = 0.5,
                         noise: float = 0.1, p_min: float = 6.0, p_max: float = 14.0,
                         progress: bool = False) -> dict[str, pd.DataFrame]:
    """Metered per-appliance history of a customer who trades bill against waiting time.

    Shiftable use is the bill optimum with a per-slot waiting penalty of w per
    slot after the window opens, w drawn daily from [0, w_max]. Curtailable use
    is the bill optimum with multiplicative noise, clipped to the comfort bounds.
    """
    if days < MIN_CSM_DAYS:
        raise InputError(f"C-SM history needs at least {MIN_CSM_DAYS} days, got {days}")
    rng = np.random.default_rng(seed)
    H = household.horizon
    prices = _random_prices(rng, days, p_min, p_max, H)
    usage = {a.name: np.zeros((days, H)) for a in household.appliances}
    for d in tqdm(range(days), desc="C-SM history", disable=not progress):
        w = rng.uniform(0.0, w_max) if w_max > 0 else 0.0
        for a in household.appliances:
            if a.kind.shiftable and w > 0:
                kwh = schedule_with_waiting_cost(prices[d], a, w).kwh
            else:
                kwh = schedule_appliance(prices[d], a).kwh
            if not a.kind.shiftable and noise > 0:
                slots = a.window(H)
                jittered = kwh[slots] * (1.0 + rng.normal(0.0, noise, size=slots.size))
                kwh = kwh.copy()
                kwh[slots] = np.clip(jittered, a.u_lower, a.u_upper)
            usage[a.name][d] = kwh

    frames = {}
    day_idx, slot_idx = np.divmod(np.arange(days * H), H)
    for name, kwh in usage.items():
        frames[name] = pd.DataFrame({
            "day": day_idx,
            "slot": slot_idx,
            "price_cents": prices.ravel(),
            "kwh": kwh.ravel(),
        })
    logger.info("generated %d days of C-SM history for %d appliances", days, len(frames))
    return frames


def _numeric(frame: pd.DataFrame, columns) -> pd.DataFrame:
    out = frame.copy()
    for col in columns:
        values = pd.to_numeric(out[col], errors="coerce")
        bad = np.flatnonzero(values.isna().to_numpy())
        if bad.size:
            raise ParseError(f"column '{col}' value {frame[col].iloc[bad[0]]!r} is not numeric", row=int(bad[0]) + 1)
        out[col] = values
    return out


def _days_from_long(frame: pd.DataFrame, key: str, value_cols, horizon: int):
    """Pivot a long (key, slot, values...) table into one (D, H) array per value column."""
    missing = [c for c in (key, "slot", *value_cols) if c not in frame.columns]
    if missing:
        raise ParseError(f"missing column(s) {', '.join(missing)}")
    frame = _numeric(frame.reset_index(drop=True), ["slot", *value_cols])
    slots = frame["slot"].to_numpy()
    bad = np.flatnonzero((slots != np.round(slots)) | (slots < 0) | (slots >= horizon))
    if bad.size:
        raise ParseError(f"slot {slots[bad[0]]} outside 0..{horizon - 1}", row=int(bad[0]) + 1)
    frame["slot"] = slots.astype(int)

    keys = list(dict.fromkeys(frame[key]))
    arrays = {c: np.zeros((len(keys), horizon)) for c in value_cols}
    for d, (k, group) in enumerate(frame.groupby(key, sort=False)):
        if sorted(group["slot"]) != list(range(horizon)):
            have = sorted(set(group["slot"]))
            missing_slots = sorted(set(range(horizon)) - set(have))
            detail = f"missing slots {missing_slots}" if missing_slots else "duplicate slots"
            raise ParseError(f"{key} {k}: {detail}", row=int(group.index[0]) + 1)
        ordered = group.sort_values("slot")
        for c in value_cols:
            arrays[c][d] = ordered[c].to_numpy(dtype=float)
    return keys, arrays


def write_csm_history(frames: dict[str, pd.DataFrame], out_dir: str) -> dict[str, str]:
    os.makedirs(out_dir, exist_ok=True)
    paths = {}
    for name, frame in frames.items():
        paths[name] = os.path.join(out_dir, f"csm_{name}.csv")
        frame.to_csv(paths[name], index=False)
        logger.info("[Saved] C-SM history %s -> %s", name, paths[name])
    return paths


def read_csm_history(source, horizon: int = HORIZON) -> tuple[np.ndarray, np.ndarray]:
    """(prices, kwh), both (D, H), from a csv path or frame with day, slot, price_cents, kwh."""
    frame = source if isinstance(source, pd.DataFrame) else _read_csv(source)
    _, arrays = _days_from_long(frame, "day", ["price_cents", "kwh"], horizon)
    return arrays["price_cents"], arrays["kwh"]


def _read_csv(path) -> pd.DataFrame:
    try:
        return pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ParseError(f"cannot read {path}: {e}") from e


def residential_shape(horizon: int = HORIZON) -> np.ndarray:
    """Daily load shape of one household (kWh per slot, 8AM start), summing to 36 kWh."""
    hours = (np.arange(horizon) + 8) % 24
    shape = (1.0
             + 0.6 * np.exp(-0.5 * ((hours - 8) / 1.5) ** 2)
             + 1.4 * np.exp(-0.5 * ((hours - 19) / 2.5) ** 2)
             - 0.4 * np.exp(-0.5 * ((hours - 3) / 2.0) ** 2))
    return DAILY_KWH_PER_HOUSEHOLD * shape / shape.sum()


def cnone_ground_truth(pool_size: int, horizon: int = HORIZON, self_elasticity: float = 0.3,
                       neighbour_share: float = 0.1) -> AggregateDemandModel:
    """Feasible linear pool model: own-hour elasticity plus substitution to adjacent hours."""
    reference = residential_shape(horizon) * pool_size
    B = np.zeros((horizon, horizon))
    for h in range(horizon):
        own = -self_elasticity * reference[h] / REFERENCE_PRICE
        B[h, h] = own
        for l in (h - 1, h + 1):
            if 0 <= l < horizon:
                B[l, h] = neighbour_share * abs(own)
    intercept = reference - B @ np.full(horizon, REFERENCE_PRICE)
    return AggregateDemandModel(intercept, B)


def generate_cnone_history(pool_size: int, days: int, seed, noise: float = 0.02,
                           p_min: float = 6.0, p_max: float = 14.0, horizon: int = HORIZON,
                           start_date: str = "2012-01-01") -> pd.DataFrame:
    """Hourly (date, slot, price_cents, demand_kwh) history of a C-NONE pool."""
    rng = np.random.default_rng(seed)
    truth = cnone_ground_truth(pool_size, horizon)
    hours = (np.arange(horizon) + 8) % 24
    daily = 10.0 + 2.0 * np.sin(2 * np.pi * (hours - 13) / 24)
    prices = np.clip(daily + rng.normal(0.0, 1.5, size=(days, horizon)), p_min, p_max).round(2)
    demand = np.maximum(truth.intercept + prices @ truth.elasticity.T, 0.0)
    if noise > 0:
        demand = np.maximum(demand * (1.0 + rng.normal(0.0, noise, size=demand.shape)), 0.0)
    dates = pd.date_range(start_date, periods=days, freq="D").strftime("%Y-%m-%d")
    return pd.DataFrame({
        "date": np.repeat(dates, horizon),
        "slot": np.tile(np.arange(horizon), days),
        "price_cents": prices.ravel(),
        "demand_kwh": demand.ravel(),
    })


def demand_scale(raw_daily_mean: float, pool_size: int) -> float:
    if raw_daily_mean <= 0:
        raise InputError("raw demand has a non-positive daily mean")
    return pool_size * DAILY_KWH_PER_HOUSEHOLD / raw_daily_mean


def ingest_price_demand_csv(source, pool_size: int, forgetting: float = 1.0,
                            horizon: int = HORIZON) -> DemandHistory:
    """Hourly utility feed to a DemandHistory scaled to `pool_size` households.

    Row numbers in errors count data rows from 1.
    """
    frame = source if isinstance(source, pd.DataFrame) else _read_csv(source)
    if "date" not in frame.columns:
        raise ParseError("missing column(s) date")
    frame = frame.reset_index(drop=True)
    parsed = pd.to_datetime(frame["date"], errors="coerce")
    bad = np.flatnonzero(parsed.isna().to_numpy())
    if bad.size:
        raise ParseError(f"date {frame['date'].iloc[bad[0]]!r} is not a date", row=int(bad[0]) + 1)
    frame = frame.assign(date=parsed)

    keys, arrays = _days_from_long(frame, "date", ["price_cents", "demand_kwh"], horizon)
    order = np.argsort(np.array(keys, dtype="datetime64[ns]"), kind="stable")
    prices = arrays["price_cents"][order]
    demand = arrays["demand_kwh"][order]
    if np.any(demand < 0):
        raise ParseError("demand_kwh must be non-negative")

    factor = demand_scale(float(demand.sum(axis=1).mean()), pool_size)
    logger.info("ingested %d days of price/demand history, scale factor %.6g", len(keys), factor)
    return DemandHistory(prices, demand * factor, forgetting)


# =====================================================================
# ====== Case runs ====================================================
# =====================================================================

@dataclass
class CaseResult:
    case: int
    counts: CustomerCounts
    revenue: float
    cost: float
    profit: float
    violation: float
    seconds: float
    prices: np.ndarray
    demand: dict[str, np.ndarray]
    trace: list[dict]
    baseline: BaselineResult | None = None

    def as_dict(self) -> dict:
        """Everything but wall-clock time, so seeded runs serialise identically."""
        out = {
            "case": self.case,
            "customers": dataclasses.asdict(self.counts),
            "revenue": self.revenue,
            "cost": self.cost,
            "profit": self.profit,
            "violation": self.violation,
            "feasible": self.violation == 0.0,
            "prices": [float(p) for p in self.prices],
        }
        if self.baseline is not None:
            out["baseline"] = {**self.baseline.evaluation.as_dict(), "rounds": self.baseline.rounds,
                               "restart": self.baseline.restart,
                               "prices": [float(p) for p in self.baseline.prices]}
        return out


@contextlib.contextmanager
def _stage(name: str):
    """Failures inside the block are re-raised as StageError carrying the stage name."""
    logger.debug("stage %s", name)
    try:
        yield
    except StageError:
        raise
    except Exception as e:
        raise StageError(name, e) from e


def hems_households(config: ScenarioConfig, count: int, seed) -> list[HouseholdSpec]:
    template = config.household()
    if config.jitter <= 0 or count == 0:
        return [template] * count
    rng = np.random.default_rng(seed)
    households = []
    for _ in range(count):
        factor = round(float(rng.uniform(1 - config.jitter, 1 + config.jitter)), 2)
        households.append(dataclasses.replace(template, appliances=tuple(a.scaled(factor) for a in template.appliances)))
    return households


def fit_sm_household(config: ScenarioConfig, seed, progress: bool = False) -> SmartMeterHousehold:
    template = config.household(storage=False)
    frames = generate_csm_history(template, config.csm.history_days, seed, config.csm.w_max, config.csm.noise,
                                  config.market.p_min, config.market.p_max, progress=progress)
    learners = []
    for a in template.appliances:
        prices, kwh = read_csm_history(frames[a.name], template.horizon)
        if a.kind.shiftable:
            learners.append(ApplianceLearner.shiftable(a, template.horizon, prices, kwh, config.csm.pseudo_days))
        else:
            learners.append(ApplianceLearner.curtailable(a, template.horizon, prices, kwh, config.csm.ridge))
    return SmartMeterHousehold(tuple(learners), template.background, template.pv)


def cnone_history(config: ScenarioConfig, pool_size: int, seed) -> DemandHistory:
    if config.cnone.history_csv:
        return ingest_price_demand_csv(config.cnone.history_csv, pool_size, config.cnone.forgetting)
    frame = generate_cnone_history(pool_size, config.cnone.history_days, seed,
                                   p_min=config.market.p_min, p_max=config.market.p_max)
    return ingest_price_demand_csv(frame, pool_size, config.cnone.forgetting)


def build_groups(config: ScenarioConfig, counts: CustomerCounts, seed, progress: bool = False) -> tuple:
    s_jitter, s_csm, s_cnone = np.random.SeedSequence(seed).spawn(3)
    groups = []
    with _stage("hems"):
        if counts.hems:
            groups.append(get_group("hems", households=hems_households(config, counts.hems, s_jitter)))
    with _stage("csm"):
        if counts.sm:
            household = fit_sm_household(config, s_csm, progress)
            groups.append(get_group("sm", households=[household] * counts.sm))
            logger.info("fitted C-SM models for %d appliances", len(household.learners))
    with _stage("cnone"):
        if counts.none:
            history = cnone_history(config, counts.none, s_cnone)
            fit_options = {"tol": config.cnone.tol, "max_iter": config.cnone.max_iter}
            model = fit_aggregate_demand(history, **fit_options)
            groups.append(get_group("none", count=counts.none, model=model, history=history,
                                    pv=config.pv.curve(), fit_options=fit_options))
            logger.info("fitted C-NONE model on %d days", history.days)
    return tuple(groups)


def build_market(config: ScenarioConfig, groups: tuple, customers: int) -> Market:
    m = config.market
    cost_model = CostModel.uniform(config.cost_model.a, config.cost_model.b, config.cost_model.c, HORIZON)
    per_customer = m.pv_revenue_cap_per_customer if config.pv.enabled else m.revenue_cap_per_customer
    revenue_cap = per_customer * customers
    if m.capacity_per_customer is not None:
        capacity = m.capacity_per_customer * customers
    else:
        floor = np.full(HORIZON, m.p_min)
        peak = max(float(sum(g.respond(floor).kwh for g in groups).max()), 1e-9)
        capacity = m.capacity_headroom * peak
    limits = MarketLimits.uniform(capacity, revenue_cap, m.p_min, m.p_max, HORIZON)
    logger.info("market: capacity %.2f kWh/slot, revenue cap %.0f cents", capacity, revenue_cap)
    return Market(groups, cost_model, limits)


def _group_demand(market: Market, prices) -> dict[str, np.ndarray]:
    demand = {g.name: g.respond(prices).kwh for g in market.groups}
    demand["total"] = sum(demand.values()) if demand else np.zeros(market.horizon)
    return demand


def _solve_case(config, case, counts, market, seed, run_baseline, progress, workers,
                seeds=None) -> CaseResult:
    started = time.perf_counter()
    with _stage("ga"):
        ga = get_method("ga").solve(market, dataclasses.replace(config.ga, seed=seed),
                                    progress=progress, workers=workers or config.jobs, seeds=seeds)
    baseline = None
    if run_baseline:
        with _stage("baseline"):
            baseline = get_method("baseline").solve(market, dataclasses.replace(config.baseline, seed=seed),
                                                    progress=progress)
    e = ga.evaluation
    return CaseResult(case=case, counts=counts, revenue=e.revenue, cost=e.cost, profit=e.profit,
                      violation=e.violation, seconds=time.perf_counter() - started, prices=ga.prices,
                      demand=_group_demand(market, ga.prices), trace=ga.trace, baseline=baseline)


def run_case(config: ScenarioConfig, case: int | None = None, seed: int | None = None,
             run_baseline: bool = False, progress: bool = True, workers: int | None = None) -> CaseResult:
    case = config.case if case is None else case
    seed = config.seed if seed is None else seed
    with _stage("config"):
        counts = config.counts(case)
    logger.info("case %d: %d C-HEMS, %d C-SM, %d C-NONE, seed %d", case, counts.hems, counts.sm, counts.none, seed)
    groups = build_groups(config, counts, seed, progress)
    with _stage("market"):
        market = build_market(config, groups, counts.total)
    return _solve_case(config, case, counts, market, seed, run_baseline, progress, workers)


@dataclass
class DayRun:
    results: list[CaseResult]
    market: Market


def run_days(config: ScenarioConfig, case: int | None, days: int, seed: int | None = None,
             progress: bool = True, workers: int | None = None) -> DayRun:
    """Consecutive days: price, observe actual use, update the learned models, repeat.

    Each C-SM shiftable appliance gets exactly one rank update per day; the
    C-NONE history grows by one day and is refitted.
    """
    case = config.case if case is None else case
    seed = config.seed if seed is None else seed
    counts = config.counts(case)
    groups = build_groups(config, counts, seed, progress)
    with _stage("market"):
        market = build_market(config, groups, counts.total)
    behaviour = np.random.default_rng(np.random.SeedSequence(seed).spawn(4)[3])
    template = config.household(storage=False)

    results = []
    for day in range(days):
        result = _solve_case(config, case, counts, market, seed + day, False, progress, workers)
        results.append(result)
        prices = result.prices
        w = behaviour.uniform(0.0, config.csm.w_max) if config.csm.w_max > 0 else 0.0
        with _stage("observe"):
            updated = []
            for g in market.groups:
                if g.name == "sm":
                    usage = {a.name: schedule_with_waiting_cost(prices, a, w).kwh
                             for a in template.appliances if a.kind.shiftable}
                    updated.append(g.observe(prices, usage))
                elif g.name == "none":
                    actual = g.respond(prices).kwh
                    if g.pv is not None:
                        actual = actual + g.count * g.pv
                    updated.append(g.observe(prices, np.maximum(actual, 0.0)))
                else:
                    updated.append(g)
        market = Market(tuple(updated), market.cost_model, market.limits)
        logger.info("day %d: profit %.2f cents", day + 1, result.profit)
    return DayRun(results, market)


# =====================================================================
# ====== Storage study ================================================
# =====================================================================

STORAGE_SCENARIOS = (
    ("no_storage", False, False),
    ("storage_no_sell_back", True, False),
    ("storage_sell_back", True, True),
)


def storage_study(config: ScenarioConfig, seed: int | None = None, progress: bool = True,
                  workers: int | None = None) -> pd.DataFrame:
    """All customers C-HEMS with PV; compares no storage and storage with/without sell-back.

    Each GA run starts from the capped uniform price, where batteries sit idle,
    and from the best prices of the scenarios already solved.
    """
    seed = config.seed if seed is None else seed
    base = config.replace(pv=dataclasses.replace(config.pv, enabled=True))
    counts = CustomerCounts(hems=config.customers)
    rows, solved = [], []
    for label, enabled, sell_back in STORAGE_SCENARIOS:
        scenario = base.replace(storage=dataclasses.replace(base.storage, enabled=enabled, sell_back=sell_back))
        groups = build_groups(scenario, counts, seed, progress)
        with _stage("market"):
            market = build_market(scenario, groups, counts.total)
        limits, bits = market.limits, scenario.ga.bits
        flat = uniform_scaling(market.evaluate(limits.p_min).demand, limits)
        seeds = np.array([encode(flat, limits, bits)] + [encode(p, limits, bits) for p in solved])
        result = _solve_case(scenario, 0, counts, market, seed, False, progress, workers, seeds=seeds)
        solved.append(result.prices)
        with_storage = household_response(result.prices, scenario.household())
        without_storage = household_response(result.prices, scenario.household(storage=False))
        rows.append({
            "scenario": label,
            "revenue": result.revenue,
            "cost": result.cost,
            "profit": result.profit,
            "violation": result.violation,
            "household_bill": with_storage.bill,
            "household_bill_no_storage": without_storage.bill,
        })
        logger.info("storage study %s: profit %.2f cents", label, result.profit)
    return pd.DataFrame(rows)

