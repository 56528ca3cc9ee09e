# -*- coding: utf-8 -*-
"""
Home energy management: exact bill-minimising appliance schedules.

Slots are indexed over a day that starts at 8AM (slot 0 = 8AM-9AM). Windows
are a start slot plus a length and may wrap past the end of the horizon.

Prices are compared as integer hundredths of a cent so that ties are exact;
every tie goes to the earliest slot in window order.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from dynprice.errors import InfeasibleError, InputError, SolverError
from dynprice.numerics import LinearProgram, SolveStatus, solve_lp

logger = logging.getLogger(__name__)

HORIZON = 24
DAY_START = 8
PRICE_UNITS = 100  # integer units per cent
ENERGY_EPS = 1e-9
STORAGE_THROUGHPUT_PENALTY = 1e-6  # cents/kWh, makes idle the preferred optimum on flat prices


class ApplianceKind(str, enum.Enum):
    INTERRUPTIBLE = "interruptible"
    NON_INTERRUPTIBLE = "non_interruptible"
    CURTAILABLE = "curtailable"

    @property
    def shiftable(self) -> bool:
        return self is not ApplianceKind.CURTAILABLE


def as_prices(prices, horizon: int | None = None) -> np.ndarray:
    p = np.asarray(prices, dtype=float).ravel()
    if horizon is not None and p.size != horizon:
        raise InputError(f"price vector has {p.size} slots, expected {horizon}")
    if p.size == 0 or not np.all(np.isfinite(p)):
        raise InputError("price vector must be non-empty and finite")
    return p


def price_units(prices) -> np.ndarray:
    return np.rint(np.asarray(prices, dtype=float) * PRICE_UNITS).astype(np.int64)


def clock_window(start_hour: int, end_hour: int, day_start: int = DAY_START,
                 horizon: int = HORIZON) -> tuple[int, int]:
    """(start slot, length) of the clock-hour window [start_hour, end_hour).

    >>> clock_window(19, 7)   # 7PM-7AM
    (11, 12)
    """
    start = (start_hour - day_start) % horizon
    length = (end_hour - start_hour) % horizon or horizon
    return start, length


@dataclass(frozen=True)
class ApplianceSpec:
    name: str
    kind: ApplianceKind
    start: int
    length: int
    rated: float = 0.0
    energy: float = 0.0
    run_length: int = 0
    u_lower: float = 0.0
    u_upper: float = 0.0
    u_min: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ApplianceKind(self.kind))
        if self.start < 0 or self.length < 1:
            raise InputError(f"{self.name}: window start {self.start}, length {self.length} is invalid")
        if self.kind.shiftable:
            if self.energy <= 0 or self.rated <= 0:
                raise InputError(f"{self.name}: shiftable appliances need energy > 0 and rated > 0")
            if self.kind is ApplianceKind.NON_INTERRUPTIBLE and self.run_length <= 0:
                object.__setattr__(self, "run_length", self.slots_needed)
        else:
            if self.u_lower < 0 or self.u_upper < self.u_lower or self.u_min < 0:
                raise InputError(f"{self.name}: need 0 <= u_lower <= u_upper and u_min >= 0")

    @property
    def slots_needed(self) -> int:
        """Slots a shiftable appliance occupies (the last one may be partial)."""
        if self.kind is ApplianceKind.NON_INTERRUPTIBLE and self.run_length > 0:
            return self.run_length
        return math.ceil(self.energy / self.rated - ENERGY_EPS)

    def window(self, horizon: int = HORIZON) -> np.ndarray:
        if self.start >= horizon or self.length > horizon:
            raise InputError(f"{self.name}: window does not fit a {horizon}-slot horizon")
        return (self.start + np.arange(self.length)) % horizon

    def scaled(self, factor: float) -> "ApplianceSpec":
        """Copy with the energy requirement (E or U_min) multiplied by factor."""
        if self.kind.shiftable:
            energy, run = self.energy * factor, self.run_length
            if self.kind is ApplianceKind.NON_INTERRUPTIBLE:
                # contiguous blocks keep whole slots, so E is kept at L * rated
                run = max(1, round(energy / self.rated))
                energy = run * self.rated
            return ApplianceSpec(self.name, self.kind, self.start, self.length, self.rated,
                                 energy, run, self.u_lower, self.u_upper, self.u_min)
        u_min = min(self.u_min * factor, self.u_upper * self.length)
        return ApplianceSpec(self.name, self.kind, self.start, self.length, self.rated,
                             self.energy, self.run_length, self.u_lower, self.u_upper, u_min)


@dataclass(frozen=True)
class StorageSpec:
    capacity: float
    rate: float
    initial: float
    final: float
    sell_back: bool = False
    efficiency: float = 1.0

    def __post_init__(self):
        if self.rate <= 0 or self.capacity <= 0:
            raise InputError("storage capacity and rate must be positive")
        if not (0 <= self.initial <= self.capacity and 0 <= self.final <= self.capacity):
            raise InputError("storage initial and final SoC must lie in [0, capacity]")
        if self.efficiency != 1.0:
            raise InputError("only lossless storage (efficiency 1.0) is modelled")


@dataclass(frozen=True)
class HouseholdSpec:
    appliances: tuple[ApplianceSpec, ...]
    background: tuple[float, ...]
    storage: StorageSpec | None = None
    pv: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "appliances", tuple(self.appliances))
        object.__setattr__(self, "background", tuple(float(v) for v in self.background))
        if self.pv is not None:
            object.__setattr__(self, "pv", tuple(float(v) for v in self.pv))
            if len(self.pv) != len(self.background):
                raise InputError("PV forecast and background load differ in length")
            if min(self.pv) < 0:
                raise InputError("PV forecast must be non-negative")
        if min(self.background, default=0.0) < 0:
            raise InputError("background load must be non-negative")

    @property
    def horizon(self) -> int:
        return len(self.background)


@dataclass(frozen=True)
class ConsumptionProfile:
    kwh: np.ndarray
    bill: float

    @classmethod
    def from_kwh(cls, prices: np.ndarray, kwh: np.ndarray) -> "ConsumptionProfile":
        return cls(kwh=kwh, bill=float(prices @ kwh))

    @property
    def energy(self) -> float:
        return float(self.kwh.sum())


@dataclass(frozen=True)
class StorageSchedule:
    charge: np.ndarray
    discharge: np.ndarray
    soc: np.ndarray
    objective: float

    @property
    def flow(self) -> np.ndarray:
        return self.charge - self.discharge


@dataclass(frozen=True)
class HouseholdResponse(ConsumptionProfile):
    appliances: dict[str, ConsumptionProfile] = field(default_factory=dict)
    storage: StorageSchedule | None = None


# ====== Selection helpers over window positions ======

def _cheapest_positions(keys: np.ndarray, count: int) -> np.ndarray:
    return np.argsort(keys, kind="stable")[:count]


def _cheapest_block(keys: np.ndarray, run: int) -> int:
    sums = np.convolve(keys, np.ones(run, dtype=keys.dtype), mode="valid")
    return int(np.argmin(sums))


def _fill_interruptible(spec: ApplianceSpec, keys: np.ndarray, slots: np.ndarray, horizon: int) -> np.ndarray:
    full = int(math.floor(spec.energy / spec.rated + ENERGY_EPS))
    remainder = spec.energy - full * spec.rated
    if remainder < ENERGY_EPS:
        remainder = 0.0
    needed = full + (1 if remainder > 0 else 0)
    if needed > slots.size:
        raise InfeasibleError(f"{spec.name}: needs {needed} slots, window has {slots.size}")
    order = _cheapest_positions(keys, needed)
    kwh = np.zeros(horizon)
    kwh[slots[order[:full]]] = spec.rated
    if remainder > 0:
        kwh[slots[order[full]]] = remainder
    return kwh


def _fill_block(spec: ApplianceSpec, keys: np.ndarray, slots: np.ndarray, horizon: int) -> np.ndarray:
    run = spec.run_length
    if run > slots.size:
        raise InfeasibleError(f"{spec.name}: run length {run} exceeds window length {slots.size}")
    start = _cheapest_block(keys, run)
    kwh = np.zeros(horizon)
    kwh[slots[start:start + run]] = spec.rated
    return kwh


def _require(spec: ApplianceSpec, kind: ApplianceKind) -> None:
    if spec.kind is not kind:
        raise InputError(f"{spec.name} is {spec.kind.value}, expected {kind.value}")


# ====== Schedulers ======

def schedule_interruptible(prices, spec: ApplianceSpec) -> ConsumptionProfile:
    _require(spec, ApplianceKind.INTERRUPTIBLE)
    p = as_prices(prices)
    slots = spec.window(p.size)
    kwh = _fill_interruptible(spec, price_units(p)[slots], slots, p.size)
    return ConsumptionProfile.from_kwh(p, kwh)


def schedule_non_interruptible(prices, spec: ApplianceSpec) -> ConsumptionProfile:
    _require(spec, ApplianceKind.NON_INTERRUPTIBLE)
    p = as_prices(prices)
    slots = spec.window(p.size)
    kwh = _fill_block(spec, price_units(p)[slots], slots, p.size)
    return ConsumptionProfile.from_kwh(p, kwh)


def schedule_curtailable(prices, spec: ApplianceSpec) -> ConsumptionProfile:
    """u_lower everywhere, then the deficit to U_min at the cheapest slots."""
    _require(spec, ApplianceKind.CURTAILABLE)
    p = as_prices(prices)
    slots = spec.window(p.size)
    if spec.u_upper * slots.size < spec.u_min - ENERGY_EPS:
        raise InfeasibleError(f"{spec.name}: U_min {spec.u_min} exceeds window maximum "
                              f"{spec.u_upper * slots.size}")
    kwh = np.zeros(p.size)
    kwh[slots] = spec.u_lower
    deficit = spec.u_min - spec.u_lower * slots.size
    headroom = spec.u_upper - spec.u_lower
    for pos in np.argsort(price_units(p)[slots], kind="stable"):
        if deficit <= ENERGY_EPS:
            break
        step = min(headroom, deficit)
        kwh[slots[pos]] += step
        deficit -= step
    return ConsumptionProfile.from_kwh(p, kwh)


def schedule_appliance(prices, spec: ApplianceSpec) -> ConsumptionProfile:
    if spec.kind is ApplianceKind.INTERRUPTIBLE:
        return schedule_interruptible(prices, spec)
    if spec.kind is ApplianceKind.NON_INTERRUPTIBLE:
        return schedule_non_interruptible(prices, spec)
    return schedule_curtailable(prices, spec)


def schedule_with_waiting_cost(prices, spec: ApplianceSpec, weight: float,
                               preferred_start: int = 0) -> ConsumptionProfile:
    """Shiftable schedule minimising bill plus weight * |position - preferred_start| per used slot.

    Used only to synthesise metered histories of customers who trade bill for convenience.
    """
    if not spec.kind.shiftable:
        raise InputError(f"{spec.name}: waiting cost applies to shiftable appliances only")
    if weight < 0:
        raise InputError("waiting-cost weight must be non-negative")
    p = as_prices(prices)
    slots = spec.window(p.size)
    keys = p[slots] + weight * np.abs(np.arange(slots.size) - preferred_start)
    if spec.kind is ApplianceKind.INTERRUPTIBLE:
        kwh = _fill_interruptible(spec, keys, slots, p.size)
    else:
        kwh = _fill_block(spec, keys, slots, p.size)
    return ConsumptionProfile.from_kwh(p, kwh)


def schedule_storage(prices, spec: StorageSpec, appliance_load) -> StorageSchedule:
    """Arbitrage LP over charge c and discharge d (both in [0, rate]).

    Without sell-back, d_h <= max(load_h, 0) so the battery never exports.
    """
    p = as_prices(prices)
    H = p.size
    load = np.asarray(appliance_load, dtype=float).ravel()
    if load.size != H:
        raise InputError(f"load has {load.size} slots, expected {H}")
    if abs(spec.final - spec.initial) > H * spec.rate + ENERGY_EPS:
        raise InfeasibleError(f"final SoC {spec.final} unreachable from {spec.initial} "
                              f"at rate {spec.rate} over {H} slots")

    cumulative = np.tril(np.ones((H, H)))
    A = np.hstack([cumulative, -cumulative])
    row_lower = np.full(H, -spec.initial)
    row_upper = np.full(H, spec.capacity - spec.initial)
    row_lower[-1] = row_upper[-1] = spec.final - spec.initial

    d_upper = np.full(H, spec.rate)
    if not spec.sell_back:
        d_upper = np.minimum(d_upper, np.maximum(load, 0.0))
    lp = LinearProgram(
        c=np.concatenate([p + STORAGE_THROUGHPUT_PENALTY, -p + STORAGE_THROUGHPUT_PENALTY]),
        A=A,
        row_lower=row_lower,
        row_upper=row_upper,
        lower=np.zeros(2 * H),
        upper=np.concatenate([np.full(H, spec.rate), d_upper]),
    )
    report = solve_lp(lp)
    if report.status is SolveStatus.INFEASIBLE:
        raise InfeasibleError("storage schedule infeasible: final SoC unreachable under the discharge limits")
    if not report.optimal:
        raise SolverError(f"storage LP ended with status {report.status.value}")

    x = np.clip(report.x, 0.0, None)
    charge, discharge = x[:H], x[H:]
    soc = spec.initial + np.cumsum(charge - discharge)
    return StorageSchedule(charge=charge, discharge=discharge, soc=soc,
                           objective=float(p @ (charge - discharge)))


def household_response(prices, spec: HouseholdSpec) -> HouseholdResponse:
    """Net grid consumption of one C-HEMS household.

    Appliances are scheduled first on price alone; the battery is then
    scheduled against the resulting load net of PV.
    """
    p = as_prices(prices, spec.horizon)
    per_appliance = {}
    total = np.array(spec.background, dtype=float)
    for appliance in spec.appliances:
        profile = schedule_appliance(p, appliance)
        per_appliance[appliance.name] = profile
        total = total + profile.kwh
    if spec.pv is not None:
        total = total - np.asarray(spec.pv)

    storage = None
    if spec.storage is not None:
        storage = schedule_storage(p, spec.storage, total)
        total = total + storage.flow
    return HouseholdResponse(kwh=total, bill=float(p @ total), appliances=per_appliance, storage=storage)


# ====== Bundled household ======

def standard_household(background: float = 0.05, storage: StorageSpec | None = None,
                    pv=None, horizon: int = HORIZON) -> HouseholdSpec:
    """Dishwasher, PHEV, washing machine, clothes dryer and air-conditioner."""
    appliances = (
        ApplianceSpec("dishwasher", ApplianceKind.INTERRUPTIBLE, *clock_window(20, 7), rated=1.0, energy=1.8),
        ApplianceSpec("phev", ApplianceKind.INTERRUPTIBLE, *clock_window(19, 7), rated=2.5, energy=10.0),
        ApplianceSpec("washing_machine", ApplianceKind.NON_INTERRUPTIBLE, *clock_window(8, 21),
                      rated=1.0, energy=2.0, run_length=2),
        ApplianceSpec("clothes_dryer", ApplianceKind.NON_INTERRUPTIBLE, *clock_window(20, 6),
                      rated=1.5, energy=3.0, run_length=2),
        ApplianceSpec("air_conditioner", ApplianceKind.CURTAILABLE, *clock_window(12, 0),
                      u_lower=1.0, u_upper=2.0, u_min=18.0),
    )
    return HouseholdSpec(appliances=appliances, background=(background,) * horizon,
                         storage=storage, pv=None if pv is None else tuple(pv))


def daylight_pv(peak_kwh: float, horizon: int = HORIZON, day_start: int = DAY_START,
                sunrise: int = 8, sunset: int = 18) -> np.ndarray:
    """Half-sine PV curve, zero outside [sunrise, sunset) clock hours."""
    pv = np.zeros(horizon)
    hours = sunset - sunrise
    for k in range(hours):
        slot = (sunrise + k - day_start) % horizon
        pv[slot] = peak_kwh * math.sin(math.pi * (k + 0.5) / hours)
    return pv
