import logging
from collections import Counter
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from dynprice.csm import ApplianceLearner
from dynprice.groups.base import CustomerGroup
from dynprice.hems import ConsumptionProfile, as_prices

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SmartMeterHousehold:
    learners: tuple[ApplianceLearner, ...]
    background: tuple[float, ...]
    pv: tuple[float, ...] | None = None

    @property
    def horizon(self) -> int:
        return len(self.background)

    def respond(self, prices) -> ConsumptionProfile:
        """Expected hourly use and expected bill; PV surplus is sold back at the retail price."""
        p = as_prices(prices, self.horizon)
        kwh = np.array(self.background, dtype=float)
        for learner in self.learners:
            kwh += learner.respond(p).kwh
        if self.pv is not None:
            kwh -= np.asarray(self.pv)
        return ConsumptionProfile.from_kwh(p, kwh)

    def observe(self, prices, usage: Mapping[str, np.ndarray]) -> "SmartMeterHousehold":
        learners = tuple(
            learner.observe(prices, usage[learner.spec.name]) if learner.spec.name in usage else learner
            for learner in self.learners
        )
        return replace(self, learners=learners)


class SmartMeterGroup(CustomerGroup):
    """C-SM: responses predicted from learned appliance-level models."""

    name = "sm"

    def __init__(self, households: Sequence[SmartMeterHousehold]):
        super().__init__(len(households))
        self.households = Counter(households)

    def respond(self, prices) -> ConsumptionProfile:
        if not self.households:
            return self.empty(np.asarray(prices).size)
        kwh, bill = None, 0.0
        for household, n in self.households.items():
            r = household.respond(prices)
            kwh = n * r.kwh if kwh is None else kwh + n * r.kwh
            bill += n * r.bill
        return ConsumptionProfile(kwh=kwh, bill=bill)

    def observe(self, prices, usage: Mapping[str, np.ndarray]) -> "SmartMeterGroup":
        """One rank update per shiftable appliance, from one household's metered day."""
        households = []
        for household, n in self.households.items():
            households.extend([household.observe(prices, usage)] * n)
        return SmartMeterGroup(households)

    @property
    def learners(self) -> tuple[ApplianceLearner, ...]:
        return tuple(l for h in self.households for l in h.learners)
