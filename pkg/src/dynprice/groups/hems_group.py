import logging
from collections import Counter
from typing import Sequence

import numpy as np

from dynprice.groups.base import CustomerGroup
from dynprice.hems import ConsumptionProfile, HouseholdResponse, HouseholdSpec, household_response

logger = logging.getLogger(__name__)


class HemsGroup(CustomerGroup):
    """C-HEMS: every household schedules its own appliances optimally.

    Identical household specs are scheduled once and weighted by their count.
    """

    name = "hems"

    def __init__(self, households: Sequence[HouseholdSpec]):
        super().__init__(len(households))
        self.households = Counter(households)
        self.horizon = next(iter(self.households)).horizon if households else 0

    def household_responses(self, prices) -> list[tuple[HouseholdResponse, int]]:
        return [(household_response(prices, spec), n) for spec, n in self.households.items()]

    def respond(self, prices) -> ConsumptionProfile:
        if not self.households:
            return self.empty(np.asarray(prices).size)
        kwh = np.zeros(self.horizon)
        bill = 0.0
        for response, n in self.household_responses(prices):
            kwh += n * response.kwh
            bill += n * response.bill
        return ConsumptionProfile(kwh=kwh, bill=bill)
