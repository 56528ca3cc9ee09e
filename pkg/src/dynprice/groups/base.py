import numpy as np

from dynprice.hems import ConsumptionProfile


class CustomerGroup:
    """One customer class as the retailer sees it: prices in, hourly demand and bills out."""

    name = "base"

    def __init__(self, count: int):
        self.count = count

    def __len__(self) -> int:
        return self.count

    def respond(self, prices) -> ConsumptionProfile:
        raise NotImplementedError

    def observe(self, prices, usage) -> "CustomerGroup":
        """Fold one day of metered usage into the group's demand model."""
        return self

    @staticmethod
    def empty(horizon: int) -> ConsumptionProfile:
        return ConsumptionProfile(kwh=np.zeros(horizon), bill=0.0)
