import numpy as np

from dynprice.cnone import AggregateDemandModel, DemandHistory, fit_aggregate_demand, predict_aggregate
from dynprice.groups.base import CustomerGroup
from dynprice.hems import ConsumptionProfile, as_prices


class NoneGroup(CustomerGroup):
    """C-NONE: the pool is seen only through its aggregate demand model.

    PV (per household) is netted off the pool prediction.
    """

    name = "none"

    def __init__(self, count: int, model: AggregateDemandModel, history: DemandHistory | None = None,
                 pv=None, fit_options: dict | None = None):
        super().__init__(count)
        self.model = model
        self.history = history
        self.pv = None if pv is None else np.asarray(pv, dtype=float)
        self.fit_options = fit_options or {}

    def respond(self, prices) -> ConsumptionProfile:
        p = as_prices(prices, self.model.horizon)
        if self.count == 0:
            return self.empty(p.size)
        kwh = predict_aggregate(self.model, p)
        if self.pv is not None:
            kwh = kwh - self.count * self.pv
        return ConsumptionProfile.from_kwh(p, kwh)

    def observe(self, prices, usage) -> "NoneGroup":
        """Append the day's pool demand to the history and refit."""
        if self.history is None:
            return self
        history = self.history.append(np.atleast_2d(prices), np.atleast_2d(usage))
        model = fit_aggregate_demand(history, **self.fit_options)
        return NoneGroup(self.count, model, history, self.pv, self.fit_options)
