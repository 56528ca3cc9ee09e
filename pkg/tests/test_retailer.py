import numpy as np
import pytest

from dynprice.errors import InputError
from dynprice.groups import get_group
from dynprice.hems import ConsumptionProfile, household_response
from dynprice.retailer import CostModel, Market, MarketLimits, evaluate_prices, violation


def _limits(capacity=100.0, revenue_cap=1000.0, horizon=24):
    return MarketLimits.uniform(capacity, revenue_cap, 6.0, 14.0, horizon)


class TestCostModel:
    def test_quadratic(self):
        model = CostModel.uniform(a=0.01, b=0.0, c=0.0, horizon=1)
        assert model.slot_cost([10.0])[0] == pytest.approx(1.0)

    def test_export_is_free(self):
        model = CostModel.uniform(horizon=2)
        np.testing.assert_allclose(model.slot_cost([-3.0, 0.0]), [0.0, 0.0])

    def test_rejects_non_convex(self):
        with pytest.raises(InputError):
            CostModel.uniform(a=0.0, horizon=2)


class TestEvaluatePrices:
    def test_zero_demand(self):
        cost_model = CostModel.uniform(a=0.005, b=5.0, c=2.0)
        e = evaluate_prices(np.full(24, 10.0), [ConsumptionProfile(np.zeros(24), 0.0)], cost_model, _limits())
        assert e.revenue == 0.0
        assert e.cost == pytest.approx(48.0)
        assert e.profit == pytest.approx(-48.0)
        assert e.violation == 0.0 and e.feasible

    def test_matches_hand_summation(self):
        rng = np.random.default_rng(0)
        prices = np.round(rng.uniform(6, 14, 24), 2)
        groups = [rng.uniform(0, 30, 24) for _ in range(3)]
        bills = [float(prices @ g) * 0.9 for g in groups]
        responses = [ConsumptionProfile(g, b) for g, b in zip(groups, bills)]
        cost_model = CostModel.uniform()
        e = evaluate_prices(prices, responses, cost_model, _limits(capacity=50.0, revenue_cap=5000.0))

        demand = groups[0] + groups[1] + groups[2]
        revenue = sum(bills)
        cost = sum(0.005 * d * d + 5.0 * d for d in demand)
        over = sum(max(d - 50.0, 0.0) / 50.0 for d in demand) + max(revenue - 5000.0, 0.0) / 5000.0
        assert e.revenue == pytest.approx(revenue, abs=1e-9)
        assert e.cost == pytest.approx(cost, abs=1e-9)
        assert e.profit == pytest.approx(revenue - cost, abs=1e-9)
        assert e.violation == pytest.approx(over, abs=1e-9)

    def test_revenue_cap_violation(self):
        demand = np.full(24, 1.0)
        assert violation(demand, 1500.0, _limits()) == pytest.approx(0.5)
        assert violation(demand, 1000.0, _limits()) == 0.0

    def test_capacity_violation(self):
        demand = np.zeros(24)
        demand[3] = 150.0
        assert violation(demand, 0.0, _limits()) == pytest.approx(0.5)

    def test_horizon_mismatch(self):
        with pytest.raises(InputError):
            evaluate_prices(np.full(24, 10.0), [ConsumptionProfile(np.zeros(12), 0.0)],
                            CostModel.uniform(), _limits())
        with pytest.raises(InputError):
            evaluate_prices(np.full(24, 10.0), [], CostModel.uniform(horizon=12), _limits())


class TestMarketLimits:
    def test_rejects_inverted_bounds(self):
        with pytest.raises(InputError):
            MarketLimits.uniform(100.0, 1000.0, p_min=14.0, p_max=6.0)

    def test_rejects_non_positive_cap(self):
        with pytest.raises(InputError):
            MarketLimits.uniform(100.0, 0.0)


class TestMarket:
    def test_hems_group_aggregates_households(self, household, random_prices):
        market = Market((get_group("hems", households=[household] * 3),), CostModel.uniform(),
                        _limits(capacity=1000.0, revenue_cap=10_000.0))
        e = market.evaluate(random_prices)
        single = household_response(random_prices, household)
        np.testing.assert_allclose(e.demand, 3 * single.kwh)
        assert e.revenue == pytest.approx(3 * single.bill)
        assert market.customers == 3

    def test_unknown_group(self):
        with pytest.raises(InputError):
            get_group("solar")
