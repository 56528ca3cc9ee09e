import math

import numpy as np
import pytest

from dynprice.csm import (
    ApplianceLearner,
    CurtailableDemandModel,
    RankProbabilityModel,
    RankedCosts,
    ScheduleSet,
    enumerate_schedules,
    expected_shiftable_demand,
    fit_curtailable_demand,
    fit_rank_probabilities,
    match_schedule,
    predict_curtailable,
    rank_costs,
    update_rank_probabilities,
)
from dynprice.errors import ConfigError, InfeasibleError, InputError, SingularFitError
from dynprice.hems import ApplianceKind, ApplianceSpec, schedule_appliance


def _block(run=2, length=5, rated=1.0, start=0):
    return ApplianceSpec("block", ApplianceKind.NON_INTERRUPTIBLE, start, length,
                         rated=rated, energy=rated * run, run_length=run)


def _interruptible(energy, rated, length, start=0):
    return ApplianceSpec("flex", ApplianceKind.INTERRUPTIBLE, start, length, rated=rated, energy=energy)


def _ranked(units):
    units = np.asarray(units, dtype=np.int64)
    return RankedCosts(order=np.arange(units.size), costs=units / 100.0, units=units)


class TestEnumerateSchedules:
    def test_contiguous_blocks(self):
        schedules = enumerate_schedules(_block(run=2, length=5), horizon=5)
        assert schedules.k == 4
        assert schedules.schedules[0] == (0, 1)

    def test_subsets(self):
        assert enumerate_schedules(_interruptible(2.0, 1.0, 4), horizon=4).k == 6

    def test_phev_window(self):
        assert enumerate_schedules(_interruptible(10.0, 2.5, 12), horizon=24).k == 495

    def test_partial_slot_counts_as_slot(self):
        schedules = enumerate_schedules(_interruptible(1.8, 1.0, 4), horizon=4)
        assert schedules.k == math.comb(4, 2)
        assert schedules.per_slot == pytest.approx(0.9)

    def test_window_too_short(self):
        with pytest.raises(InfeasibleError):
            enumerate_schedules(_block(run=6, length=5), horizon=24)

    def test_schedule_cap(self):
        with pytest.raises(ConfigError):
            enumerate_schedules(_interruptible(12.0, 1.0, 24), horizon=24)

    def test_curtailable_rejected(self):
        ac = ApplianceSpec("ac", ApplianceKind.CURTAILABLE, 0, 12, u_lower=1.0, u_upper=2.0, u_min=18.0)
        with pytest.raises(InputError):
            enumerate_schedules(ac)


class TestRankCosts:
    def test_stable_ties(self):
        schedules = enumerate_schedules(_block(run=2, length=5), horizon=5)
        ranked = rank_costs(np.array([9.0, 6.0, 8.0, 7.0, 5.0]), schedules)
        np.testing.assert_allclose(ranked.costs, [12.0, 14.0, 15.0, 15.0])
        np.testing.assert_array_equal(ranked.order, [3, 1, 0, 2])

    def test_uniform_prices_keep_enumeration_order(self):
        schedules = enumerate_schedules(_interruptible(2.0, 1.0, 4), horizon=4)
        ranked = rank_costs(np.full(4, 10.0), schedules)
        np.testing.assert_array_equal(ranked.order, np.arange(6))

    def test_single_schedule(self):
        schedules = enumerate_schedules(_block(run=3, length=3), horizon=3)
        assert rank_costs(np.array([6.0, 7.0, 8.0]), schedules).costs.tolist() == [21.0]


class TestRankUpdate:
    def test_first_day_with_one_pseudo_day(self):
        model = RankProbabilityModel.uniform(3, pseudo_days=1)
        updated = update_rank_probabilities(model, _ranked([100, 200, 300]), observed_index=1)
        np.testing.assert_allclose(updated.probabilities, [1 / 6, 2 / 3, 1 / 6])
        assert updated.days == 2

    def test_first_day_without_prior_weight(self):
        model = RankProbabilityModel.uniform(3)
        updated = update_rank_probabilities(model, _ranked([100, 200, 300]), observed_index=1)
        np.testing.assert_allclose(updated.probabilities, [0.0, 1.0, 0.0])

    def test_unique_rank(self):
        model = RankProbabilityModel(np.array([0.5, 0.5]), days=3)
        updated = update_rank_probabilities(model, _ranked([100, 200]), observed_index=0)
        np.testing.assert_allclose(updated.probabilities, [0.625, 0.375])

    def test_tie_splits_by_probability(self):
        model = RankProbabilityModel(np.array([0.3, 0.1, 0.6]), days=1)
        updated = update_rank_probabilities(model, _ranked([100, 100, 200]), observed_index=0)
        # delta = [0.75, 0.25, 0]
        np.testing.assert_allclose(updated.probabilities, [0.3 + 0.45 / 2, 0.1 + 0.15 / 2, 0.3])

    def test_tie_with_zero_probability_splits_uniformly(self):
        model = RankProbabilityModel(np.array([0.0, 0.0, 1.0]), days=1)
        updated = update_rank_probabilities(model, _ranked([100, 100, 200]), observed_index=1)
        np.testing.assert_allclose(updated.probabilities, [0.25, 0.25, 0.5])

    def test_stays_a_distribution(self):
        rng = np.random.default_rng(0)
        schedules = enumerate_schedules(_interruptible(2.0, 1.0, 5), horizon=5)
        model = RankProbabilityModel.uniform(schedules.k)
        for _ in range(50):
            prices = np.round(rng.integers(6, 9, size=5).astype(float), 2)
            model = update_rank_probabilities(model, rank_costs(prices, schedules), int(rng.integers(schedules.k)))
            assert model.probabilities.sum() == pytest.approx(1.0)
            assert np.all(model.probabilities >= 0.0)

    @pytest.mark.parametrize("pseudo_days", [0, 3])
    def test_recursion_matches_rank_frequencies(self, pseudo_days):
        rng = np.random.default_rng(21)
        schedules = enumerate_schedules(_interruptible(2.0, 1.0, 5), horizon=5)
        model = RankProbabilityModel.uniform(schedules.k, pseudo_days)
        counts = np.zeros(schedules.k)
        days = 0
        while days < 40:
            ranked = rank_costs(np.round(rng.uniform(6, 14, size=5), 2), schedules)
            if np.unique(ranked.units).size < schedules.k:
                continue
            observed = int(rng.integers(schedules.k))
            counts[int(np.flatnonzero(ranked.order == observed)[0])] += 1
            model = update_rank_probabilities(model, ranked, observed)
            days += 1
        batch = (pseudo_days / schedules.k + counts) / (pseudo_days + days)
        np.testing.assert_allclose(model.probabilities, batch, atol=1e-12)
        assert model.days == pseudo_days + days

    def test_all_tied_day_keeps_probabilities(self):
        schedules = enumerate_schedules(_interruptible(2.0, 1.0, 5), horizon=5)
        P = np.random.default_rng(4).dirichlet(np.ones(schedules.k))
        model = RankProbabilityModel(P, days=7)
        ranked = rank_costs(np.full(5, 9.5), schedules)
        for observed in range(schedules.k):
            updated = update_rank_probabilities(model, ranked, observed)
            np.testing.assert_allclose(updated.probabilities, P, atol=1e-12)
            assert updated.days == 8

    def test_unknown_schedule(self):
        with pytest.raises(InputError):
            update_rank_probabilities(RankProbabilityModel.uniform(2), _ranked([1, 2]), observed_index=5)

    def test_invalid_probabilities(self):
        with pytest.raises(InputError):
            RankProbabilityModel(np.array([0.7, 0.7]))


class TestExpectedDemand:
    def test_degenerate_distribution(self):
        spec = _block(run=2, length=5)
        schedules = enumerate_schedules(spec, horizon=5)
        prices = np.array([9.0, 6.0, 8.0, 7.0, 5.0])
        model = RankProbabilityModel(np.array([1.0, 0.0, 0.0, 0.0]))
        expected = expected_shiftable_demand(prices, model, schedules)
        np.testing.assert_allclose(expected.kwh, schedule_appliance(prices, spec).kwh)

    def test_shared_slot(self):
        schedules = ScheduleSet("pair", ApplianceKind.NON_INTERRUPTIBLE, ((4, 5), (5, 6)), 1.0, 8)
        model = RankProbabilityModel(np.array([0.75, 0.25]))
        expected = expected_shiftable_demand(np.full(8, 10.0), model, schedules)
        assert expected.kwh[5] == pytest.approx(1.0)
        assert expected.kwh[4] == pytest.approx(0.75)

    def test_matches_direct_sum(self):
        rng = np.random.default_rng(11)
        schedules = enumerate_schedules(_block(run=2, length=5), horizon=5)
        P = rng.dirichlet(np.ones(4))
        prices = np.round(rng.uniform(6, 14, size=5), 2)
        ranked = rank_costs(prices, schedules)
        direct = np.zeros(5)
        for rank, index in enumerate(ranked.order):
            direct[list(schedules.schedules[index])] += P[rank] * schedules.per_slot
        got = expected_shiftable_demand(prices, RankProbabilityModel(P), schedules)
        np.testing.assert_allclose(got.kwh, direct, atol=1e-12)
        assert got.bill == pytest.approx(prices @ direct)


class TestHistoryFit:
    def test_match_schedule(self):
        schedules = enumerate_schedules(_interruptible(1.8, 1.0, 4), horizon=4)
        index = match_schedule(schedules, [0.0, 1.0, 0.0, 0.8])
        assert schedules.schedules[index] == (1, 3)

    def test_match_schedule_unknown(self):
        schedules = enumerate_schedules(_block(run=2, length=5), horizon=5)
        with pytest.raises(InputError):
            match_schedule(schedules, [1.0, 0.0, 1.0, 0.0, 0.0])

    def test_always_cheapest(self):
        spec = _block(run=2, length=5)
        schedules = enumerate_schedules(spec, horizon=5)
        rng = np.random.default_rng(5)
        prices = np.round(rng.uniform(6, 14, size=(20, 5)), 2)
        kwh = np.array([schedule_appliance(p, spec).kwh for p in prices])
        model = fit_rank_probabilities(schedules, prices, kwh)
        assert model.probabilities[0] == pytest.approx(1.0)
        assert model.days == 20


class TestCurtailableFit:
    def test_exact_recovery(self):
        rng = np.random.default_rng(0)
        prices = rng.uniform(6, 14, size=(30, 3))
        kwh = 3.0 - 0.2 * prices
        model = fit_curtailable_demand(prices, kwh)
        np.testing.assert_allclose(model.intercept, 3.0, atol=1e-8)
        np.testing.assert_allclose(model.coefficients, -0.2 * np.eye(3), atol=1e-8)

    def test_constant_consumption(self):
        rng = np.random.default_rng(1)
        prices = rng.uniform(6, 14, size=(10, 2))
        model = fit_curtailable_demand(prices, np.full((10, 2), 1.5))
        np.testing.assert_allclose(model.intercept, 1.5, atol=1e-8)
        np.testing.assert_allclose(model.coefficients, 0.0, atol=1e-8)

    def test_two_point_line(self):
        model = fit_curtailable_demand([[6.0], [14.0]], [[2.0], [1.0]])
        assert model.intercept[0] == pytest.approx(2.75)
        assert model.coefficients[0, 0] == pytest.approx(-0.125)

    def test_too_few_days(self):
        with pytest.raises(InputError):
            fit_curtailable_demand(np.ones((2, 3)), np.ones((2, 3)))

    def test_rank_deficient_without_ridge(self):
        prices = np.tile([[8.0, 9.0]], (6, 1))
        with pytest.raises(SingularFitError):
            fit_curtailable_demand(prices, np.ones((6, 2)), ridge=False)

    def test_rank_deficient_with_ridge(self, caplog):
        prices = np.tile([[8.0, 9.0]], (6, 1))
        model = fit_curtailable_demand(prices, np.ones((6, 2)), ridge=True)
        assert np.all(np.isfinite(model.coefficients))
        assert "ridge" in caplog.text


class TestCurtailablePrediction:
    def test_prediction_and_clamp(self):
        model = fit_curtailable_demand([[6.0], [14.0]], [[2.0], [1.0]], slots=[3])
        prices = np.full(24, 10.0)
        assert predict_curtailable(model, prices).kwh[3] == pytest.approx(2.75 - 1.25)

        steep = CurtailableDemandModel("ac", np.array([0]), np.array([1.0]), np.array([[-0.2]]))
        assert predict_curtailable(steep, np.full(24, 14.0)).kwh[0] == 0.0
        flat = CurtailableDemandModel("ac", np.array([0]), np.array([3.0]), np.array([[-0.2]]))
        assert predict_curtailable(flat, np.full(24, 10.0)).kwh[0] == pytest.approx(1.0)


class TestApplianceLearner:
    def test_shiftable_observe_adds_one_day(self):
        spec = _block(run=2, length=5)
        rng = np.random.default_rng(2)
        prices = np.round(rng.uniform(6, 14, size=(5, 5)), 2)
        kwh = np.array([schedule_appliance(p, spec).kwh for p in prices])
        learner = ApplianceLearner.shiftable(spec, 5, prices, kwh)
        updated = learner.observe(prices[0], kwh[0])
        assert updated.rank_model.days == learner.rank_model.days + 1
        assert learner.respond(prices[0]).energy == pytest.approx(2.0)

    def test_curtailable_observe_is_noop(self):
        spec = ApplianceSpec("ac", ApplianceKind.CURTAILABLE, 0, 2, u_lower=1.0, u_upper=2.0, u_min=3.0)
        rng = np.random.default_rng(4)
        prices = np.round(rng.uniform(6, 14, size=(6, 4)), 2)
        kwh = np.array([schedule_appliance(p, spec).kwh for p in prices])
        learner = ApplianceLearner.curtailable(spec, 4, prices, kwh)
        assert learner.observe(prices[0], kwh[0]) is learner
        assert learner.respond(prices[0]).kwh[2:].sum() == 0.0
