import itertools
import math

import numpy as np
import pytest

from hypothesis import given, settings, strategies as st

from ehrelay.model import (ChannelDraw, DerivedParams, HarvestState, SystemConfig, derive_params, harvest,
                           sample_channels)
from ehrelay.strategies import (PowerAllocation, allocate_equal, allocate_individual, allocate_maxmin,
                                allocate_waterfill, maxmin_common_rate, required_power, served)


def fixed_state(decoded, total_power, harvested=None):
    decoded = np.asarray(decoded, dtype=bool)
    if harvested is None:
        harvested = np.where(decoded, total_power / max(decoded.sum(), 1), 0.0)
    return HarvestState(decoded=decoded, harvested=np.asarray(harvested, dtype=float),
                        total_power=np.float64(total_power))


def fixed_draw(g2, h2=None):
    g2 = np.asarray(g2, dtype=float)
    return ChannelDraw(h2=np.ones_like(g2) if h2 is None else np.asarray(h2, dtype=float), g2=g2)


UNIT_A = DerivedParams(a=1.0, epsilon=0.1)


def most_servable(required, budget):
    """ exhaustive search over subsets for the largest one the budget covers """
    finite = [r for r in required if math.isfinite(r)]
    for size in range(len(finite), 0, -1):
        if any(sum(subset) <= budget for subset in itertools.combinations(finite, size)):
            return size
    return 0


class TestIndividual():

    def test_undecoded_users_get_nothing(self):
        state = fixed_state([True, False, True], 3.0, harvested=[1.0, 0.0, 2.0])
        allocation = allocate_individual(fixed_draw([1.0, 1.0, 1.0]), state, UNIT_A)
        assert list(allocation.power) == [1.0, 0.0, 2.0]
        assert allocation.leftover == 0.0

    def test_power_vanishes_just_above_threshold(self):
        config = SystemConfig(pairs=2, rate=0.5, source_power=10.0)
        params = derive_params(config)
        draw = ChannelDraw(h2=np.array([params.epsilon * (1.0 + 1e-9), 2.0]), g2=np.ones(2))
        allocation = allocate_individual(draw, harvest(draw, config, params), params)
        assert allocation.power[0] == pytest.approx(0.0, abs=1e-7)

    def test_single_pair_matches_equal(self, rng):
        config = SystemConfig(pairs=1, rate=1.0, source_power=10.0)
        params = derive_params(config)
        draw = sample_channels(rng, config, size=500)
        state = harvest(draw, config, params)
        assert np.allclose(allocate_individual(draw, state, params).power, allocate_equal(state).power)

    def test_outage_matches_direct_condition(self, rng):
        """ outage iff h2 <= eps or eta (P h2 - a) g2 < a """
        config = SystemConfig(pairs=4, rate=1.0, source_power=30.0, eta=0.8)
        params = derive_params(config)
        draw = sample_channels(rng, config, size=5000)
        state = harvest(draw, config, params)
        success = served(allocate_individual(draw, state, params), draw, state, params)
        direct = ((draw.h2 > params.epsilon)
                  & (config.eta * (config.source_power * draw.h2 - params.a) * draw.g2 >= params.a))
        assert np.array_equal(success, direct)


class TestEqual():

    def test_nobody_decoded(self):
        allocation = allocate_equal(fixed_state([False, False, False], 0.0))
        assert np.all(allocation.power == 0.0)
        assert allocation.leftover == 0.0

    def test_even_split(self):
        allocation = allocate_equal(fixed_state([True, False, True], 4.0))
        assert list(allocation.power) == [2.0, 0.0, 2.0]
        assert allocation.power.sum() == 4.0

    def test_batch_shape(self):
        state = HarvestState(decoded=np.array([[True, True], [False, False]]),
                             harvested=np.array([[1.0, 2.0], [0.0, 0.0]]),
                             total_power=np.array([3.0, 0.0]))
        allocation = allocate_equal(state)
        assert allocation.power.shape == (2, 2)
        assert list(allocation.power[0]) == [1.5, 1.5]
        assert list(allocation.power[1]) == [0.0, 0.0]


class TestWaterfill():

    def test_hand_traced_example(self):
        draw = fixed_draw([2.0, 1.0, 0.25])
        state = fixed_state([True, True, True], 2.0)
        allocation = allocate_waterfill(draw, state, UNIT_A)
        assert list(allocation.power) == [0.5, 1.0, 0.0]
        assert allocation.leftover == pytest.approx(0.5)
        assert served(allocation, draw, state, UNIT_A).sum() == 2

    def test_everyone_served_when_budget_allows(self):
        draw = fixed_draw([2.0, 1.0, 0.25])
        state = fixed_state([True, True, True], 10.0)
        allocation = allocate_waterfill(draw, state, UNIT_A)
        assert allocation.leftover == pytest.approx(10.0 - 5.5)
        assert served(allocation, draw, state, UNIT_A).all()

    def test_nobody_served_below_cheapest_requirement(self):
        draw = fixed_draw([2.0, 1.0])
        state = fixed_state([True, True], 0.4)
        allocation = allocate_waterfill(draw, state, UNIT_A)
        assert np.all(allocation.power == 0.0)
        assert allocation.leftover == 0.4

    def test_undecoded_users_are_skipped(self):
        draw = fixed_draw([4.0, 2.0, 1.0])
        state = fixed_state([False, True, True], 1.6)
        allocation = allocate_waterfill(draw, state, UNIT_A)
        assert list(allocation.power) == [0.0, 0.5, 1.0]
        assert np.isinf(required_power(draw, state, UNIT_A)[0])

    def test_ties_broken_by_user_index(self):
        draw = fixed_draw([1.0, 1.0, 1.0])
        state = fixed_state([True, True, True], 2.5)
        allocation = allocate_waterfill(draw, state, UNIT_A)
        assert list(allocation.power) == [1.0, 1.0, 0.0]

    def test_success_count_is_optimal(self, rng):
        """ no subset within budget serves more destinations """
        violations = 0
        for _ in range(10 ** 4):
            pairs = int(rng.integers(1, 7))
            draw = fixed_draw(rng.exponential(size=pairs))
            state = fixed_state(rng.random(pairs) < 0.8, rng.exponential(3.0))
            allocation = allocate_waterfill(draw, state, UNIT_A)
            count = served(allocation, draw, state, UNIT_A).sum()
            if count != most_servable(required_power(draw, state, UNIT_A), float(state.total_power)):
                violations += 1
        assert violations == 0

    def test_all_served_exactly_when_maxmin_reaches_rate(self, rng):
        """ with every source decoded, water filling serves all iff the common rate reaches R """
        config = SystemConfig(pairs=5, rate=1.0, source_power=10.0)
        params = derive_params(config)
        draw = fixed_draw(rng.exponential(size=(20000, 5)))
        state = HarvestState(decoded=np.ones((20000, 5), dtype=bool),
                             harvested=np.zeros((20000, 5)),
                             total_power=rng.exponential(10.0, size=20000))
        everyone = served(allocate_waterfill(draw, state, params), draw, state, params).all(axis=-1)
        reaches_rate = maxmin_common_rate(draw, state) >= config.rate
        assert np.array_equal(everyone, reaches_rate)
        assert 0 < everyone.sum() < everyone.size


class TestMaxmin():

    def test_single_decoded_user_takes_everything(self):
        draw = fixed_draw([0.7, 3.0])
        state = fixed_state([True, False], 2.0)
        allocation = allocate_maxmin(draw, state, UNIT_A)
        assert allocation.power[0] == pytest.approx(2.0)
        assert allocation.power[1] == 0.0
        assert maxmin_common_rate(draw, state) == pytest.approx(0.5 * math.log2(1.0 + 2.0 * 0.7))

    def test_common_rate_example(self):
        """ 1/g2 summing to 5.5 with P_r = 2 """
        draw = fixed_draw([2.0, 1.0, 0.25])
        state = fixed_state([True, True, True], 2.0)
        assert maxmin_common_rate(draw, state) == pytest.approx(0.5 * math.log2(1.0 + 2.0 / 5.5))
        assert maxmin_common_rate(draw, state) == pytest.approx(0.2237, abs=1e-4)
        allocation = allocate_maxmin(draw, state, UNIT_A)
        assert abs(allocation.power.sum() - 2.0) <= 1e-12
        rates = 0.5 * np.log2(1.0 + allocation.power * draw.g2)
        assert np.allclose(rates, maxmin_common_rate(draw, state), rtol=1e-12)

    def test_equal_gains_match_equal_split(self):
        draw = fixed_draw([1.3, 1.3, 1.3, 1.3])
        state = fixed_state([True, True, False, True], 6.0)
        assert np.allclose(allocate_maxmin(draw, state, UNIT_A).power,
                           allocate_equal(state).power, rtol=1e-12)

    def test_nobody_decoded(self):
        draw = fixed_draw([1.0, 2.0])
        state = fixed_state([False, False], 0.0)
        assert np.all(allocate_maxmin(draw, state, UNIT_A).power == 0.0)
        assert maxmin_common_rate(draw, state) == 0.0


ALLOCATORS = {
    'individual': allocate_individual,
    'equal': lambda draw, state, params: allocate_equal(state),
    'waterfill': allocate_waterfill,
    'maxmin': allocate_maxmin,
}


class TestConservation():

    @settings(max_examples=200, deadline=None)
    @given(h2=st.lists(st.floats(min_value=1e-4, max_value=20.0), min_size=1, max_size=8),
           data=st.data())
    def test_budget_is_conserved(self, h2, data):
        pairs = len(h2)
        g2 = data.draw(st.lists(st.floats(min_value=1e-4, max_value=20.0),
                                min_size=pairs, max_size=pairs))
        config = SystemConfig(pairs=pairs, rate=0.5, source_power=10.0, eta=0.9)
        params = derive_params(config)
        draw = ChannelDraw(h2=np.array(h2), g2=np.array(g2))
        state = harvest(draw, config, params)
        for allocate in ALLOCATORS.values():
            allocation = allocate(draw, state, params)
            assert isinstance(allocation, PowerAllocation)
            assert np.all(allocation.power >= 0.0)
            assert np.all(allocation.power[~state.decoded] == 0.0)
            assert allocation.total() == pytest.approx(float(state.total_power), rel=1e-9, abs=1e-12)

    @pytest.mark.parametrize('name', sorted(ALLOCATORS))
    def test_batches_match_single_draws(self, name, rng):
        config = SystemConfig(pairs=4, rate=1.0, source_power=20.0)
        params = derive_params(config)
        draw = sample_channels(rng, config, size=50)
        batch = ALLOCATORS[name](draw, harvest(draw, config, params), params)
        for row in range(50):
            single = ChannelDraw(h2=draw.h2[row], g2=draw.g2[row])
            allocation = ALLOCATORS[name](single, harvest(single, config, params), params)
            assert np.allclose(allocation.power, batch.power[row], rtol=1e-14, atol=0.0)
