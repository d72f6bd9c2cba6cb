import math

import numpy as np
import pytest

from scipy import stats

from ehrelay.errors import ConfigError
from ehrelay.model import (ChannelDraw, SystemConfig, derive_params, harvest, path_loss_variance,
                           power_split_theta, sample_channels, snr_db_to_power, substream)


class TestSystemConfig():

    @pytest.mark.parametrize('rate, power, a, epsilon', [
        (2.0, 100.0, 15.0, 0.15),
        (0.5, 10.0, 1.0, 0.1),
        (2.0, 1e4, 15.0, 1.5e-3),
    ])
    def test_derive_params(self, rate, power, a, epsilon):
        params = derive_params(SystemConfig(pairs=2, rate=rate, source_power=power))
        assert params.a == pytest.approx(a)
        assert params.epsilon == pytest.approx(epsilon)

    def test_defaults(self):
        config = SystemConfig(pairs=3, rate=1.0, source_power=10.0)
        assert config.eta == 1.0
        assert config.h_variance == (1.0, 1.0, 1.0)
        assert config.g_variance == (1.0, 1.0, 1.0)
        assert config.has_unit_variances

    def test_snr_conversion(self):
        config = SystemConfig.from_snr_db(pairs=1, rate=2.0, snr_db=40.0)
        assert config.source_power == pytest.approx(1e4)
        assert config.snr_db == pytest.approx(40.0)
        assert config.with_snr_db(20.0).source_power == pytest.approx(snr_db_to_power(20.0))

    def test_path_loss(self):
        """ 2 m links with exponent 3 have mean gain 1/8 """
        assert path_loss_variance(2.0) == pytest.approx(0.125)
        config = SystemConfig.from_distances(pairs=4, rate=0.5, source_power=10.0,
                                             source_distance=2.0, destination_distance=1.0)
        assert config.h_variance == (0.125,) * 4
        assert config.g_variance == (1.0,) * 4
        assert not config.has_unit_variances

    @pytest.mark.parametrize('kwargs', [
        {'pairs': 0, 'rate': 1.0, 'source_power': 1.0},
        {'pairs': 2.5, 'rate': 1.0, 'source_power': 1.0},
        {'pairs': 2, 'rate': 0.0, 'source_power': 1.0},
        {'pairs': 2, 'rate': 1.0, 'source_power': -1.0},
        {'pairs': 2, 'rate': 1.0, 'source_power': 1.0, 'eta': 1.5},
        {'pairs': 2, 'rate': 1.0, 'source_power': 1.0, 'eta': 0.0},
        {'pairs': 2, 'rate': 1.0, 'source_power': 1.0, 'h_variance': (1.0, 1.0, 1.0)},
        {'pairs': 2, 'rate': 1.0, 'source_power': 1.0, 'g_variance': (1.0, -1.0)},
    ])
    def test_invalid_configs_rejected(self, kwargs):
        with pytest.raises(ConfigError):
            SystemConfig(**kwargs)


class TestPowerSplit():

    def test_boundary_and_clamp(self):
        assert power_split_theta(60.0, 0.25, 15.0) == 0.0
        assert power_split_theta(100.0, 0.1, 15.0) == 0.0

    def test_substitution(self):
        assert power_split_theta(100.0, 1.0, 15.0) == pytest.approx(0.85)

    def test_detector_gets_exactly_the_rate(self):
        """ what is not harvested is just enough to decode at rate R """
        config = SystemConfig(pairs=1, rate=2.0, source_power=100.0)
        params = derive_params(config)
        for h2 in (0.2, 1.0, 7.5):
            theta = power_split_theta(config.source_power, h2, params.a)
            assert 0.5 * math.log2(1.0 + (1.0 - theta) * config.source_power * h2) == pytest.approx(2.0)

    def test_vectorized_and_below_one(self, rng):
        h2 = rng.exponential(size=1000)
        theta = power_split_theta(10.0, h2, 1.0)
        assert theta.shape == (1000,)
        assert np.all((theta >= 0.0) & (theta < 1.0))


class TestHarvest():

    def test_two_pair_example(self):
        config = SystemConfig(pairs=2, rate=0.5, source_power=10.0)
        params = derive_params(config)
        state = harvest(ChannelDraw(h2=np.array([0.5, 0.05]), g2=np.ones(2)), config, params)
        assert list(state.decoded) == [True, False]
        assert state.n == 1
        assert state.total_power == pytest.approx(4.0)

    def test_nothing_decoded(self):
        config = SystemConfig(pairs=3, rate=2.0, source_power=10.0)
        params = derive_params(config)
        state = harvest(ChannelDraw(h2=np.full(3, params.epsilon), g2=np.ones(3)), config, params)
        assert state.n == 0
        assert state.total_power == 0.0

    def test_matches_power_split(self, rng):
        """ eta P h2 theta summed over decoded sources """
        config = SystemConfig(pairs=5, rate=1.0, source_power=20.0, eta=0.7)
        params = derive_params(config)
        draw = sample_channels(rng, config, size=200)
        state = harvest(draw, config, params)
        theta = power_split_theta(config.source_power, draw.h2, params.a)
        expected = (config.eta * config.source_power * draw.h2 * theta * state.decoded).sum(axis=-1)
        assert np.allclose(state.total_power, expected, rtol=1e-12, atol=1e-12)
        assert np.all(state.total_power >= 0.0)
        assert np.all(state.harvested[~state.decoded] == 0.0)

    def test_total_power_increases_with_decoded_gain(self):
        config = SystemConfig(pairs=2, rate=1.0, source_power=10.0)
        params = derive_params(config)
        low = harvest(ChannelDraw(h2=np.array([1.0, 2.0]), g2=np.ones(2)), config, params)
        high = harvest(ChannelDraw(h2=np.array([1.5, 2.0]), g2=np.ones(2)), config, params)
        assert high.total_power > low.total_power


class TestSampling():

    def test_same_seed_same_draw(self):
        config = SystemConfig(pairs=4, rate=1.0, source_power=10.0)
        first = sample_channels(substream(7, 3), config, size=50)
        second = sample_channels(substream(7, 3), config, size=50)
        assert np.array_equal(first.h2, second.h2)
        assert np.array_equal(first.g2, second.g2)

    def test_substreams_differ(self):
        config = SystemConfig(pairs=4, rate=1.0, source_power=10.0)
        first = sample_channels(substream(7, 0), config, size=50)
        second = sample_channels(substream(7, 1), config, size=50)
        assert not np.array_equal(first.h2, second.h2)

    def test_shapes(self, rng):
        config = SystemConfig(pairs=3, rate=1.0, source_power=10.0)
        assert sample_channels(rng, config).h2.shape == (3,)
        assert sample_channels(rng, config, size=10).g2.shape == (10, 3)

    def test_means_follow_variances(self):
        config = SystemConfig(pairs=2, rate=1.0, source_power=10.0,
                              h_variance=(1.0, 0.125), g_variance=(2.0, 0.5))
        draw = sample_channels(substream(11, 0), config, size=10 ** 6)
        assert np.allclose(draw.h2.mean(axis=0), config.h_variance, rtol=0.01)
        assert np.allclose(draw.g2.mean(axis=0), config.g_variance, rtol=0.01)

    def test_exponential_law(self):
        config = SystemConfig(pairs=1, rate=1.0, source_power=10.0, h_variance=0.5)
        h2 = sample_channels(substream(5, 0), config, size=20000).h2[:, 0]
        assert stats.kstest(h2, 'expon', args=(0.0, 0.5)).pvalue > 1e-3

    def test_decoding_probability(self):
        """ Pr(h2 > eps) = exp(-eps / variance) """
        config = SystemConfig(pairs=1, rate=0.5, source_power=10.0)
        eps = derive_params(config).epsilon
        h2 = sample_channels(substream(9, 0), config, size=10 ** 5).h2[:, 0]
        p = math.exp(-eps)
        stderr = math.sqrt(p * (1.0 - p) / h2.size)
        assert abs(np.mean(h2 > eps) - p) < 4.0 * stderr
