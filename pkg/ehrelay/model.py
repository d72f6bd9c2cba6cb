"""
System parameters, channel sampling, power splitting and harvest bookkeeping.

All per-user quantities are numpy arrays whose last axis indexes the M user pairs.
A single realization has shape (M,); a block of trials has shape (trials, M). Every
function here broadcasts over the leading axes, so strategies and the engine share
one code path for one trial and for a million.
"""
import math

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .logs import log_debug


DEFAULT_PATH_LOSS_EXPONENT = 3.0


def snr_db_to_power(snr_db):
    """ unit noise variance, so the source power is the linear SNR """
    return 10.0 ** (snr_db / 10.0)


def path_loss_variance(distance, exponent=DEFAULT_PATH_LOSS_EXPONENT):
    """ mean of |channel|^2 for a link of the given length """
    if distance <= 0:
        raise ConfigError(f'link distance must be positive, got {distance}')
    return float(distance) ** (-float(exponent))


@dataclass(frozen=True)
class SystemConfig:
    pairs: int
    rate: float
    source_power: float
    eta: float = 1.0
    h_variance: tuple = field(default=None)
    g_variance: tuple = field(default=None)

    def __post_init__(self):
        if isinstance(self.pairs, bool) or int(self.pairs) != self.pairs or self.pairs < 1:
            raise ConfigError(f'pairs must be a positive integer, got {self.pairs}')
        object.__setattr__(self, 'pairs', int(self.pairs))
        if not self.rate > 0:
            raise ConfigError(f'rate must be positive, got {self.rate}')
        if not self.source_power > 0:
            raise ConfigError(f'source_power must be positive, got {self.source_power}')
        if not 0 < self.eta <= 1:
            raise ConfigError(f'eta must lie in (0, 1], got {self.eta}')
        for name in ('h_variance', 'g_variance'):
            value = getattr(self, name)
            if value is None:
                value = (1.0,) * self.pairs
            elif np.ndim(value) == 0:
                value = (float(value),) * self.pairs
            else:
                value = tuple(float(v) for v in value)
            if len(value) != self.pairs:
                raise ConfigError(f'{name} needs {self.pairs} entries, got {len(value)}')
            if not all(v > 0 for v in value):
                raise ConfigError(f'{name} entries must be positive, got {value}')
            object.__setattr__(self, name, value)

    @classmethod
    def from_snr_db(cls, pairs, rate, snr_db, **kwargs):
        return cls(pairs=pairs, rate=rate, source_power=snr_db_to_power(snr_db), **kwargs)

    @classmethod
    def from_distances(cls, pairs, rate, source_power, source_distance,
                       destination_distance, exponent=DEFAULT_PATH_LOSS_EXPONENT, eta=1.0):
        return cls(pairs=pairs, rate=rate, source_power=source_power, eta=eta,
                   h_variance=path_loss_variance(source_distance, exponent),
                   g_variance=path_loss_variance(destination_distance, exponent))

    def with_snr_db(self, snr_db):
        return replace(self, source_power=snr_db_to_power(snr_db))

    @property
    def snr_db(self):
        return 10.0 * math.log10(self.source_power)

    @property
    def has_unit_variances(self):
        return all(v == 1.0 for v in self.h_variance + self.g_variance)


@dataclass(frozen=True)
class DerivedParams:
    a: float        # SNR threshold 2^{2R} - 1
    epsilon: float  # decoding threshold on |h|^2


def derive_params(config: SystemConfig) -> DerivedParams:
    a = 2.0 ** (2.0 * config.rate) - 1.0
    return DerivedParams(a=a, epsilon=a / config.source_power)


@dataclass(frozen=True)
class ChannelDraw:
    h2: np.ndarray  # |h_i|^2, source to relay
    g2: np.ndarray  # |g_i|^2, relay to destination

    @property
    def pairs(self):
        return self.h2.shape[-1]


@dataclass(frozen=True)
class HarvestState:
    decoded: np.ndarray       # membership in the decoding set S2
    harvested: np.ndarray     # per-source harvested power, 0 outside S2
    total_power: np.ndarray   # P_r

    @property
    def n(self):
        return self.decoded.sum(axis=-1)


def substream(seed, *key):
    """ independent generator for (seed, key...); same inputs give the same stream """
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(key)))


def sample_channels(stream: np.random.Generator, config: SystemConfig, size=None) -> ChannelDraw:
    """
    Rayleigh fading: |h_i|^2 and |g_i|^2 exponential with the configured means.
    size=None gives one realization of shape (M,), size=k gives (k, M).
    """
    shape = (config.pairs,) if size is None else (int(size), config.pairs)
    h2 = stream.exponential(scale=np.asarray(config.h_variance), size=shape)
    g2 = stream.exponential(scale=np.asarray(config.g_variance), size=shape)
    return ChannelDraw(h2=h2, g2=g2)


def power_split_theta(power, h2, a):
    """
    Fraction of the received signal routed to harvesting: 1 - a/(P h2) once the
    detector has what it needs, 0 when it never gets there.
    """
    received = np.asarray(power * h2, dtype=float)
    with np.errstate(divide='ignore', invalid='ignore'):
        theta = np.where(received > a, 1.0 - a / received, 0.0)
    if theta.ndim == 0:
        return float(theta)
    return theta


def harvest(draw: ChannelDraw, config: SystemConfig, params: DerivedParams) -> HarvestState:
    decoded = draw.h2 > params.epsilon
    # eta P_s h2 theta == eta (P_s h2 - a) on S2; clamp the rounding just above epsilon
    harvested = np.where(decoded,
                         np.maximum(config.eta * (config.source_power * draw.h2 - params.a), 0.0),
                         0.0)
    state = HarvestState(decoded=decoded, harvested=harvested,
                         total_power=harvested.sum(axis=-1))
    log_debug(f'harvest: {np.size(state.n)} draws, mean decoded {np.mean(state.n):.3f}')
    return state
