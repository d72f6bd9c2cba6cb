"""
ehrelay: power allocation and outage analysis for a multi-pair energy-harvesting
decode-and-forward relay.

    specfun     modified Bessel functions K_n and the kernels the closed forms use
    model       system configuration, channel sampling, power splitting, harvest
    strategies  individual, equal, water-filling and max-min allocation
    auction     the power auction game and its best-response dynamics
    analytic    closed-form outage, worst-user bounds, high-SNR asymptotics
    engine      Monte Carlo outage experiments
    sweep       config files, presets and CSV rows for SNR sweeps
    cli         the `ehrelay` command
"""
from .errors import AnalyticError, ConfigError, ConvergenceError, DomainError, QuadratureError, RelayError
from .model import SystemConfig, derive_params, harvest, sample_channels, substream
from .strategies import STRATEGY_NAMES


__all__ = [
    'AnalyticError', 'ConfigError', 'ConvergenceError', 'DomainError', 'QuadratureError',
    'RelayError', 'STRATEGY_NAMES', 'SystemConfig', 'derive_params', 'harvest',
    'sample_channels', 'substream',
]
