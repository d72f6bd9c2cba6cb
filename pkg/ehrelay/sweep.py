"""
SNR sweeps: config files, figure presets and CSV rows.

A config file is a flat list of `key = value` lines; `#` starts a comment. Required
keys are pairs, rate and snr (start:stop:step in dB); everything else has a default:

    eta = 1                       harvesting efficiency
    h_variance, g_variance        per-link means, one value or a comma list (default 1)
    source_distance, destination_distance, path_loss_exponent
                                  alternative to the variances (exponent default 3)
    strategies = individual,equal,waterfill,maxmin,auction
    metrics = average,best,worst  (also: success)
    mode = mc                     mc, exact, asymptotic, bounds, a comma list, or all
    trials = 1000000
    seed = 0
    workers = 1
    bound_c = 0                   c of the closed worst-user bound
    price, reserve                auction price and xi (default: by price_policy / 0.01 P_r)
    price_policy = clearing       clearing or contraction
    price_fill = 0.95             share of P_r the clearing price hands out
    reserve_fraction = 0.01
    price_margin = 0.05
    auction_tolerance = 1e-9
    auction_max_iterations = 1000
"""
import csv
import math

from dataclasses import dataclass, field, replace
from pathlib import Path

from .analytic import METRICS, asymptotic_outage, exact_outage, wf_worst_bounds
from .auction import (DEFAULT_FILL, DEFAULT_MARGIN, DEFAULT_MAX_ITERATIONS, DEFAULT_RESERVE_FRACTION,
                      DEFAULT_TOLERANCE, AuctionConfig)
from .engine import run_experiment
from .errors import AnalyticError, ConfigError, RelayError
from .logs import log_debug, log_warning
from .model import DEFAULT_PATH_LOSS_EXPONENT, SystemConfig, path_loss_variance, snr_db_to_power
from .strategies import STRATEGY_NAMES


MODES = ('mc', 'exact', 'asymptotic', 'bounds')
SWEEP_METRICS = METRICS + ('success',)
CSV_COLUMNS = ('snr_db', 'strategy', 'metric', 'method', 'value', 'stderr', 'trials', 'seed')
DEFAULT_TRIALS = 10 ** 6
REQUIRED_KEYS = ('pairs', 'rate', 'snr')


@dataclass(frozen=True)
class SnrRange:
    start: float
    stop: float
    step: float

    def __post_init__(self):
        if not self.step > 0:
            raise ConfigError(f'snr step must be positive, got {self.step}')
        if self.stop < self.start:
            raise ConfigError(f'snr stop {self.stop} is below start {self.start}')

    def points(self):
        count = math.floor((self.stop - self.start) / self.step + 1e-9) + 1
        return [round(self.start + k * self.step, 9) for k in range(count)]

    def __str__(self):
        return f'{self.start!r}:{self.stop!r}:{self.step!r}'


@dataclass(frozen=True)
class SweepSpec:
    snr_db_range: SnrRange
    strategies: tuple = STRATEGY_NAMES
    metrics: tuple = METRICS
    modes: tuple = ('mc',)
    trials: int = DEFAULT_TRIALS
    seed: int = 0
    workers: int = 1
    bound_c: float = 0.0
    auction: AuctionConfig = field(default_factory=AuctionConfig)

    def __post_init__(self):
        for name, values, known in (('strategy', self.strategies, STRATEGY_NAMES),
                                    ('metric', self.metrics, SWEEP_METRICS),
                                    ('mode', self.modes, MODES)):
            if not values:
                raise ConfigError(f'at least one {name} is needed')
            for value in values:
                if value not in known:
                    raise ConfigError(f'unknown {name} {value!r}; choose from {", ".join(known)}')
        if self.trials < 1:
            raise ConfigError(f'trials must be positive, got {self.trials}')
        if self.seed < 0:
            raise ConfigError(f'seed must be nonnegative, got {self.seed}')
        if self.workers < 1:
            raise ConfigError(f'workers must be positive, got {self.workers}')
        if self.bound_c < 0:
            raise ConfigError(f'bound_c must be nonnegative, got {self.bound_c}')


@dataclass(frozen=True)
class SweepRow:
    snr_db: float
    strategy: str
    metric: str
    method: str
    value: float
    stderr: float = None
    trials: int = None
    seed: int = None

    def cells(self):
        return (f'{self.snr_db:g}', self.strategy, self.metric, self.method, f'{self.value:.12g}',
                '' if self.stderr is None else f'{self.stderr:.12g}',
                '' if self.trials is None else str(self.trials),
                '' if self.seed is None else str(self.seed))


@dataclass(frozen=True)
class SweepResult:
    rows: list
    auction_failures: int = 0

    def __iter__(self):
        return iter(self.rows)

    def __len__(self):
        return len(self.rows)


@dataclass(frozen=True)
class Panel:
    """ one (system, sweep) pair; presets may have several """
    name: str
    config: SystemConfig
    spec: SweepSpec


# config parsing
#
#
def _parse_int(text):
    number = float(text)
    if not number.is_integer():
        raise ValueError(f'{text} is not an integer')
    return int(number)


def _parse_floats(text):
    values = tuple(float(v) for v in text.split(','))
    return values[0] if len(values) == 1 else values


def _parse_names(text):
    return tuple(v.strip() for v in text.split(',') if v.strip())


def _parse_modes(text):
    modes = _parse_names(text)
    if 'all' in modes:
        return MODES
    return modes


def _parse_snr(text):
    parts = text.split(':')
    if len(parts) == 1:
        value = float(parts[0])
        return SnrRange(value, value, 1.0)
    if len(parts) != 3:
        raise ValueError('snr takes start:stop:step or a single value')
    return SnrRange(*(float(p) for p in parts))


KEY_PARSERS = {
    'pairs': _parse_int,
    'rate': float,
    'eta': float,
    'snr': _parse_snr,
    'h_variance': _parse_floats,
    'g_variance': _parse_floats,
    'source_distance': float,
    'destination_distance': float,
    'path_loss_exponent': float,
    'strategies': _parse_names,
    'metrics': _parse_names,
    'mode': _parse_modes,
    'trials': _parse_int,
    'seed': _parse_int,
    'workers': _parse_int,
    'bound_c': float,
    'price': float,
    'reserve': float,
    'price_policy': str,
    'price_fill': float,
    'reserve_fraction': float,
    'price_margin': float,
    'auction_tolerance': float,
    'auction_max_iterations': _parse_int,
}


def _parse_value(key, raw, line=None):
    if key not in KEY_PARSERS:
        raise ConfigError(f'unknown key {key!r}', line)
    try:
        return KEY_PARSERS[key](raw.strip())
    except (ValueError, TypeError) as e:
        raise ConfigError(f'invalid value {raw.strip()!r} for {key}: {e}', line)


def parse_text(text, overrides=None):
    """ (SystemConfig, SweepSpec) from config text; overrides map keys to raw strings """
    values = {}
    lines = {}
    for number, raw_line in enumerate(text.splitlines(), start=1):
        content = raw_line.split('#', 1)[0].strip()
        if not content:
            continue
        if '=' not in content:
            raise ConfigError(f'expected key = value, got {content!r}', number)
        key, raw = (part.strip() for part in content.split('=', 1))
        if key in values:
            raise ConfigError(f'duplicate key {key!r} (first set on line {lines[key]})', number)
        values[key] = _parse_value(key, raw, number)
        lines[key] = number

    for key, raw in (overrides or {}).items():
        if raw is not None:
            values[key] = _parse_value(key, str(raw))

    return _build(values, lines)


def parse_config(path, overrides=None):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f'cannot read config file {path}: {e.strerror}')
    log_debug(f'parsing config {path}')
    return parse_text(text, overrides)


def _build(values, lines):
    for key in REQUIRED_KEYS:
        if key not in values:
            raise ConfigError(f'missing required key {key!r}')

    def at(key):
        return lines.get(key)

    distances = [k for k in ('source_distance', 'destination_distance') if k in values]
    h_variance = values.get('h_variance')
    g_variance = values.get('g_variance')
    if distances:
        if len(distances) != 2:
            raise ConfigError('source_distance and destination_distance go together')
        if h_variance is not None or g_variance is not None:
            raise ConfigError('give either link distances or channel variances, not both',
                              at('h_variance') or at('g_variance'))
        exponent = values.get('path_loss_exponent', DEFAULT_PATH_LOSS_EXPONENT)
        h_variance = path_loss_variance(values['source_distance'], exponent)
        g_variance = path_loss_variance(values['destination_distance'], exponent)
    elif 'path_loss_exponent' in values:
        raise ConfigError('path_loss_exponent needs link distances', at('path_loss_exponent'))

    snr = values['snr']
    config = SystemConfig(pairs=values['pairs'], rate=values['rate'],
                          source_power=snr_db_to_power(snr.start), eta=values.get('eta', 1.0),
                          h_variance=h_variance, g_variance=g_variance)
    auction = AuctionConfig(price=values.get('price'), reserve=values.get('reserve'),
                            policy=values.get('price_policy', 'clearing'),
                            fill=values.get('price_fill', DEFAULT_FILL),
                            reserve_fraction=values.get('reserve_fraction', DEFAULT_RESERVE_FRACTION),
                            margin=values.get('price_margin', DEFAULT_MARGIN),
                            tolerance=values.get('auction_tolerance', DEFAULT_TOLERANCE),
                            max_iterations=values.get('auction_max_iterations', DEFAULT_MAX_ITERATIONS))
    spec = SweepSpec(snr_db_range=snr,
                     strategies=values.get('strategies', STRATEGY_NAMES),
                     metrics=values.get('metrics', METRICS),
                     modes=values.get('mode', ('mc',)),
                     trials=values.get('trials', DEFAULT_TRIALS),
                     seed=values.get('seed', 0),
                     workers=values.get('workers', 1),
                     bound_c=values.get('bound_c', 0.0),
                     auction=auction)
    return config, spec


def dump_config(config: SystemConfig, spec: SweepSpec):
    """ effective configuration as config-file text that parses back to the same structures """
    auction = spec.auction
    entries = [
        ('pairs', config.pairs),
        ('rate', repr(config.rate)),
        ('eta', repr(config.eta)),
        ('h_variance', ','.join(repr(v) for v in config.h_variance)),
        ('g_variance', ','.join(repr(v) for v in config.g_variance)),
        ('snr', str(spec.snr_db_range)),
        ('strategies', ','.join(spec.strategies)),
        ('metrics', ','.join(spec.metrics)),
        ('mode', ','.join(spec.modes)),
        ('trials', spec.trials),
        ('seed', spec.seed),
        ('workers', spec.workers),
        ('bound_c', repr(spec.bound_c)),
        ('price', None if auction.price is None else repr(auction.price)),
        ('reserve', None if auction.reserve is None else repr(auction.reserve)),
        ('price_policy', auction.policy),
        ('price_fill', repr(auction.fill)),
        ('reserve_fraction', repr(auction.reserve_fraction)),
        ('price_margin', repr(auction.margin)),
        ('auction_tolerance', repr(auction.tolerance)),
        ('auction_max_iterations', auction.max_iterations),
    ]
    return ''.join(f'{key} = {value}\n' for key, value in entries if value is not None)


# presets
#
#
def _unit_panels(name, rate, pair_counts, snr, **spec_fields):
    return [Panel(name=f'{name}-M{pairs}',
                  config=SystemConfig(pairs=pairs, rate=rate, source_power=snr_db_to_power(snr.start)),
                  spec=SweepSpec(snr_db_range=snr, **spec_fields))
            for pairs in pair_counts]


def _path_loss_panel(name, metrics):
    snr = SnrRange(0.0, 30.0, 2.5)
    config = SystemConfig.from_distances(pairs=20, rate=0.5, source_power=snr_db_to_power(snr.start),
                                         source_distance=2.0, destination_distance=2.0)
    spec = SweepSpec(snr_db_range=snr, strategies=STRATEGY_NAMES, metrics=metrics, modes=('mc',),
                     trials=10 ** 5)
    return [Panel(name=name, config=config, spec=spec)]


PRESETS = {
    'fig-individual-vs-equal': lambda: _unit_panels(
        'fig-individual-vs-equal', 2.0, (2, 3), SnrRange(0.0, 40.0, 5.0),
        strategies=('individual', 'equal'), metrics=METRICS, modes=('mc', 'exact')),
    'fig-wf-bounds': lambda: _unit_panels(
        'fig-wf-bounds', 2.0, (3, 5, 10, 20), SnrRange(0.0, 40.0, 5.0),
        strategies=('waterfill',), metrics=('worst',), modes=('mc', 'bounds')),
    'fig-wf-outage': lambda: _unit_panels(
        'fig-wf-outage', 2.0, (2, 3), SnrRange(0.0, 40.0, 5.0),
        strategies=('waterfill',), metrics=METRICS, modes=('mc', 'exact')),
    'fig-worst-user': lambda: _path_loss_panel('fig-worst-user', ('worst',)),
    'fig-average': lambda: _path_loss_panel('fig-average', ('average',)),
    'fig-success-count': lambda: _path_loss_panel('fig-success-count', ('success',)),
}


def preset_panels(name, **spec_overrides):
    """ panels of a named preset; trials, seed or workers may be overridden """
    if name not in PRESETS:
        raise ConfigError(f'unknown preset {name!r}; choose from {", ".join(PRESETS)}')
    overrides = {k: v for k, v in spec_overrides.items() if v is not None}
    return [replace(panel, spec=replace(panel.spec, **overrides)) for panel in PRESETS[name]()]


# running
#
#
def _analytic_rows(snr, strategy, metric, point, spec):
    rows = []
    if 'exact' in spec.modes:
        try:
            value = exact_outage(strategy, metric, point)
            rows.append(SweepRow(snr, strategy, metric, value.method, value.probability))
        except AnalyticError as e:
            log_debug(f'no exact row: {e}')
    if 'asymptotic' in spec.modes:
        try:
            for value in asymptotic_outage(strategy, metric, point, c=spec.bound_c):
                rows.append(SweepRow(snr, strategy, metric, value.method, value.probability))
        except AnalyticError as e:
            log_debug(f'no asymptotic row: {e}')
    if ('bounds' in spec.modes and metric == 'worst' and strategy in ('waterfill', 'maxmin')
            and point.pairs >= 2):
        bounds = wf_worst_bounds(point, min(spec.bound_c, point.pairs - 1))
        for value in (bounds.lower, bounds.upper_integral, bounds.upper_closed):
            rows.append(SweepRow(snr, strategy, metric, value.method, value.probability))
    return rows


def run_sweep(spec: SweepSpec, config: SystemConfig) -> SweepResult:
    """
    One row per (snr, strategy, metric, method). Every SNR point and strategy reuses
    the same seed, so strategies are compared on identical channel draws.
    """
    analytic_modes = set(spec.modes) - {'mc'}
    if analytic_modes and not config.has_unit_variances:
        log_warning('closed forms assume unit channel variances; only Monte Carlo rows are produced')
        analytic_modes = set()

    rows = []
    failures = 0
    for snr in spec.snr_db_range.points():
        point = config.with_snr_db(snr)
        for strategy in spec.strategies:
            if 'mc' in spec.modes:
                report = run_experiment(point, strategy, spec.trials, spec.seed, spec.workers,
                                        spec.auction)
                failures += report.auction_failures
                for metric in spec.metrics:
                    estimate = report[metric]
                    rows.append(SweepRow(snr, strategy, metric, 'mc', estimate.value,
                                         estimate.stderr, spec.trials, spec.seed))
            if not analytic_modes:
                continue
            for metric in spec.metrics:
                if metric != 'success':
                    rows.extend(_analytic_rows(snr, strategy, metric, point, spec))
        log_debug(f'sweep point {snr} dB done, {len(rows)} rows so far')
    return SweepResult(rows=rows, auction_failures=failures)


def write_csv(rows, handle, header=True):
    writer = csv.writer(handle, lineterminator='\n')
    if header:
        writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow(row.cells())


def row_from_cells(cells):
    """ inverse of SweepRow.cells for stored or re-read rows """
    if len(cells) != len(CSV_COLUMNS):
        raise RelayError(f'expected {len(CSV_COLUMNS)} columns, got {len(cells)}')
    snr, strategy, metric, method, value, stderr, trials, seed = cells
    return SweepRow(float(snr), strategy, metric, method, float(value),
                    float(stderr) if stderr != '' else None,
                    int(trials) if trials != '' else None,
                    int(seed) if seed != '' else None)
