"""
Monte Carlo outage experiments.

Trials are drawn in fixed blocks of BLOCK_SIZE consecutive trial indices, block b
using substream(seed, b); a worker pool receives whole blocks and the partial tallies
are combined in block order, so a report does not depend on the number of workers.
"""
import math

from dataclasses import dataclass, field
from multiprocessing import Pool

import numpy as np

from .auction import AuctionConfig, allocate_auction
from .errors import ConfigError
from .logs import log_debug, log_warning
from .model import ChannelDraw, HarvestState, SystemConfig, derive_params, harvest, sample_channels, substream
from .strategies import (STRATEGY_NAMES, allocate_equal, allocate_individual, allocate_maxmin,
                         allocate_waterfill, served)


BLOCK_SIZE = 8192


@dataclass(frozen=True)
class TrialResult:
    outage: np.ndarray     # per user
    success_count: int
    leftover: float


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float


@dataclass
class _Tally:
    """ sufficient statistics of one block """
    trials: int = 0
    outage_fraction_sum: float = 0.0
    outage_fraction_sq_sum: float = 0.0
    all_outage: int = 0
    any_outage: int = 0
    success_sum: int = 0
    success_sq_sum: int = 0
    leftover_sum: float = 0.0
    auction_failures: int = 0
    histogram: np.ndarray = field(default=None)

    def merge(self, other):
        self.trials += other.trials
        self.outage_fraction_sum += other.outage_fraction_sum
        self.outage_fraction_sq_sum += other.outage_fraction_sq_sum
        self.all_outage += other.all_outage
        self.any_outage += other.any_outage
        self.success_sum += other.success_sum
        self.success_sq_sum += other.success_sq_sum
        self.leftover_sum += other.leftover_sum
        self.auction_failures += other.auction_failures
        self.histogram = other.histogram.copy() if self.histogram is None else self.histogram + other.histogram


@dataclass(frozen=True)
class OutageReport:
    strategy: str
    trials: int
    seed: int
    average: Estimate
    best: Estimate
    worst: Estimate
    success: Estimate          # mean number of served destinations per trial
    mean_leftover: float
    auction_failures: int
    success_histogram: np.ndarray

    def __getitem__(self, metric):
        return getattr(self, metric)

    def success_distribution(self):
        return self.success_histogram / self.trials


def _check_strategy(strategy):
    if strategy not in STRATEGY_NAMES:
        raise ConfigError(f'unknown strategy {strategy!r}; choose from {", ".join(STRATEGY_NAMES)}')


def allocate(strategy, draw: ChannelDraw, state: HarvestState, params, auction_config=None):
    """ (allocation, auction state or None) for any strategy """
    _check_strategy(strategy)
    if strategy == 'individual':
        return allocate_individual(draw, state, params), None
    if strategy == 'equal':
        return allocate_equal(state), None
    if strategy == 'waterfill':
        return allocate_waterfill(draw, state, params), None
    if strategy == 'maxmin':
        return allocate_maxmin(draw, state, params), None
    return allocate_auction(draw, state, params, auction_config or AuctionConfig())


def outage_indicators(config: SystemConfig, strategy, draw: ChannelDraw, auction_config=None):
    """ per-user outage flags, leftover power and the auction (if any) for a draw of any shape """
    params = derive_params(config)
    state = harvest(draw, config, params)
    allocation, auction = allocate(strategy, draw, state, params, auction_config)
    return ~served(allocation, draw, state, params), allocation.leftover, auction


def run_trial(stream: np.random.Generator, config: SystemConfig, strategy,
              auction_config=None) -> TrialResult:
    draw = sample_channels(stream, config)
    outage, leftover, _ = outage_indicators(config, strategy, draw, auction_config)
    return TrialResult(outage=outage, success_count=int((~outage).sum()), leftover=float(leftover))


def _check_run(trials, seed):
    if int(trials) != trials or trials < 1:
        raise ConfigError(f'trials must be a positive integer, got {trials}')
    if not isinstance(seed, (int, np.integer)) or isinstance(seed, bool) or seed < 0:
        raise ConfigError(f'seed must be a nonnegative integer, got {seed}')
    return int(trials)


def _block_sizes(trials):
    full, rest = divmod(trials, BLOCK_SIZE)
    return [BLOCK_SIZE] * full + ([rest] if rest else [])


def _run_block(config, strategy, seed, block, size, auction_config):
    draw = sample_channels(substream(seed, block), config, size=size)
    outage, leftover, auction = outage_indicators(config, strategy, draw, auction_config)
    fraction = outage.mean(axis=-1)
    successes = config.pairs - outage.sum(axis=-1)
    return _Tally(
        trials=size,
        outage_fraction_sum=math.fsum(fraction),
        outage_fraction_sq_sum=math.fsum(fraction ** 2),
        all_outage=int(outage.all(axis=-1).sum()),
        any_outage=int(outage.any(axis=-1).sum()),
        success_sum=int(successes.sum()),
        success_sq_sum=int((successes ** 2).sum()),
        leftover_sum=math.fsum(leftover),
        auction_failures=0 if auction is None else int((~auction.converged).sum()),
        histogram=np.bincount(successes, minlength=config.pairs + 1),
    )


def _map_blocks(function, jobs, workers):
    """ apply function to each job tuple, in order, optionally on a process pool """
    if workers <= 1 or len(jobs) <= 1:
        return [function(*job) for job in jobs]
    with Pool(min(workers, len(jobs))) as pool:
        pending = [pool.apply_async(function, job) for job in jobs]
        return [result.get() for result in pending]


def _binomial(count, trials):
    p = count / trials
    return Estimate(p, math.sqrt(p * (1.0 - p) / trials))


def _sample_mean(total, sq_total, trials):
    mean = total / trials
    if trials < 2:
        return Estimate(mean, 0.0)
    variance = max(sq_total - trials * mean * mean, 0.0) / (trials - 1)
    return Estimate(mean, math.sqrt(variance / trials))


def run_experiment(config: SystemConfig, strategy, trials, seed, workers=1,
                   auction_config=None) -> OutageReport:
    """
    Outage of one strategy over `trials` independent draws.

    average: mean over trials of the fraction of users in outage;
    best: fraction of trials in which no destination is served;
    worst: fraction of trials in which at least one destination fails.
    """
    _check_strategy(strategy)
    trials = _check_run(trials, seed)

    jobs = [(config, strategy, seed, block, size, auction_config)
            for block, size in enumerate(_block_sizes(trials))]
    tally = _Tally()
    for block_tally in _map_blocks(_run_block, jobs, workers):
        tally.merge(block_tally)

    if tally.auction_failures:
        log_warning(f'{tally.auction_failures} auctions did not converge '
                    f'(snr {config.snr_db:.2f} dB, {trials} trials)')
    report = OutageReport(
        strategy=strategy, trials=trials, seed=seed,
        average=_sample_mean(tally.outage_fraction_sum, tally.outage_fraction_sq_sum, trials),
        best=_binomial(tally.all_outage, trials),
        worst=_binomial(tally.any_outage, trials),
        success=_sample_mean(tally.success_sum, tally.success_sq_sum, trials),
        mean_leftover=tally.leftover_sum / trials,
        auction_failures=tally.auction_failures,
        success_histogram=tally.histogram,
    )
    log_debug(f'{strategy} at {config.snr_db:.2f} dB: average {report.average.value:.4e} '
              f'best {report.best.value:.4e} worst {report.worst.value:.4e}')
    return report


def success_count_distribution(config: SystemConfig, strategy, trials, seed, workers=1,
                               auction_config=None):
    """ empirical Pr(m destinations served), m = 0..M """
    return run_experiment(config, strategy, trials, seed, workers, auction_config).success_distribution()


def _lemma_block(config, seed, block, size):
    draw = sample_channels(substream(seed, block), config, size=size)
    waterfill, _, _ = outage_indicators(config, 'waterfill', draw)
    maxmin, _, _ = outage_indicators(config, 'maxmin', draw)
    return int((waterfill.any(axis=-1) != maxmin.any(axis=-1)).sum())


def lemma_equivalence_check(config: SystemConfig, trials, seed, workers=1):
    """
    Trials in which water filling and max-min disagree on whether some destination
    is in outage. Both serve everybody exactly when sum a/g2 <= P_r, so this is 0.
    """
    trials = _check_run(trials, seed)
    jobs = [(config, seed, block, size) for block, size in enumerate(_block_sizes(trials))]
    violations = sum(_map_blocks(_lemma_block, jobs, workers))
    if violations:
        log_warning(f'water filling and max-min worst users disagree in {violations} trials')
    return violations


def paired_success_counts(config: SystemConfig, strategies, trials, seed, auction_config=None):
    """ per-trial success counts of several strategies on the same draws """
    for strategy in strategies:
        _check_strategy(strategy)
    trials = _check_run(trials, seed)
    counts = {strategy: [] for strategy in strategies}
    for block, size in enumerate(_block_sizes(trials)):
        draw = sample_channels(substream(seed, block), config, size=size)
        for strategy in strategies:
            outage, _, _ = outage_indicators(config, strategy, draw, auction_config)
            counts[strategy].append(config.pairs - outage.sum(axis=-1))
    return {strategy: np.concatenate(blocks) for strategy, blocks in counts.items()}
