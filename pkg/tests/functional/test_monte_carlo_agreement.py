"""
Closed forms against the simulator over the SNR grid. Rare events make the empirical
standard error useless, so the band uses the analytic variance plus one count.
"""
import math

import pytest

from ehrelay.analytic import (outage_equal, outage_individual, outage_wf_best, wf_worst_lower,
                              wf_worst_upper_integral)
from ehrelay.engine import lemma_equivalence_check, paired_success_counts, run_experiment
from ehrelay.model import SystemConfig
from ehrelay.sweep import preset_panels


TRIALS = 10 ** 5
GRID_DB = [0.0, 10.0, 20.0, 30.0, 40.0]


def agrees(observed, expected, trials=TRIALS, sigmas=4.0):
    band = sigmas * math.sqrt(expected * (1.0 - expected) / trials) + 1.0 / trials
    return abs(observed - expected) <= band


class TestClosedFormsAgainstSimulation():

    @pytest.mark.parametrize('pairs', [2, 3, 5])
    def test_individual_and_equal(self, pairs):
        for seed, snr_db in enumerate(GRID_DB):
            config = SystemConfig.from_snr_db(pairs=pairs, rate=2.0, snr_db=snr_db)
            for strategy, exact in (('individual', outage_individual(config)),
                                    ('equal', outage_equal(config))):
                report = run_experiment(config, strategy, TRIALS, seed=seed)
                for metric in ('best', 'worst'):
                    assert agrees(report[metric].value, exact[metric].probability), \
                        f'{strategy} {metric} M={pairs} at {snr_db} dB'
                # per-user events within a trial are dependent, use the sample error
                average = report.average
                assert abs(average.value - exact.average.probability) <= 4.0 * average.stderr + 1.0 / TRIALS

    @pytest.mark.parametrize('pairs', [2, 3, 5])
    def test_waterfill_best(self, pairs):
        for seed, snr_db in enumerate(GRID_DB):
            config = SystemConfig.from_snr_db(pairs=pairs, rate=2.0, snr_db=snr_db)
            report = run_experiment(config, 'waterfill', TRIALS, seed=seed)
            assert agrees(report.best.value, outage_wf_best(config).probability)

    @pytest.mark.parametrize('pairs', [3, 5, 10, 20])
    def test_waterfill_worst_between_bounds(self, pairs):
        for seed, snr_db in enumerate(GRID_DB):
            config = SystemConfig.from_snr_db(pairs=pairs, rate=2.0, snr_db=snr_db)
            report = run_experiment(config, 'waterfill', TRIALS, seed=seed)
            lower = wf_worst_lower(config).probability
            upper = wf_worst_upper_integral(config).probability
            margin = 4.0 * math.sqrt(max(upper * (1.0 - lower), 0.0) / TRIALS) + 1.0 / TRIALS
            assert lower - margin <= report.worst.value <= upper + margin

    @pytest.mark.parametrize('pairs, seed', [(2, 21), (5, 22), (20, 23)])
    def test_waterfill_and_maxmin_agree_at_scale(self, pairs, seed):
        config = SystemConfig.from_snr_db(pairs=pairs, rate=1.0, snr_db=15.0)
        assert lemma_equivalence_check(config, 10 ** 6, seed=seed, workers=2) == 0


class TestAuctionOnSuccessPreset():
    """ mean number of destinations served on the twenty-pair path-loss panel """

    PAIRED_TRIALS = 20000

    def counts_at(self, snr_db, seed):
        panel, = preset_panels('fig-success-count')
        counts = paired_success_counts(panel.config.with_snr_db(snr_db), ('equal', 'auction', 'waterfill'),
                                       self.PAIRED_TRIALS, seed=seed)
        return {strategy: values.mean() for strategy, values in counts.items()}

    @pytest.mark.parametrize('snr_db, seed', [(10.0, 31), (15.0, 32), (20.0, 33), (25.0, 34)])
    def test_waterfill_serves_at_least_the_auction(self, snr_db, seed):
        means = self.counts_at(snr_db, seed)
        assert means['waterfill'] >= means['auction']

    def test_auction_beats_equal_sharing_at_low_snr(self):
        low = self.counts_at(10.0, 35)
        assert low['auction'] > low['equal']
        middle = self.counts_at(15.0, 36)
        assert middle['auction'] >= middle['equal'] + 1.0
