"""
Relay power allocation policies.

Each policy maps a channel draw and the harvest it produced to per-destination relay
powers. Inputs broadcast over leading axes (see ehrelay.model); the auction policy
lives in ehrelay.auction because it is iterative.
"""
from dataclasses import dataclass

import numpy as np

from .model import ChannelDraw, DerivedParams, HarvestState


STRATEGY_NAMES = ('individual', 'equal', 'waterfill', 'maxmin', 'auction')

# p*g2 >= a is the success test; a/g2*g2 can land one ulp under a
SUCCESS_RTOL = 1e-12


@dataclass(frozen=True)
class PowerAllocation:
    power: np.ndarray      # P_ri, zero for users outside S2 or left unserved
    leftover: np.ndarray   # power the relay keeps

    def total(self):
        return self.power.sum(axis=-1) + self.leftover


def served(allocation: PowerAllocation, draw: ChannelDraw, state: HarvestState,
           params: DerivedParams):
    """ destinations whose received SNR clears the threshold a """
    return state.decoded & (allocation.power * draw.g2 >= params.a * (1.0 - SUCCESS_RTOL))


def allocate_individual(draw: ChannelDraw, state: HarvestState, params: DerivedParams):
    """ destination i gets exactly what source i's transmission left at the relay """
    return PowerAllocation(power=state.harvested.copy(),
                           leftover=np.zeros_like(state.total_power))


def allocate_equal(state: HarvestState):
    n = state.n
    with np.errstate(divide='ignore', invalid='ignore'):
        share = np.where(n > 0, state.total_power / np.maximum(n, 1), 0.0)
    power = np.where(state.decoded, np.expand_dims(share, -1), 0.0)
    return PowerAllocation(power=power, leftover=np.zeros_like(state.total_power))


def required_power(draw: ChannelDraw, state: HarvestState, params: DerivedParams):
    """ a/g2 for decoded users, inf for the rest """
    with np.errstate(divide='ignore'):
        return np.where(state.decoded, params.a / draw.g2, np.inf)


def allocate_waterfill(draw: ChannelDraw, state: HarvestState, params: DerivedParams):
    """
    Sequential water filling: serve decoded destinations strongest channel first with
    exactly the power they need, stop at the first one the remaining budget cannot
    cover. Equal gains are served in ascending user index.
    """
    required = required_power(draw, state, params)
    order = np.argsort(required, axis=-1, kind='stable')
    sorted_required = np.take_along_axis(required, order, axis=-1)
    spent = np.cumsum(sorted_required, axis=-1)
    # requirements ascend, so the affordable set is a prefix
    affordable = spent <= np.expand_dims(state.total_power, -1)

    is_served = np.zeros(required.shape, dtype=bool)
    np.put_along_axis(is_served, order, affordable, axis=-1)
    power = np.where(is_served, required, 0.0)
    return PowerAllocation(power=power, leftover=state.total_power - power.sum(axis=-1))


def maxmin_common_rate(draw: ChannelDraw, state: HarvestState):
    """ t = (1/2) log2(1 + P_r / sum_{S2} 1/g2); zero when nothing was decoded """
    inverse_gain_sum = _inverse_gain_sum(draw, state)
    with np.errstate(divide='ignore', invalid='ignore'):
        snr = np.where(inverse_gain_sum > 0, state.total_power / inverse_gain_sum, 0.0)
    return 0.5 * np.log2(1.0 + snr)


def allocate_maxmin(draw: ChannelDraw, state: HarvestState, params: DerivedParams):
    """
    Closed-form max-min (KKT) allocation: every decoded destination reaches the same
    rate t, with P_ri = (2^{2t} - 1)/g2_i and the whole budget spent.
    """
    inverse_gain_sum = _inverse_gain_sum(draw, state)
    with np.errstate(divide='ignore', invalid='ignore'):
        # 2^{2t} - 1 without the log/exp round trip
        common_snr = np.where(inverse_gain_sum > 0, state.total_power / inverse_gain_sum, 0.0)
        power = np.where(state.decoded, np.expand_dims(common_snr, -1) / draw.g2, 0.0)
    return PowerAllocation(power=power, leftover=np.zeros_like(state.total_power))


def _inverse_gain_sum(draw, state):
    with np.errstate(divide='ignore'):
        return np.where(state.decoded, 1.0 / draw.g2, 0.0).sum(axis=-1)
