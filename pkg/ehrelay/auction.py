"""
Power auction among the destinations whose sources the relay decoded.

Users bid b_i, the relay hands out P_ri = b_i / (sum_j b_j + xi) * P_r and charges
pi * P_ri. A user's payoff is (1/2) log2(1 + P_ri g2_i) - pi P_ri, maximised at the
target power T_i = 1/(2 ln2 pi) - 1/g2_i, which gives the best response

    BR_i(b_-i) = T_i / (P_r - T_i) * (sum_{j != i} b_j + xi)

(0 when T_i <= 0, capped at MAX_BID when T_i >= P_r). With rho_i = T_i/(P_r - T_i)
the joint map is a contraction with modulus mu = sqrt(N) ||rho||_2 + max rho whenever
mu < 1, so synchronous best-response iteration converges to the unique equilibrium.

At an equilibrium every interior user wins exactly T_i whatever xi is, so the price
only sets the water level 1/(2 ln2 pi) of a rate-maximising water filling. The default
clearing price puts that level where the interior targets add up to a fixed share of
P_r. The contraction bound no longer holds there, but the linear iteration still
converges: its Perron root solves sum_i rho_i/(lambda + rho_i) = 1, which is below one
exactly when sum_i T_i < P_r, and the negative roots stay above -1 for the same reason.

The core routines take arrays shaped (instances, users) plus an `active` mask so the
Monte Carlo engine can run a whole block of trials at once; the scalar operations are
thin wrappers over a batch of one.
"""
import math

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError
from .logs import log_debug, log_warning
from .strategies import PowerAllocation


LN2 = math.log(2.0)
MAX_BID = 1e12  # stands in for an unbounded bid
DEFAULT_RESERVE_FRACTION = 0.01
DEFAULT_MARGIN = 0.05
DEFAULT_FILL = 0.95
DEFAULT_TOLERANCE = 1e-9
DEFAULT_MAX_ITERATIONS = 1000
PRICE_POLICIES = ('clearing', 'contraction')
PRICE_BISECTIONS = 100


@dataclass(frozen=True)
class AuctionConfig:
    price: float = None               # None: chosen by `policy`
    policy: str = 'clearing'          # clearing_price with `fill`, or select_price with `margin`
    fill: float = DEFAULT_FILL
    reserve: float = None             # xi; None: reserve_fraction * P_r
    reserve_fraction: float = DEFAULT_RESERVE_FRACTION
    margin: float = DEFAULT_MARGIN
    tolerance: float = DEFAULT_TOLERANCE
    max_iterations: int = DEFAULT_MAX_ITERATIONS

    def __post_init__(self):
        if self.price is not None and not self.price > 0:
            raise ConfigError(f'auction price must be positive, got {self.price}')
        if self.reserve is not None and not self.reserve > 0:
            raise ConfigError(f'auction reserve xi must be positive, got {self.reserve}')
        if not self.reserve_fraction > 0:
            raise ConfigError(f'reserve_fraction must be positive, got {self.reserve_fraction}')
        if self.policy not in PRICE_POLICIES:
            raise ConfigError(f'unknown price policy {self.policy!r}; choose from {", ".join(PRICE_POLICIES)}')
        if not 0 < self.fill < 1:
            raise ConfigError(f'price fill must lie strictly between 0 and 1, got {self.fill}')
        if not self.margin >= 0:
            raise ConfigError(f'price margin must be nonnegative, got {self.margin}')
        if not self.tolerance > 0:
            raise ConfigError(f'auction tolerance must be positive, got {self.tolerance}')
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ConfigError(f'max_iterations must be a positive integer, got {self.max_iterations}')


@dataclass(frozen=True)
class AuctionState:
    bids: np.ndarray
    power: np.ndarray        # allocation attached to the final bids
    price: np.ndarray
    reserve: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    residual: np.ndarray     # last max |b^k - b^{k-1}|

    def leftover(self, total_power):
        return total_power - self.power.sum(axis=-1)


# per-user quantities
#
#
def target_power(price, g2):
    """ T_i = 1/(2 ln2 pi) - 1/g2_i, the power at which the marginal payoff is zero """
    return 1.0 / (2.0 * LN2 * price) - 1.0 / g2


def exit_price(g2):
    """ at or above this price user i bids nothing """
    return g2 / (2.0 * LN2)


def threshold_price(g2, total_power):
    """ pi_u,i: below it T_i >= P_r and the user bids without limit """
    return g2 / (2.0 * LN2 * (1.0 + total_power * g2))


def response_ratio(price, g2, total_power):
    """ rho_i = T_i / (P_r - T_i); 0 when priced out, inf when T_i >= P_r """
    target = target_power(np.asarray(price, dtype=float), np.asarray(g2, dtype=float))
    total_power = np.asarray(total_power, dtype=float)
    with np.errstate(divide='ignore', invalid='ignore'):
        ratio = np.where(target <= 0, 0.0,
                         np.where(target >= total_power, np.inf, target / (total_power - target)))
    return ratio


def _expand(value, like):
    """ broadcast a per-instance value against (..., users) arrays """
    return np.expand_dims(np.asarray(value, dtype=float), -1) * np.ones_like(like, dtype=float)


def contraction_modulus_batch(price, g2, active, total_power):
    ratio = np.where(active, response_ratio(_expand(price, g2), g2, _expand(total_power, g2)), 0.0)
    players = active.sum(axis=-1)
    with np.errstate(invalid='ignore'):
        modulus = np.sqrt(players) * np.sqrt((ratio ** 2).sum(axis=-1)) + ratio.max(axis=-1, initial=0.0)
    return np.where(np.isnan(modulus), np.inf, modulus)


def contraction_modulus(price, g2, total_power):
    """ mu = sqrt(N) * ||rho||_2 + max rho for one auction over the gains g2 """
    g2 = np.atleast_1d(np.asarray(g2, dtype=float))
    active = np.ones(g2.shape, dtype=bool)
    return float(contraction_modulus_batch(np.asarray([price]), g2[None, :], active[None, :],
                                           np.asarray([total_power]))[0])


# payoff and best responses
#
#
def allocation_from_bids(bids, total_power, reserve):
    bids = np.asarray(bids, dtype=float)
    denominator = bids.sum(axis=-1) + np.asarray(reserve, dtype=float)
    return bids / np.expand_dims(denominator, -1) * np.expand_dims(total_power, -1)


def payoff(i, bids, price, total_power, g2, reserve):
    """ U_i = (1/2) log2(1 + P_ri g2_i) - pi P_ri under the proportional rule """
    bids = np.asarray(bids, dtype=float)
    if np.any(bids < 0):
        raise DomainError('bids must be nonnegative')
    power = allocation_from_bids(bids, total_power, reserve)[i]
    gain = np.asarray(g2, dtype=float)[i]
    return 0.5 * math.log2(1.0 + power * gain) - price * power


def best_response(i, other_bids, price, total_power, g2, reserve):
    """
    Best response of user i to the others' bids. other_bids excludes user i; g2 is
    user i's gain.
    """
    if not price > 0:
        raise DomainError(f'auction price must be positive, got {price}')
    ratio = float(response_ratio(price, g2, total_power))
    if ratio == 0.0:
        return 0.0
    if math.isinf(ratio):
        return MAX_BID
    return ratio * (float(np.sum(other_bids)) + reserve)


def local_best_response(bid, allocated_power, price, total_power, g2):
    """
    The same response computed from what user i sees itself: its previous bid and the
    power that bid won, rho_i (P_r - P_ri) b_i / P_ri.
    """
    if not price > 0:
        raise DomainError(f'auction price must be positive, got {price}')
    ratio = float(response_ratio(price, g2, total_power))
    if ratio == 0.0 or allocated_power <= 0:
        return 0.0
    if math.isinf(ratio):
        return MAX_BID
    return ratio * (total_power - allocated_power) * bid / allocated_power


def best_response_map(bids, price, total_power, g2, reserve, active=None):
    """ all best responses at once (the map whose fixed point is the equilibrium) """
    bids = np.asarray(bids, dtype=float)
    g2 = np.asarray(g2, dtype=float)
    if active is None:
        active = np.ones(bids.shape, dtype=bool)
    ratio = response_ratio(_expand(price, g2), g2, _expand(total_power, g2))
    others = np.expand_dims(bids.sum(axis=-1), -1) - bids
    with np.errstate(invalid='ignore'):
        response = np.where(np.isinf(ratio), MAX_BID,
                            ratio * (others + np.expand_dims(np.asarray(reserve, dtype=float), -1)))
    return np.where(active & (ratio > 0), response, 0.0)


# price selection
#
#
def clearing_price_batch(g2, active, total_power, fill=DEFAULT_FILL):
    """
    Price whose water level 1/(2 ln2 pi) makes the positive targets of the active users
    add up to fill * P_r. Instances with no active user, or no budget, get an infinite
    price.
    """
    g2 = np.asarray(g2, dtype=float)
    total_power = np.asarray(total_power, dtype=float)
    with np.errstate(divide='ignore'):
        floors = np.sort(np.where(active, 1.0 / g2, np.inf), axis=-1)
    finite = np.isfinite(floors)
    sums = np.cumsum(np.where(finite, floors, 0.0), axis=-1)
    counts = np.arange(1, floors.shape[-1] + 1)
    levels = (np.expand_dims(fill * total_power, -1) + sums) / counts
    # the users under the water are a prefix of the sorted floors
    served = (finite & (floors < levels)).sum(axis=-1)
    level = np.take_along_axis(levels, np.maximum(served - 1, 0)[..., None], axis=-1)[..., 0]
    with np.errstate(divide='ignore'):
        return np.where(served > 0, 1.0 / (2.0 * LN2 * level), np.inf)


def clearing_price(g2, total_power, fill=DEFAULT_FILL):
    g2 = np.atleast_1d(np.asarray(g2, dtype=float))
    if g2.size == 0:
        raise DomainError('price selection needs at least one decoded user')
    active = np.ones(g2.shape, dtype=bool)
    return float(clearing_price_batch(g2[None, :], active[None, :], np.asarray([total_power]),
                                      fill)[0])


def select_price_batch(g2, active, total_power, margin=DEFAULT_MARGIN):
    """
    Smallest price with contraction modulus below one, found by bisection on a log
    scale between min pi_u and max g2/(2 ln2), scaled by (1 + margin). Instances with
    no active user get an infinite price.
    """
    g2 = np.asarray(g2, dtype=float)
    total_power = np.asarray(total_power, dtype=float)
    has_players = active.any(axis=-1)
    with np.errstate(divide='ignore', invalid='ignore'):
        low = np.where(active, threshold_price(g2, _expand(total_power, g2)), np.inf).min(axis=-1)
        high = np.where(active, exit_price(g2), 0.0).max(axis=-1)
    low = np.where(has_players, low, 1.0)
    high = np.where(has_players, high, 1.0)

    for _ in range(PRICE_BISECTIONS):
        middle = np.sqrt(low * high)
        contracting = contraction_modulus_batch(middle, g2, active, total_power) < 1.0
        high = np.where(contracting, middle, high)
        low = np.where(contracting, low, middle)
    return np.where(has_players, high * (1.0 + margin), np.inf)


def select_price(g2, total_power, margin=DEFAULT_MARGIN):
    g2 = np.atleast_1d(np.asarray(g2, dtype=float))
    if g2.size == 0:
        raise DomainError('price selection needs at least one decoded user')
    active = np.ones(g2.shape, dtype=bool)
    return float(select_price_batch(g2[None, :], active[None, :], np.asarray([total_power]),
                                    margin)[0])


# best-response dynamics
#
#
def run_auction_batch(g2, active, total_power, config: AuctionConfig = AuctionConfig()):
    """
    Synchronous best-response iteration for a batch of independent auctions.

    Every instance starts from unit bids for its active users and stops once
    max |b^k - b^{k-1}| <= tolerance * max(1, max |b^k|); converged instances are frozen,
    so a batch gives exactly what running each instance alone would.
    """
    g2 = np.asarray(g2, dtype=float)
    total_power = np.asarray(total_power, dtype=float)
    active = active & np.expand_dims(total_power > 0, -1)
    instances = g2.shape[0]

    if config.price is not None:
        price = np.full(instances, float(config.price))
    elif config.policy == 'clearing':
        price = clearing_price_batch(g2, active, total_power, config.fill)
    else:
        price = select_price_batch(g2, active, total_power, config.margin)
    if config.reserve is None:
        reserve = config.reserve_fraction * total_power
    else:
        reserve = np.full(instances, float(config.reserve))
    # instances without players never iterate
    reserve = np.where(reserve > 0, reserve, 1.0)

    bids = np.where(active, 1.0, 0.0)
    iterations = np.zeros(instances, dtype=int)
    residual = np.zeros(instances)
    converged = ~active.any(axis=-1)
    pending = np.flatnonzero(~converged)

    for iteration in range(1, config.max_iterations + 1):
        if pending.size == 0:
            break
        current = bids[pending]
        updated = best_response_map(current, price[pending], total_power[pending], g2[pending],
                                    reserve[pending], active[pending])
        step = np.abs(updated - current).max(axis=-1)
        scale = np.maximum(1.0, np.abs(updated).max(axis=-1))
        bids[pending] = updated
        residual[pending] = step
        iterations[pending] = iteration
        done = step <= config.tolerance * scale
        converged[pending[done]] = True
        pending = pending[~done]

    failures = int((~converged).sum())
    if failures:
        log_warning(f'{failures} of {instances} auctions did not converge within '
                    f'{config.max_iterations} iterations')
    log_debug(f'auction batch: {instances} instances, max iterations {iterations.max(initial=0)}')

    power = np.where(active, allocation_from_bids(bids, total_power, reserve), 0.0)
    return AuctionState(bids=bids, power=power, price=price, reserve=reserve,
                        iterations=iterations, converged=converged, residual=residual)


def run_auction(g2, total_power, config: AuctionConfig = AuctionConfig()):
    """ one auction among the decoded users with gains g2 and relay budget P_r """
    g2 = np.atleast_1d(np.asarray(g2, dtype=float))
    if g2.size == 0:
        raise DomainError('an auction needs at least one decoded user')
    state = run_auction_batch(g2[None, :], np.ones((1, g2.size), dtype=bool),
                              np.asarray([float(total_power)]), config)
    return AuctionState(bids=state.bids[0], power=state.power[0], price=float(state.price[0]),
                        reserve=float(state.reserve[0]), iterations=int(state.iterations[0]),
                        converged=bool(state.converged[0]), residual=float(state.residual[0]))


def allocate_auction(draw, state, params, config: AuctionConfig = AuctionConfig()):
    """ auction as a relay strategy over a (trials, M) block; returns the allocation and the auction """
    g2 = np.atleast_2d(draw.g2)
    decoded = np.atleast_2d(state.decoded)
    total_power = np.atleast_1d(state.total_power)
    auction = run_auction_batch(g2, decoded, total_power, config)
    power = auction.power.reshape(np.shape(draw.g2))
    leftover = (total_power - auction.power.sum(axis=-1)).reshape(np.shape(state.total_power))
    return PowerAllocation(power=power, leftover=leftover), auction
