"""
Closed-form outage probabilities, bounds and high-SNR asymptotics.

Everything here assumes unit-mean Rayleigh links (the regime the closed forms were
derived for) and raises AnalyticError otherwise. With eps = (2^{2R} - 1)/P_s:

  - a source is decoded with probability e^{-eps}, and given decoding its excess
    h2 - eps is Exp(1), so the relay budget over n decoded sources is eta P_s W with
    W ~ Gamma(n, 1);
  - every Bessel term is E[exp(-z/W)] (n-1)! = bessel_kernel(n, z).
"""
import math

from dataclasses import dataclass

import numpy as np

from scipy import integrate, stats

from .errors import AnalyticError, DomainError, QuadratureError
from .logs import log_debug, log_warning
from .model import SystemConfig, derive_params
from .specfun import bessel_kernel


METRICS = ('average', 'best', 'worst')
METHODS = ('exact', 'bound-lower', 'bound-upper-integral', 'bound-upper-closed',
           'asymptotic', 'asymptotic-lower', 'asymptotic-upper')

LOG_SPACE_PAIRS = 15
ASYMPTOTIC_REGIME = 0.05  # eps above this is outside the high-SNR regime
QUAD_RTOL = 1e-8
QUAD_ATOL = 1e-13
QUAD_LIMIT = 200
# an alternating sum keeping fewer digits than this falls back to quadrature
CANCELLATION_DIGITS = 9
KERNEL_NEGLIGIBLE = 1e6


@dataclass(frozen=True)
class OutageValue:
    probability: float
    metric: str
    strategy: str
    method: str
    warning: bool = False  # asymptotic evaluated outside its regime

    def __post_init__(self):
        if not -1e-12 <= self.probability <= 1.0 + 1e-12:
            raise DomainError(f'outage probability {self.probability} outside [0, 1] '
                              f'({self.strategy} {self.metric} {self.method})')
        object.__setattr__(self, 'probability', min(max(float(self.probability), 0.0), 1.0))
        if self.metric not in METRICS:
            raise DomainError(f'unknown metric {self.metric}')
        if self.method not in METHODS:
            raise DomainError(f'unknown method {self.method}')


@dataclass(frozen=True)
class OutageSet:
    average: OutageValue
    best: OutageValue
    worst: OutageValue

    def __getitem__(self, metric):
        return getattr(self, metric)


@dataclass(frozen=True)
class WorstUserBounds:
    lower: OutageValue
    upper_integral: OutageValue
    upper_closed: OutageValue


def _require_unit_variances(config: SystemConfig):
    if not config.has_unit_variances:
        raise AnalyticError('closed-form outage needs unit channel variances; '
                            'use the Monte Carlo engine for path-loss configurations')


def _quad(function, lower, upper, what, **kwargs):
    """ scipy quad with the package tolerances; large error estimates raise, moderate ones warn """
    value, error = integrate.quad(function, lower, upper, epsabs=QUAD_ATOL, epsrel=QUAD_RTOL,
                                  limit=QUAD_LIMIT, **kwargs)
    target = max(QUAD_ATOL, QUAD_RTOL * abs(value))
    if error > 1e4 * target:
        raise QuadratureError(f'{what} did not reach the target tolerance', error)
    if error > target:
        log_warning(f'{what}: quadrature error estimate {error:.3e} above target {target:.3e}')
    return value


# distributional building blocks
#
#
def prob_decoding_count(pairs, epsilon, n):
    """ Pr(N = n): binomial over the M sources with success probability e^{-eps} """
    if not 0 <= n <= pairs:
        raise DomainError(f'decoding count {n} outside [0, {pairs}]')
    if epsilon < 0:
        raise DomainError(f'epsilon must be nonnegative, got {epsilon}')
    failures = pairs - n
    miss = -math.expm1(-epsilon)
    if failures and miss == 0.0:
        return 0.0
    if pairs > LOG_SPACE_PAIRS:
        log_choose = math.lgamma(pairs + 1) - math.lgamma(n + 1) - math.lgamma(failures + 1)
        log_miss = failures * math.log(miss) if failures else 0.0
        return math.exp(log_choose - n * epsilon + log_miss)
    return math.comb(pairs, n) * math.exp(-n * epsilon) * miss ** failures


def conditioned_sum_pdf(n, epsilon, y):
    """ density of the sum of n decoded |h|^2 values: Gamma(n, 1) shifted by n eps """
    if n < 1:
        raise DomainError(f'conditioned sum needs n >= 1, got {n}')
    return stats.gamma.pdf(y, n, loc=n * epsilon)


def conditioned_gamma_expectation(n, beta, power):
    """
    E[(1 - exp(-beta/W))^power] for W ~ Gamma(n, 1).

    Expanded binomially this is sum_i C(power, i) (-1)^i kernel(n, i beta)/(n-1)!. The
    alternating sum cancels badly once the answer is small compared to its largest
    term; then the defining integral is evaluated by quadrature instead.
    """
    if n < 1:
        raise DomainError(f'gamma shape must be >= 1, got {n}')
    if beta < 0:
        raise DomainError(f'beta must be nonnegative, got {beta}')
    if power == 0:
        return 1.0
    if beta == 0.0:
        return 0.0

    normalizer = math.factorial(n - 1)
    terms = [math.comb(power, i) * (-1) ** i * bessel_kernel(n, i * beta) / normalizer
             for i in range(power + 1)]
    total = math.fsum(terms)
    largest = max(abs(t) for t in terms)
    if total > 0 and total >= largest * 10.0 ** (CANCELLATION_DIGITS - 16):
        return min(total, 1.0)

    log_debug(f'gamma expectation n={n} beta={beta:.3e} k={power}: sum {total:.3e} '
              f'cancelled, using quadrature')

    def integrand(w):
        return (-math.expm1(-beta / w)) ** power * _gamma_density(w, n)

    # split at the mean so quad sees the bulk of the density
    what = f'E[(1 - exp(-beta/W))^{power}], n={n}'
    return (_quad(integrand, 0.0, float(n), what)
            + _quad(integrand, float(n), np.inf, what))


def _gamma_density(w, n):
    """ Gamma(n, 1) density for scalar w inside quadrature integrands """
    if w <= 0.0:
        return 1.0 if (n == 1 and w == 0.0) else 0.0
    return math.exp((n - 1) * math.log(w) - w - math.lgamma(n))


def _success_given_decoded(n, z):
    """ E[exp(-z/W)], W ~ Gamma(n, 1) """
    return bessel_kernel(n, z) / math.factorial(n - 1)


# exact outage per strategy
#
#
def outage_individual(config: SystemConfig) -> OutageSet:
    """
    Destination i is served by its own source's harvest only:
    average = 1 - e^{-eps} x K_1(x), x = sqrt(4a/(eta P_s)); the M users are
    independent, so best = average^M and worst = 1 - (1 - average)^M.
    """
    _require_unit_variances(config)
    params = derive_params(config)
    eps = params.epsilon
    average = -math.expm1(-eps) + math.exp(-eps) * (1.0 - _success_given_decoded(1, eps / config.eta))
    best = average ** config.pairs
    worst = 1.0 - (1.0 - average) ** config.pairs
    return OutageSet(*(OutageValue(p, metric, 'individual', 'exact')
                       for p, metric in zip((average, best, worst), METRICS)))


def outage_equal(config: SystemConfig) -> OutageSet:
    """
    Equal split of the pool among the n decoded destinations: a decoded destination
    succeeds given W with probability exp(-(n eps/eta)/W).
    """
    _require_unit_variances(config)
    params = derive_params(config)
    eps, eta, pairs = params.epsilon, config.eta, config.pairs
    miss = -math.expm1(-eps)

    # user i decoded and n - 1 of the other M - 1 decoded
    average = miss
    for n in range(1, pairs + 1):
        weight = math.exp(-eps) * prob_decoding_count(pairs - 1, eps, n - 1)
        average += weight * (1.0 - _success_given_decoded(n, n * eps / eta))

    best = miss ** pairs
    for n in range(1, pairs + 1):
        best += prob_decoding_count(pairs, eps, n) * conditioned_gamma_expectation(n, n * eps / eta, n)

    # everyone must be decoded and served
    worst = 1.0 - math.exp(-pairs * eps) * _success_given_decoded(pairs, pairs * pairs * eps / eta)

    log_debug(f'equal outage M={pairs} eps={eps:.3e}: {average:.4e} {best:.4e} {worst:.4e}')
    return OutageSet(*(OutageValue(p, metric, 'equal', 'exact')
                       for p, metric in zip((average, best, worst), METRICS)))


def outage_wf_best(config: SystemConfig) -> OutageValue:
    """
    Water filling serves the strongest decoded destination first with the whole pool,
    so the best user fails only when every decoded g2 < eps/(eta W).
    """
    _require_unit_variances(config)
    params = derive_params(config)
    eps, eta, pairs = params.epsilon, config.eta, config.pairs
    probability = (-math.expm1(-eps)) ** pairs
    for n in range(1, pairs + 1):
        probability += prob_decoding_count(pairs, eps, n) * conditioned_gamma_expectation(n, eps / eta, n)
    return OutageValue(probability, 'best', 'waterfill', 'exact')


# worst-user bounds for water filling (and max-min, which has the same worst user)
#
#
def _a_of_y(y, pairs):
    return (y + 1.0) * ((pairs - 1) ** 2 + y) / y


def _check_bound_args(config, c):
    _require_unit_variances(config)
    if config.pairs < 2:
        raise DomainError('worst-user bounds need at least two pairs')
    if not 0.0 <= c <= config.pairs - 1:
        raise DomainError(f'c must lie in [0, {config.pairs - 1}], got {c}')


def wf_worst_lower(config: SystemConfig) -> OutageValue:
    """ every destination must at least clear eps/(eta W) on its own """
    _check_bound_args(config, 0.0)
    eps, pairs = derive_params(config).epsilon, config.pairs
    probability = 1.0 - math.exp(-pairs * eps) * _success_given_decoded(pairs, pairs * eps / config.eta)
    return OutageValue(probability, 'worst', 'waterfill', 'bound-lower')


def _conditional_upper(w, pairs):
    """
    Pr(z_(M) + (M-1) z_(M-1) > w) for z = 1/g2: with u = w/(y+1) for the largest
    inverse gain the success region integrates to e^{-M^2/w} + (M/w) int_0^{M-1} e^{-a(y)/w} dy.
    """
    if w <= 0.0:
        return 1.0
    inner = _quad(lambda y: math.exp(-_a_of_y(y, pairs) / w), 0.0, pairs - 1.0,
                  'worst-user upper bound, inner integral')
    return -math.expm1(-pairs * pairs / w) - pairs / w * inner


def wf_worst_upper_integral(config: SystemConfig) -> OutageValue:
    """
    Sum of inverse gains bounded by z_(M) + (M-1) z_(M-1); the expectation over the
    normalized pool w = eta W/eps is done by quadrature with w mapped onto (0, 1).
    """
    _check_bound_args(config, 0.0)
    eps, pairs = derive_params(config).epsilon, config.pairs
    scale = config.eta / eps

    def integrand(t):
        gamma_draw = t / (1.0 - t)
        jacobian = 1.0 / (1.0 - t) ** 2
        return (_conditional_upper(scale * gamma_draw, pairs)
                * _gamma_density(gamma_draw, pairs) * jacobian)

    expectation = _quad(integrand, 0.0, 1.0, 'worst-user upper bound, outer integral')
    probability = -math.expm1(-pairs * eps) + math.exp(-pairs * eps) * expectation
    return OutageValue(probability, 'worst', 'waterfill', 'bound-upper-integral')


def wf_worst_upper_closed(config: SystemConfig, c=0.0) -> OutageValue:
    """
    Bessel form of the upper bound with the y-integral restricted to [c, M-1];
    c = 0 gives the integral bound exactly, larger c loosens it.
    """
    _check_bound_args(config, c)
    eps, eta, pairs = derive_params(config).epsilon, config.eta, config.pairs
    base = _success_given_decoded(pairs, pairs * pairs * eps / eta)

    def integrand(y):
        z = _a_of_y(y, pairs) * eps / eta if y > 0 else math.inf
        # e^{-2 sqrt(z)} is far below double precision
        return bessel_kernel(pairs - 1, z) if z < KERNEL_NEGLIGIBLE else 0.0

    tail = _quad(integrand, c, pairs - 1.0, 'worst-user closed upper bound')
    success = base + pairs / math.factorial(pairs - 1) * eps / eta * tail
    probability = 1.0 - math.exp(-pairs * eps) * success
    return OutageValue(probability, 'worst', 'waterfill', 'bound-upper-closed')


def wf_worst_bounds(config: SystemConfig, c=0.0) -> WorstUserBounds:
    return WorstUserBounds(lower=wf_worst_lower(config),
                           upper_integral=wf_worst_upper_integral(config),
                           upper_closed=wf_worst_upper_closed(config, c))


def exact_outage(strategy, metric, config: SystemConfig) -> OutageValue:
    """ the exact closed form for (strategy, metric), where one exists """
    if metric not in METRICS:
        raise DomainError(f'unknown metric {metric}')
    if strategy == 'individual':
        return outage_individual(config)[metric]
    if strategy == 'equal':
        return outage_equal(config)[metric]
    if strategy == 'waterfill' and metric == 'best':
        return outage_wf_best(config)
    raise AnalyticError(f'no exact closed form for {strategy} {metric}')


# high-SNR asymptotics
#
#
def _individual_average_asymptote(eps, eta):
    # eps (1 - (2/eta) ln sqrt(eps/eta))
    return eps * (1.0 - math.log(eps / eta) / eta)


def _best_log_constant(pairs, eta, per_decoded):
    """ sum_n (g(n)/eta)^n M!/((n-1)! n! (M-n)!) with g(n) = n for equal, 1 for water filling """
    total = 0.0
    for n in range(1, pairs + 1):
        share = n if per_decoded else 1
        total += ((share / eta) ** n * math.factorial(pairs)
                  / (math.factorial(n - 1) * math.factorial(n) * math.factorial(pairs - n)))
    return total


def wf_worst_asymptotes(pairs, eps, eta, c=0.0):
    """ (lower, upper) high-SNR values of the worst-user sandwich """
    lower = pairs * eps * (1.0 + 1.0 / (eta * (pairs - 1)))
    upper = eps * (pairs + pairs ** 2 / ((pairs - 1) * eta)
                   - pairs * (pairs - 1 - c) / ((pairs - 1) * eta))
    return lower, upper


def asymptotic_outage(strategy, metric, config: SystemConfig, c=0.0):
    """
    High-SNR approximation for (strategy, metric). Returns a tuple of OutageValue:
    one value, or (lower, upper) for the water-filling / max-min worst user.
    Values are flagged when eps exceeds the high-SNR regime.
    """
    _require_unit_variances(config)
    eps, eta, pairs = derive_params(config).epsilon, config.eta, config.pairs
    warning = eps > ASYMPTOTIC_REGIME
    if warning:
        log_warning(f'asymptotic {strategy} {metric} at eps={eps:.3g} is outside the high-SNR regime')

    if metric not in METRICS:
        raise DomainError(f'unknown metric {metric}')

    if strategy == 'equal' and pairs == 1:
        strategy = 'individual'

    values = None
    if strategy == 'individual':
        single = _individual_average_asymptote(eps, eta)
        values = {'average': single, 'best': single ** pairs,
                  'worst': pairs * single}[metric]
    elif strategy == 'equal':
        if metric == 'average':
            values = (1.0 + pairs / ((pairs - 1) * eta)) * eps
        elif metric == 'worst':
            values = eps * pairs * (1.0 + pairs / (eta * (pairs - 1)))
        else:
            values = eps ** pairs * (1.0 - _best_log_constant(pairs, eta, True) * math.log(eps))
    elif strategy == 'waterfill' and metric == 'best':
        values = eps ** pairs * (1.0 - _best_log_constant(pairs, eta, False) * math.log(eps))
    elif strategy in ('waterfill', 'maxmin') and metric == 'worst':
        if pairs == 1:
            single = _individual_average_asymptote(eps, eta)
            return (OutageValue(min(single, 1.0), metric, strategy, 'asymptotic', warning),)
        lower, upper = wf_worst_asymptotes(pairs, eps, eta, c)
        return (OutageValue(min(lower, 1.0), metric, strategy, 'asymptotic-lower', warning),
                OutageValue(min(upper, 1.0), metric, strategy, 'asymptotic-upper', warning))

    if values is None:
        raise AnalyticError(f'no high-SNR approximation for {strategy} {metric}')
    return (OutageValue(min(values, 1.0), metric, strategy, 'asymptotic', warning),)


def normalized_gap(config: SystemConfig):
    """
    (P_individual - P_equal)/P_equal of the averaged asymptotics; positive means the
    shared pool wins.
    """
    if config.pairs < 2:
        raise DomainError('the gap compares against equal sharing, which needs two pairs')
    individual = asymptotic_outage('individual', 'average', config)[0].probability
    equal = asymptotic_outage('equal', 'average', config)[0].probability
    return (individual - equal) / equal


# order statistics of the inverse gains z = 1/g2
#
#
@dataclass(frozen=True)
class OrderStatDiagnostics:
    pairs: int
    samples: int
    mean_z_second_max: float
    stderr_z_second_max: float
    expected_z_second_max: float
    bound_z_second_max: float        # (M - 1)^2, holds from M = 3 on
    tail_mass_z_max: tuple           # (sample size, sample mean of z_(M)) for growing sizes


def expected_second_largest_inverse_gain(pairs):
    """ E[z_(M-1)] = M (M-1) ln(M/(M-1)) """
    if pairs < 2:
        raise DomainError('the second largest inverse gain needs at least two pairs')
    return pairs * (pairs - 1) * math.log(pairs / (pairs - 1))


def inverse_gain_cdf(z):
    """ F(z) = e^{-1/z} for z = 1/g2 with g2 ~ Exp(1) """
    z = np.asarray(z, dtype=float)
    with np.errstate(divide='ignore'):
        return np.where(z > 0, np.exp(-1.0 / np.where(z > 0, z, 1.0)), 0.0)


def order_stat_diagnostics(pairs, samples, stream: np.random.Generator = None, seed=0):
    """
    Monte Carlo look at the top two order statistics of z = 1/g2: the second largest
    has a finite mean, the largest does not, so its running mean keeps growing.
    """
    if pairs < 2:
        raise DomainError('order statistics diagnostics need at least two pairs')
    if samples < 100:
        raise DomainError(f'need at least 100 samples, got {samples}')
    if stream is None:
        stream = np.random.default_rng(seed)

    z = 1.0 / stream.exponential(size=(int(samples), pairs))
    z.sort(axis=-1)
    second = z[:, -2]
    largest = z[:, -1]
    sizes = []
    size = int(samples)
    while size >= 100 and len(sizes) < 4:
        sizes.append(size)
        size //= 10
    tail = tuple((s, float(largest[:s].mean())) for s in reversed(sizes))

    return OrderStatDiagnostics(
        pairs=pairs, samples=int(samples),
        mean_z_second_max=float(second.mean()),
        stderr_z_second_max=float(second.std(ddof=1) / math.sqrt(samples)),
        expected_z_second_max=expected_second_largest_inverse_gain(pairs),
        bound_z_second_max=float((pairs - 1) ** 2),
        tail_mass_z_max=tail,
    )
