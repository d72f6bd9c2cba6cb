"""
Integer-order modified Bessel functions of the second kind.

K_0 and K_1 come from their power series below x = 2 and from Steed's continued
fraction above it; higher orders use the upward recurrence
K_{n+1}(x) = K_{n-1}(x) + (2n/x) K_n(x), which is stable for K because the terms grow.

The outage formulas only ever need x^n K_n(x) or 2 z^{n/2} K_n(2 sqrt(z)), so those are
provided directly through a scaled recurrence that cannot overflow for small arguments.
"""
import math

from .errors import DomainError


EULER_GAMMA = 0.5772156649015329
MAX_ORDER = 64
SERIES_CUTOFF = 2.0
_SERIES_MAX_TERMS = 60
_CF2_MAX_ITERATIONS = 10000
_EPS = 1e-16


def _check_order(n, minimum=0):
    if isinstance(n, bool) or int(n) != n:
        raise DomainError(f'Bessel order must be an integer, got {n}')
    n = int(n)
    if n < minimum:
        raise DomainError(f'Bessel order must be >= {minimum}, got {n}')
    if n > MAX_ORDER:
        raise DomainError(f'Bessel order must be <= {MAX_ORDER}, got {n}')
    return n


def _k0_k1_series(x):
    t = 0.25 * x * x
    log_half = math.log(0.5 * x)

    i0 = 0.0
    i1 = 0.0
    k0_tail = 0.0   # sum_{k>=1} H_k t^k / (k!)^2
    k1_tail = 0.0   # sum_{k>=0} (psi(k+1) + psi(k+2)) t^k / (k! (k+1)!)
    harmonic = 0.0
    term0 = 1.0     # t^k / (k!)^2
    term1 = 1.0     # t^k / (k! (k+1)!)
    for k in range(_SERIES_MAX_TERMS):
        if k > 0:
            harmonic += 1.0 / k
            term0 *= t / (k * k)
            term1 *= t / (k * (k + 1))
        i0 += term0
        i1 += term1
        k0_tail += harmonic * term0
        psi_sum = (harmonic - EULER_GAMMA) + (harmonic + 1.0 / (k + 1) - EULER_GAMMA)
        k1_tail += psi_sum * term1
        if term0 < _EPS * i0 and term1 < _EPS * i1:
            break

    i1 *= 0.5 * x
    k0 = -(log_half + EULER_GAMMA) * i0 + k0_tail
    k1 = 1.0 / x + log_half * i1 - 0.25 * x * k1_tail
    return k0, k1


def _k0_k1_continued_fraction(x):
    """ Steed's method for the second continued fraction, order 0 and 1 """
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = delh = d
    q1 = 0.0
    q2 = 1.0
    a1 = 0.25
    q = c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, _CF2_MAX_ITERATIONS):
        a -= 2 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1 = q2
        q2 = qnew
        q += c * qnew
        b += 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if abs(dels / s) < _EPS:
            break
    else:
        raise DomainError(f'continued fraction for K_0({x}) did not converge')
    h = a1 * h
    k0 = math.sqrt(math.pi / (2.0 * x)) * math.exp(-x) / s
    k1 = k0 * (x + 0.5 - h) / x
    return k0, k1


def k0_k1(x):
    """ returns (K_0(x), K_1(x)) for x > 0 """
    if not x > 0:
        raise DomainError(f'Bessel K argument must be positive, got {x}')
    if x < SERIES_CUTOFF:
        return _k0_k1_series(x)
    return _k0_k1_continued_fraction(x)


def bessel_k(n, x):
    """
    K_n(x) for integer 0 <= n <= 64 and x > 0.

    Underflows to 0.0 for very large x and overflows to inf for large orders at tiny x;
    use bessel_xk or bessel_kernel when the product with a power of x is what is needed.
    """
    n = _check_order(n)
    x = float(x)
    k_prev, k_cur = k0_k1(x)
    if n == 0:
        return k_prev
    for k in range(1, n):
        k_prev, k_cur = k_cur, k_prev + (2.0 * k / x) * k_cur
    return k_cur


def bessel_xk(n, x):
    """
    x^n K_n(x), through y_{k+1} = x^2 y_{k-1} + 2k y_k with y_k = x^k K_k(x).

    At x = 0 the value is the limit 2^{n-1} (n-1)! for n >= 1.
    """
    n = _check_order(n)
    x = float(x)
    if x < 0:
        raise DomainError(f'Bessel K argument must be nonnegative, got {x}')
    if x == 0.0:
        if n == 0:
            raise DomainError('K_0 is unbounded at 0')
        return 2.0 ** (n - 1) * math.factorial(n - 1)
    k0, k1 = k0_k1(x)
    if n == 0:
        return k0
    x2 = x * x
    y_prev, y_cur = k0, x * k1
    for k in range(1, n):
        y_prev, y_cur = y_cur, x2 * y_prev + 2.0 * k * y_cur
    return y_cur


def bessel_kernel(n, z):
    """
    2 z^{n/2} K_n(2 sqrt(z)), which equals the integral of w^{n-1} exp(-w - z/w) over w > 0.

    Every Bessel term of the outage expressions has this shape. The value at z = 0 is
    the limit (n-1)!.
    """
    n = _check_order(n)
    z = float(z)
    if z < 0:
        raise DomainError(f'kernel argument must be nonnegative, got {z}')
    if z == 0.0:
        if n == 0:
            raise DomainError('kernel of order 0 is unbounded at 0')
        return float(math.factorial(n - 1))
    x = 2.0 * math.sqrt(z)
    return 2.0 ** (1 - n) * bessel_xk(n, x)


def xk_small_arg(n, x):
    """
    Truncated small-argument expansion of x^n K_n(x).

    n = 1: 1 + (x^2/2) ln(x/2)
    n >= 2: (1/2) sum_{l<n} (-1)^l (n-l-1)!/l! x^{2l} / 2^{2l-n} + x^{2n} q(ln x),
            q(ln x) = (-1)^{n+1} ln(x/2) / (2^n n!)
    """
    n = _check_order(n, minimum=1)
    x = float(x)
    if not x > 0:
        raise DomainError(f'expansion argument must be positive, got {x}')
    log_half = math.log(0.5 * x)
    if n == 1:
        return 1.0 + 0.5 * x * x * log_half
    polynomial = 0.0
    for l in range(n):
        polynomial += ((-1) ** l * math.factorial(n - l - 1) / math.factorial(l)
                       * x ** (2 * l) / 2.0 ** (2 * l - n))
    q = (-1) ** (n + 1) * log_half / (2.0 ** n * math.factorial(n))
    return 0.5 * polynomial + x ** (2 * n) * q
