"""Special-function kernel.

Gamma and incomplete gamma, Bessel J/I/K, Airy Ai/Ai' and zeros, Kummer U,
and generalized hypergeometric series with a reported error estimate.

Gamma, Bessel and Airy values come from the C libraries behind ``math`` and
``scipy.special``; the hypergeometric series, the incomplete gamma (which the
Laplace inverter needs at complex argument), the Airy zeros and Kummer U are
computed here.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import NamedTuple, Sequence

import mpmath
import numpy as np
from scipy import integrate, special

from .errors import CancellationError, ConvergenceError, DomainError, PoleError

UNIT_ROUNDOFF = 2.0 ** -53
_MAX_TERMS = 100_000
_MAX_DPS = 600


def _is_nonpositive_integer(x: float) -> bool:
    return x <= 0 and float(x).is_integer()


# ---------------------------------------------------------------------------
# Gamma family

def gamma(x: float) -> float:
    """Euler gamma function for real ``x``."""
    if _is_nonpositive_integer(x):
        raise PoleError(f"gamma has a pole at {x}")
    return math.gamma(x)


def log_gamma(x: float) -> float:
    """``log|Gamma(x)|``."""
    if _is_nonpositive_integer(x):
        raise PoleError(f"gamma has a pole at {x}")
    return math.lgamma(x)


def gammaincc(a: float, z: complex | float) -> complex | float:
    """Regularized upper incomplete gamma ``Q(a, z) = Gamma(a, z) / Gamma(a)``.

    Works for real ``z >= 0`` and for complex ``z`` off the negative real axis.
    Uses the power series of the lower function when ``|z| < a + 1`` and the
    Legendre continued fraction (modified Lentz) otherwise.
    """
    if not a > 0:
        raise DomainError("gammaincc requires a > 0")
    is_complex = isinstance(z, complex) or np.iscomplexobj(z)
    if not is_complex and z < 0:
        raise DomainError("gammaincc requires z >= 0 for real argument")
    if z == 0:
        return complex(1.0) if is_complex else 1.0
    log = cmath.log if is_complex else math.log
    exp = cmath.exp if is_complex else math.exp
    prefactor = exp(a * log(z) - z - math.lgamma(a))
    if abs(z) < a + 1.0:
        # lower gamma: z^a e^-z / Gamma(a+1) * sum z^n / (a+1)_n
        term = 1.0 / a
        total = term
        for n in range(1, _MAX_TERMS):
            term *= z / (a + n)
            total += term
            if abs(term) < abs(total) * UNIT_ROUNDOFF:
                break
        else:
            raise ConvergenceError("incomplete gamma series did not converge")
        return 1.0 - prefactor * total
    tiny = 1e-300
    b = z + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for n in range(1, _MAX_TERMS):
        an = -n * (n - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 4 * UNIT_ROUNDOFF:
            break
    else:
        raise ConvergenceError("incomplete gamma continued fraction did not converge")
    return prefactor * h


def upper_gamma(b: float, z: complex | float) -> complex | float:
    """Non-regularized upper incomplete gamma ``Gamma(b, z)`` for any real ``b``, ``z != 0``.

    Non-positive ``b`` is reached from ``b + m`` in ``(0, 1]`` (or from
    ``Gamma(0, z) = E1(z)``) through ``Gamma(b, z) = (Gamma(b+1, z) - z^b e^{-z}) / b``.
    """
    if z == 0:
        raise DomainError("upper_gamma needs z != 0")
    is_complex = isinstance(z, complex) or np.iscomplexobj(z)
    if b > 0:
        return gammaincc(b, z) * math.gamma(b)
    log = cmath.log if is_complex else math.log
    exp = cmath.exp if is_complex else math.exp
    m = math.ceil(-b) if not float(b).is_integer() else int(-b)
    top = b + m
    if top == 0:
        value = special.exp1(z)
        value = complex(value) if is_complex else float(value)
    else:
        value = gammaincc(top, z) * math.gamma(top)
    logz = log(z)
    for _ in range(m):
        top -= 1.0
        value = (value - exp(top * logz - z)) / top
    return value


# ---------------------------------------------------------------------------
# Bessel family

def _half_integer_sign(order: float) -> int:
    if order == 0.5:
        return 1
    if order == -0.5:
        return -1
    return 0


def bessel_j(order: float, x: float) -> float:
    """Bessel function of the first kind ``J_order(x)``, ``x >= 0``."""
    if x < 0:
        raise DomainError("bessel_j requires x >= 0")
    half = _half_integer_sign(order)
    if half and x > 0:
        root = math.sqrt(2.0 / (math.pi * x))
        return root * (math.sin(x) if half > 0 else math.cos(x))
    return float(special.jv(order, x))


def bessel_i(order: float, x: float, scaled: bool = False) -> float:
    """Modified Bessel ``I_order(x)``; ``scaled`` multiplies by ``exp(-x)``."""
    if x < 0:
        raise DomainError("bessel_i requires x >= 0")
    half = _half_integer_sign(order)
    if half and x > 0:
        root = math.sqrt(2.0 / (math.pi * x))
        if scaled:
            # sinh(x) e^-x = (1 - e^-2x)/2, cosh(x) e^-x = (1 + e^-2x)/2
            e2 = math.exp(-2.0 * x)
            return root * 0.5 * ((1.0 - e2) if half > 0 else (1.0 + e2)) if half < 0 or x > 1e-3 \
                else root * math.sinh(x) * math.exp(-x)
        return root * (math.sinh(x) if half > 0 else math.cosh(x))
    if scaled:
        return float(special.ive(order, x))
    return float(special.iv(order, x))


def bessel_k(order: float, x: float) -> float:
    """Modified Bessel ``K_order(x)``, ``x > 0``."""
    if x <= 0:
        raise DomainError("bessel_k requires x > 0")
    if abs(order) == 0.5:
        return math.sqrt(math.pi / (2.0 * x)) * math.exp(-x)
    return float(special.kv(order, x))


# ---------------------------------------------------------------------------
# Airy family

def airy_ai(x):
    """Airy function ``Ai(x)``."""
    return special.airy(x)[0]


def airy_aip(x):
    """Derivative ``Ai'(x)``."""
    return special.airy(x)[1]


def airy_zero(k: int) -> float:
    """Magnitude of the ``k``-th (0-based) zero of ``Ai``, i.e. ``Ai(-airy_zero(k)) = 0``."""
    if k < 0 or int(k) != k:
        raise DomainError("airy_zero needs a non-negative integer index")
    t = 3.0 * math.pi / 8.0 * (4 * k + 3)
    z = t ** (2.0 / 3.0) * (1.0 + 5.0 / 48.0 * t ** -2 - 5.0 / 36.0 * t ** -4
                            + 77125.0 / 82944.0 * t ** -6)
    for _ in range(50):
        ai, aip, _, _ = special.airy(-z)
        # d/dz Ai(-z) = -Ai'(-z)
        step = ai / aip
        z += step
        if abs(step) < 1e-15 * z:
            break
    else:
        raise ConvergenceError(f"Newton iteration for airy_zero({k}) stalled")
    return z


# ---------------------------------------------------------------------------
# Generalized hypergeometric series

@dataclass(frozen=True)
class AccuracyDomain:
    """Region in which series results are certified, and the accuracy achieved.

    ``max_abs_argument`` bounds ``|z|``; beyond it an evaluation is refused.
    ``achieved_rel_err_estimate`` is filled in on every returned result.
    """

    max_abs_argument: float = 100.0
    target_rel_err: float = 1e-9
    achieved_rel_err_estimate: float = 0.0

    def __post_init__(self):
        if not self.target_rel_err > 0:
            raise ValueError("target_rel_err must be positive")


DEFAULT_DOMAIN = AccuracyDomain()


class HypResult(NamedTuple):
    value: float
    err_estimate: float
    accuracy: AccuracyDomain

    @property
    def rel_err(self) -> float:
        return self.err_estimate / abs(self.value) if self.value else math.inf


def _check_parameters(upper: Sequence[float], lower: Sequence[float]) -> None:
    for b in lower:
        if _is_nonpositive_integer(b):
            raise PoleError(f"lower parameter {b} is a non-positive integer")


def _terminating_length(upper: Sequence[float]) -> int | None:
    stops = [int(-a) for a in upper if _is_nonpositive_integer(a)]
    return min(stops) + 1 if stops else None


def _series_double(upper, lower, z, nmax):
    """Kahan-compensated direct series; returns (sum, sum |t_n| weights, last term, last ratio, n)."""
    total = 1.0
    comp = 0.0
    term = 1.0
    rounding = 0.0  # sum of (n+1) |t_n|
    ops = len(upper) + len(lower) + 3
    ratio = 0.0
    n = 0
    small_run = 0
    for n in range(nmax):
        num = 1.0
        for a in upper:
            num *= a + n
        den = float(n + 1)
        for b in lower:
            den *= b + n
        ratio = num / den * z
        term *= ratio
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
        rounding += (n + 2) * abs(term)
        if term == 0.0:
            break
        r = abs(ratio)
        if r < 1.0 and abs(term) * r <= (1.0 - r) * UNIT_ROUNDOFF * abs(total):
            small_run += 1
            if small_run >= 2:
                break
        else:
            small_run = 0
    else:
        if nmax >= _MAX_TERMS:
            raise ConvergenceError("hypergeometric series did not converge")
    return total, rounding * ops * UNIT_ROUNDOFF, term, ratio, n


def _to_mpf(value):
    if isinstance(value, Fraction):
        return mpmath.mpf(value.numerator) / value.denominator
    return mpmath.mpf(value)


def hyp_pfq_mp(upper, lower, z, dps: int):
    """Direct series at ``dps`` decimal digits; returns ``(mpf value, absolute error bound)``.

    Exposed so that callers combining several nearly-cancelling series can do
    the combination at the same working precision. Parameters may be given as
    :class:`fractions.Fraction` to avoid binary rounding of values like 5/6.
    """
    _check_parameters([float(a) for a in upper], [float(b) for b in lower])
    stop = _terminating_length([float(a) for a in upper])
    with mpmath.workdps(dps):
        up = [_to_mpf(a) for a in upper]
        lo = [_to_mpf(b) for b in lower]
        zz = mpmath.mpf(z)
        eps = mpmath.mpf(10) ** (-dps)
        total = mpmath.mpf(1)
        term = mpmath.mpf(1)
        abs_sum = mpmath.mpf(1)
        nmax = stop if stop is not None else _MAX_TERMS
        for n in range(nmax):
            num = zz
            for a in up:
                num *= a + n
            den = mpmath.mpf(n + 1)
            for b in lo:
                den *= b + n
            term = term * num / den
            total += term
            abs_sum += abs(term) * (n + 2)
            if term == 0:
                break
            if n > abs(z) and abs(term) < eps * abs(total):
                break
        else:
            if stop is None:
                raise ConvergenceError("hypergeometric series did not converge")
        err = abs_sum * eps * (len(upper) + len(lower) + 3) + 2 * abs(term)
        return total, err


def _sum_at_unit_argument(upper, lower, target):
    """``p = q + 1`` series at ``z = 1`` by Richardson extrapolation of partial sums."""
    balance = sum(lower) - sum(upper)
    if not balance > 0:
        raise DomainError("series at z = 1 diverges (parameter balance must be positive)")
    # start beyond the largest parameter so the tail is in its asymptotic regime
    scale = max([abs(x) for x in list(upper) + list(lower)] + [1.0])
    n_base = int(max(64, 16 * scale))
    levels = 5
    n_total = n_base * 2 ** (levels - 1)
    n = np.arange(n_total, dtype=float)
    ratio = np.ones(n_total)
    for a in upper:
        ratio *= a + n
    for b in lower:
        ratio /= b + n
    ratio /= n + 1.0
    log_terms = np.concatenate(([0.0], np.cumsum(np.log(np.abs(ratio[:-1])))))
    signs = np.concatenate(([1.0], np.cumprod(np.sign(ratio[:-1]))))
    terms = signs * np.exp(log_terms)
    ns = [n_base * 2 ** j for j in range(levels)]
    partial = [math.fsum(terms[:m]) for m in ns]
    # S_N = S + c1 N^-s + c2 N^-(s+1) + ...
    def extrapolate(count):
        pts = ns[-count:]
        vals = partial[-count:]
        mat = np.array([[1.0] + [m ** (-(balance + j)) for j in range(count - 1)] for m in pts])
        return float(np.linalg.solve(mat, np.array(vals))[0])

    best = extrapolate(levels)
    prev = extrapolate(levels - 1)
    err = abs(best - prev) + abs(best) * 64 * UNIT_ROUNDOFF
    return best, err


def hyp_pfq(upper: Sequence[float], lower: Sequence[float], z: float,
            domain: AccuracyDomain = DEFAULT_DOMAIN) -> HypResult:
    """Generalized hypergeometric function ``pFq(upper; lower; z)`` for real ``z``.

    Sums the defining series with compensated summation and a running bound on
    rounding and truncation. When that bound exceeds ``domain.target_rel_err``
    the same series is re-summed in multiprecision with enough guard digits to
    cover the observed cancellation. Arguments beyond ``domain.max_abs_argument``
    are refused with :class:`CancellationError`.

    Returns ``HypResult(value, err_estimate, accuracy)``; unpacks as a 3-tuple.
    """
    upper = [float(a) for a in upper]
    lower = [float(b) for b in lower]
    z = float(z)
    _check_parameters(upper, lower)
    p, q = len(upper), len(lower)

    def result(value, err):
        err = max(err, UNIT_ROUNDOFF * abs(value))
        rel = err / abs(value) if value else math.inf
        return HypResult(value, err, replace(domain, achieved_rel_err_estimate=rel))

    if z == 0.0:
        return result(1.0, 0.0)
    stop = _terminating_length(upper)
    if stop is None:
        if p > q + 1:
            raise DomainError("pFq with p > q + 1 diverges for z != 0")
        if p == q + 1:
            if abs(z) > 1:
                raise DomainError("p = q + 1 series requires |z| <= 1")
            if abs(z) == 1:
                if z != 1.0:
                    raise DomainError("only z = 1 is supported on the unit circle")
                value, err = _sum_at_unit_argument(upper, lower, domain.target_rel_err)
                if err > domain.target_rel_err * abs(value):
                    raise CancellationError("extrapolated series at z = 1 not certified")
                return result(value, err)
        if abs(z) > domain.max_abs_argument:
            raise CancellationError(
                f"|z| = {abs(z):g} exceeds certified domain {domain.max_abs_argument:g}")

    nmax = stop if stop is not None else _MAX_TERMS
    value, err, last, ratio, _ = _series_double(upper, lower, z, nmax)
    if stop is None and abs(ratio) < 1:
        err += abs(last) * abs(ratio) / (1 - abs(ratio))
    if err <= domain.target_rel_err * abs(value):
        return result(value, err)

    # cancellation: redo with guard digits
    magnitude = err / UNIT_ROUNDOFF
    lost = math.log10(magnitude / abs(value)) if value else math.log10(magnitude) + 30
    dps = int(max(30, lost + 20 - math.log10(domain.target_rel_err)))
    while dps <= _MAX_DPS:
        mp_value, mp_err = hyp_pfq_mp(upper, lower, z, dps)
        value = float(mp_value)
        err = float(mp_err)
        if value != 0 and err <= domain.target_rel_err * abs(value):
            return result(value, err)
        dps *= 2
    raise CancellationError("could not certify hypergeometric series within precision cap")


# ---------------------------------------------------------------------------
# Kummer U

def _kummer_u_positive_a(a: float, b: float, z: float) -> float:
    # U = 1/Gamma(a) int_0^inf e^{-zt} t^{a-1} (1+t)^{b-a-1} dt.  For a < 1 the
    # substitution t = w^{1/a} removes the t^{a-1} singularity:
    # U = 1/Gamma(a+1) int e^{-z w^{1/a}} (1 + w^{1/a})^{b-a-1} dw
    expo = b - a - 1.0
    # past t_max the integrand is below e^-700 of its peak
    t_peak = max(0.0, (a - 1.0 + max(expo, 0.0)) / z)
    t_max = t_peak + 700.0 / z
    t_mid = min(t_max, max(1.0 / z, t_peak))
    if a < 1.0:
        inv = 1.0 / a

        def integrand(w):
            t = w ** inv
            return math.exp(-z * t + expo * math.log1p(t))

        cuts = [0.0, t_mid ** a, t_max ** a]
        norm = math.gamma(a + 1.0)
    else:
        def integrand(t):
            if t == 0.0:
                return 1.0 if a == 1.0 else 0.0
            return math.exp(-z * t + (a - 1.0) * math.log(t) + expo * math.log1p(t))

        cuts = [0.0, t_mid, t_max]
        norm = math.gamma(a)
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi > lo:
            val, _ = integrate.quad(integrand, lo, hi, epsabs=0.0, epsrel=1e-13, limit=400)
            total += val
    return total / norm


def kummer_u(a: float, b: float, z: float) -> float:
    """Confluent hypergeometric function of the second kind ``U(a, b, z)``, ``z > 0``.

    For ``a > 0`` the Laplace-type integral representation is evaluated by
    adaptive Gauss-Kronrod quadrature; smaller ``a`` are reached through the
    three-term recurrence ``U(a-1) + (b-2a-z) U(a) + a(a-b+1) U(a+1) = 0``.
    """
    if not z > 0:
        raise DomainError("kummer_u requires z > 0")
    if a > 0:
        return _kummer_u_positive_a(a, b, z)
    if float(a).is_integer():
        # U(-m, b, z) is a polynomial; shift to a tiny positive offset is not exact, use mpmath
        return float(mpmath.hyperu(a, b, z))
    m = math.ceil(-a)  # steps down from a + m in (0, 1]
    a_top = a + m
    u_next = _kummer_u_positive_a(a_top + 1.0, b, z)
    u_cur = _kummer_u_positive_a(a_top, b, z)
    aa = a_top
    for _ in range(m):
        u_prev = (2 * aa - b + z) * u_cur - aa * (aa - b + 1) * u_next
        u_next, u_cur = u_cur, u_prev
        aa -= 1.0
    return u_cur


def whittaker_w(kappa: float, mu: float, z: float) -> float:
    """Whittaker ``W_{kappa, mu}(z)`` for ``z > 0`` (multiprecision library evaluation)."""
    if not z > 0:
        raise DomainError("whittaker_w requires z > 0")
    return float(mpmath.whitw(kappa, mu, z))
