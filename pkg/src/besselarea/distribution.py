"""Area distribution of a Bessel excursion in scaled units.

Everything here is expressed through ``A_hat = A / A0`` and ``s_hat = A0 s``
with ``A0 = sqrt(D) T^{3/2}``; the returned densities are ``A0 * P(A, T)``.

With ``t = s_hat^{2/3}`` the Laplace transform is

    P~(s_hat) = 2^{2a+1} Gamma(a+1) t^{a+1} sum_k d_k^2 exp(-lambda_k t),

and inverting each exponential term by term gives a sum of three ``2F2``
functions per level. Levels beyond the computed spectrum are summed in the
continuum approximation, which reduces to a regularized incomplete gamma.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import mpmath
import numpy as np

from . import specfun
from .errors import (ContourError, DomainError, InsufficientSpectrumError, ModeError,
                     CancellationError)
from .params import ExcursionParams
from .spectrum import SpectralData, dk_asymptotic, lambda_asymptotic

HYP_MIN_A_HAT = 0.3
TERM_CUTOFF = 1e-12
MIN_TERMS = 5
TALBOT_M0 = 48
TALBOT_M_MAX = 384
TALBOT_TOL = 1e-8


class Method(str, enum.Enum):
    HYP_SERIES = "HypSeries"
    AIRY_CLOSED = "AiryClosed"
    TALBOT = "Talbot"
    MC = "MC"


class LevyForm(str, enum.Enum):
    WHITTAKER_W = "WhittakerW"
    KUMMER_U = "KummerU"
    AIRY_FORM = "AiryForm"
    HYP_SERIES = "HypSeries"


# ---------------------------------------------------------------------------
# Laplace transform

def _prefactor(a: float) -> float:
    return 2.0 ** (2 * a + 1) * math.gamma(a + 1)


def _continuum_edge(spectral: SpectralData) -> float:
    """Energy where the discrete sum hands over to the continuum integral.

    Half an asymptotic level spacing above the last computed eigenvalue.
    """
    K = spectral.K
    p = spectral.params
    half_gap = lambda_asymptotic(p, K - 0.5) - lambda_asymptotic(p, K - 1)
    return float(spectral.lambdas[-1]) + half_gap


def _d2_correction(spectral: SpectralData, index: int = -1) -> float:
    """``c`` in ``d_k^2 = d_asym^2 (1 + c lambda^{-3/2})``, read off one computed level."""
    lam = float(spectral.lambdas[index])
    ratio = float(spectral.dks[index]) ** 2 / dk_asymptotic(spectral.params, lam) ** 2
    return (ratio - 1.0) * lam ** 1.5


def _tail_pieces(spectral: SpectralData, t: complex | float):
    """Continuum tail for levels ``k >= K`` and its midpoint-rule correction.

    The level sum is replaced by ``int dlam (sqrt(lam)/pi) d^2(lam) e^{-lam t}``
    from the edge upward with ``d^2`` taken from the large-level law including
    the ``lam^{-3/2}`` correction, which integrates to incomplete gammas.
    """
    a = spectral.a
    edge = _continuum_edge(spectral)
    c = _d2_correction(spectral)
    x = edge * t
    main = specfun.gammaincc(a + 1, x)
    corr = c * t ** 1.5 * specfun.upper_gamma(a - 0.5, x) / math.gamma(a + 1)
    # midpoint Euler-Maclaurin: sum_{k>=K} f(k) = int_{K-1/2} f + f'(K-1/2)/24 + ...
    amp = 2.0 ** (-2 * a - 1) * math.pi / math.gamma(1 + a) ** 2
    d2 = amp * edge ** (a - 0.5) * (1 + c * edge ** -1.5)
    dd2 = amp * ((a - 0.5) * edge ** (a - 1.5) + c * (a - 2) * edge ** (a - 3))
    dlam_dk = math.pi / math.sqrt(edge)
    fprime = _prefactor(a) * t ** (a + 1) * np.exp(-x) * dlam_dk * (dd2 - t * d2)
    return main + corr, fprime / 24.0, c


def _laplace_terms(spectral: SpectralData, t):
    """Discrete part and continuum tail at ``t = s_hat^{2/3}`` (real or complex array)."""
    a = spectral.a
    t = np.asarray(t)
    lam = spectral.lambdas
    d2 = spectral.dks ** 2
    disc = _prefactor(a) * t ** (a + 1) * (np.exp(-np.multiply.outer(t, lam)) @ d2)
    cast = complex if np.iscomplexobj(t) else float
    tail = np.array([_tail_value(spectral, cast(z)) for z in np.ravel(t)]).reshape(t.shape)
    return disc, tail


def _tail_value(spectral: SpectralData, t):
    if t == 0:
        return 1.0
    body, midpoint, _ = _tail_pieces(spectral, t)
    return body + midpoint


def _tail_error(spectral: SpectralData, t: float) -> float:
    """Error estimate for the continuum tail at real ``t > 0``.

    Half the midpoint correction plus the change in the tail when the
    ``lam^{-3/2}`` coefficient is read off a level halfway down the spectrum
    instead of the last one.
    """
    if t == 0:
        return 0.0
    a = spectral.a
    body, midpoint, c = _tail_pieces(spectral, t)
    c_alt = _d2_correction(spectral, spectral.K // 2)
    edge = _continuum_edge(spectral)
    per_c = t ** 1.5 * specfun.upper_gamma(a - 0.5, edge * t) / math.gamma(a + 1)
    return 0.5 * abs(midpoint) + abs(c - c_alt) * abs(per_c)


def laplace_pdf(params: ExcursionParams, spectral: SpectralData, s_hat: float,
                tol: float | None = 1e-6) -> float:
    """Scaled Laplace transform ``P~(s_hat) = E[exp(-s_hat A_hat)]``.

    ``P~(0) = 1`` exactly. The continuum estimate for the levels past
    ``spectral.K`` is added; if its estimated error exceeds ``tol``
    :class:`InsufficientSpectrumError` is raised (``tol=None`` skips the check).
    """
    _check_spectrum(params, spectral)
    if s_hat < 0:
        raise DomainError("s_hat must be non-negative")
    if s_hat == 0:
        return 1.0
    t = s_hat ** (2.0 / 3.0)
    if tol is not None:
        err = _tail_error(spectral, t)
        if err > tol:
            raise InsufficientSpectrumError(
                f"continuum tail error {err:.2e} exceeds tol {tol:.1e} at s_hat={s_hat:g}; "
                "use more levels")
    disc, tail = _laplace_terms(spectral, np.array([t]))
    return float(disc[0] + tail[0])


def laplace_expansion_at_zero(params: ExcursionParams, spectral: SpectralData,
                              h_min: float = 0.05, h_max: float = 0.4, n: int = 15,
                              degree: int = 6) -> tuple[float, float]:
    """``(P~(0), -dP~/ds_hat(0))`` extrapolated from ``P~`` on ``[h_min, h_max]``.

    ``P~`` is entire in ``s_hat`` (the area has a Gaussian tail), so a
    least-squares polynomial of degree ``degree + 1`` through ``n`` values
    pins down the first two Taylor coefficients. Neither number uses the
    exact value at 0; points closer to zero are avoided because the continuum
    tail dominates there.
    """
    hs = np.linspace(h_min, h_max, n)
    values = np.array([laplace_pdf(params, spectral, h, tol=None) for h in hs])
    coef = np.polynomial.polynomial.polyfit(hs, values, degree + 1)
    return float(coef[0]), float(-coef[1])


def laplace_slope_at_zero(params: ExcursionParams, spectral: SpectralData,
                          h_min: float = 0.05, h_max: float = 0.4, n: int = 15,
                          degree: int = 6) -> float:
    """``-dP~/ds_hat`` at 0, i.e. the scaled mean area, from the transform alone.

    Uses the exact ``P~(0) = 1``: the quotient ``(P~(h) - 1)/h`` is smooth in
    ``h`` and a least-squares polynomial through ``n`` values on
    ``[h_min, h_max]`` is extrapolated to ``h = 0``.
    """
    hs = np.linspace(h_min, h_max, n)
    quotients = np.array([(laplace_pdf(params, spectral, h, tol=None) - 1.0) / h for h in hs])
    coef = np.polynomial.polynomial.polyfit(hs, quotients, degree)
    return float(-coef[0])


def _laplace_complex(spectral: SpectralData, s: np.ndarray) -> np.ndarray:
    """Unchecked transform at complex ``s`` (principal branch of ``s^{2/3}``)."""
    t = np.asarray(s, dtype=complex) ** (2.0 / 3.0)
    disc, tail = _laplace_terms(spectral, t)
    return disc + tail


def _check_spectrum(params: ExcursionParams, spectral: SpectralData) -> None:
    if abs(spectral.a - params.a) > 1e-14:
        raise ModeError("spectral data were computed for a different |alpha| / boundary mode")


# ---------------------------------------------------------------------------
# Real-space series

def _three_term_coefficients(v: float):
    """Gamma-sine weights and 2F2 parameters of the three series, for ``nu = v``."""
    return (
        (math.gamma(5 / 3 + v) * math.sin(math.pi * (2 + 3 * v) / 3),
         (4 / 3 + v / 2, 5 / 6 + v / 2), (1 / 3, 2 / 3)),
        (-math.gamma(7 / 3 + v) * math.sin(math.pi * (4 + 3 * v) / 3),
         (7 / 6 + v / 2, 5 / 3 + v / 2), (2 / 3, 4 / 3)),
        (0.5 * math.gamma(3 + v) * math.sin(math.pi * v),
         (2 + v / 2, 3 / 2 + v / 2), (4 / 3, 5 / 3)),
    )


def pdf_hyp(params: ExcursionParams, spectral: SpectralData, a_hat: float,
            domain: specfun.AccuracyDomain = specfun.DEFAULT_DOMAIN):
    """Scaled density from the term-by-term inverted series.

    Returns ``(value, err)``. Levels are summed until the bound on a term,
    which carries a factor ``exp(-4 lambda_k^3 / (27 A_hat^2))``, drops below
    1e-12 (at least five levels unless a negligible level already lies outside
    the certified ``2F2`` domain). :class:`CancellationError` from the ``2F2``
    evaluations is passed through; :func:`pdf` falls back to :func:`pdf_talbot`.
    """
    _check_spectrum(params, spectral)
    if not a_hat > 0:
        raise DomainError("A_hat must be positive")
    a = params.a
    v = params.v
    coefs = _three_term_coefficients(v)
    pref = -_prefactor(a) / (math.pi * a_hat ** (v + 5 / 3))
    total = 0.0
    err = 0.0
    used = 0
    for lam, dk in zip(spectral.lambdas, spectral.dks):
        y = 4 * lam ** 3 / (27 * a_hat ** 2)
        r = lam / a_hat ** (2 / 3)
        bound = abs(pref) * dk * dk * (1 + y) ** 3 * math.exp(-y)
        if bound < TERM_CUTOFF and (used >= MIN_TERMS or y > domain.max_abs_argument):
            break
        term = 0.0
        term_err = 0.0
        for power, (weight, upper, lower) in enumerate(coefs):
            if weight == 0.0:
                continue
            res = specfun.hyp_pfq(upper, lower, -y, domain)
            scale = weight * r ** power
            term += scale * res.value
            term_err += abs(scale) * res.err_estimate
        total += dk * dk * term
        err += dk * dk * (term_err + 4 * specfun.UNIT_ROUNDOFF * abs(term))
        used += 1
    else:
        if used == spectral.K and bound >= TERM_CUTOFF:
            raise InsufficientSpectrumError(
                f"series at A_hat={a_hat:g} needs more than {spectral.K} levels")
    return pref * total, abs(pref) * err


def pdf_airy(params: ExcursionParams, spectral: SpectralData, a_hat: float,
             check: bool = True) -> float:
    """Airy-distribution density (``|alpha| = 1/2``) in its Kummer-U closed form.

    With ``check`` the Airy-function form is evaluated as well and the two
    must agree to 1e-9.
    """
    if abs(params.a) != 0.5:
        raise ModeError("the Airy closed forms need |alpha| = 1/2 (U0 = 0 or -2)")
    _check_spectrum(params, spectral)
    if not a_hat > 0:
        raise DomainError("A_hat must be positive")
    kummer = 0.0
    for lam in spectral.lambdas:
        y = 4 * lam ** 3 / (27 * a_hat ** 2)
        if y > 700:
            break
        kummer += lam ** 2 * math.exp(-y) * specfun.kummer_u(-5 / 6, 4 / 3, y)
    kummer *= 2 ** (10 / 3) / (3 ** 1.5 * a_hat ** (10 / 3))
    if check:
        airy = pdf_airy_function_form(spectral, a_hat)
        if abs(airy - kummer) > 1e-9:
            raise CancellationError(
                f"Airy closed forms disagree at A_hat={a_hat:g}: {kummer!r} vs {airy!r}")
    return kummer


def pdf_airy_function_form(spectral: SpectralData, a_hat: float) -> float:
    """Airy distribution written directly with ``Ai`` and ``Ai'``."""
    from scipy import special

    lam = np.asarray(spectral.lambdas)
    zeta = lam ** 2 * (3 * a_hat) ** (-4 / 3)
    z32 = zeta ** 1.5
    ai, aip, _, _ = special.airye(zeta)  # scaled by exp(2 zeta^{3/2} / 3)
    bracket = (8 * z32 - 7) * ai - (8 * z32 - 5) * aip / np.sqrt(zeta)
    # exp(-2 z32/3) Ai = exp(-4 z32/3) * airye
    terms = zeta ** 2.5 / lam ** 3 * np.exp(-4 * z32 / 3) * bracket
    return float(12 * math.sqrt(math.pi) * np.sum(terms))


# ---------------------------------------------------------------------------
# One-sided Levy law of index 2/3

def levy23(x: float, form: LevyForm | str = LevyForm.KUMMER_U) -> float:
    """Density of the one-sided stable law with Laplace transform ``exp(-s^{2/3})``."""
    if not x > 0:
        raise DomainError("x must be positive")
    form = LevyForm(form)
    y = 4 / (27 * x * x)
    if form is LevyForm.WHITTAKER_W:
        return math.sqrt(3 / math.pi) / x * math.exp(-y / 2) * specfun.whittaker_w(0.5, 1 / 6, y)
    if form is LevyForm.KUMMER_U:
        return (2 ** (4 / 3) / (3 ** 1.5 * math.sqrt(math.pi) * x ** (7 / 3))
                * math.exp(-y) * specfun.kummer_u(1 / 6, 4 / 3, y))
    if form is LevyForm.AIRY_FORM:
        from scipy import special

        zeta = (3 * x) ** (-4 / 3)
        ai, aip, _, _ = special.airye(zeta)
        # airye carries exp(+2 zeta^{3/2}/3); the density wants exp(-2 zeta^{3/2}/3) Ai
        return float(6 * zeta ** 1.75 * (ai - aip / math.sqrt(zeta))
                     * math.exp(-4 * zeta ** 1.5 / 3))
    return _levy23_series(x)


def _levy23_series(x: float) -> float:
    """Two degenerate ``2F2`` series; the pair cancels to ``exp(-y)`` size, so combine in multiprecision."""
    y_float = 4 / (27 * x * x)
    # digits lost: the largest series term is about e^y and the result about e^-y
    dps = 30 + int(2 * y_float / math.log(10))
    third = Fraction(1, 3)
    with mpmath.workdps(dps):
        xm = mpmath.mpf(x)
        y = 4 / (27 * xm * xm)
        f1, _ = specfun.hyp_pfq_mp((Fraction(5, 6), 4 * third), (2 * third, 4 * third), -y, dps)
        f2, _ = specfun.hyp_pfq_mp((5 * third, Fraction(7, 6)), (4 * third, 5 * third), -y, dps)
        five3 = mpmath.mpf(5) / 3
        seven3 = mpmath.mpf(7) / 3
        val = (mpmath.sin(2 * mpmath.pi / 3) / (mpmath.pi * xm ** five3)
               * (mpmath.gamma(five3) * f1
                  + mpmath.gamma(seven3) * f2 / (2 * xm ** (mpmath.mpf(2) / 3))))
        return float(val)


# ---------------------------------------------------------------------------
# Numerical inversion

_CONTOUR_DELTA = math.pi / 8  # asymptotic angle pi/2 + delta stays inside |arg s| < 3 pi / 4


def invert_laplace(transform, x: float, m0: int = TALBOT_M0, m_max: int = TALBOT_M_MAX,
                   tol: float = TALBOT_TOL):
    """Bromwich inversion on the hyperbola ``s(u) = mu (1 + sin(i u - delta))``.

    ``transform`` maps a complex array to a complex array. The node count
    doubles from ``m0`` until successive results differ by less than ``tol``.
    Returns ``(value, change)``.
    """
    if not x > 0:
        raise DomainError("x must be positive")
    previous = None
    m = m0
    while m <= m_max:
        value = _hyperbola_rule(transform, x, m)
        if previous is not None:
            change = abs(value - previous)
            if change < tol:
                return value, change
        previous = value
        m *= 2
    raise ContourError(f"contour inversion at x={x:g} did not settle within {m_max} nodes")


def _hyperbola_rule(transform, x: float, m: int) -> float:
    # mu * x is held fixed so the exp(s x) amplification of rounding errors
    # stays near e^5 whatever m is; refining h = U/m then shrinks the
    # discretization error geometrically. u beyond U = 3.5 contributes below e^-20.
    delta = _CONTOUR_DELTA
    h = 3.5 / m
    mu = 8.0 / x
    u = h * np.arange(0, m + 1)
    s = mu * (1 + np.sin(1j * u - delta))
    ds = 1j * mu * np.cos(1j * u - delta)
    vals = np.exp(s * x) * transform(s) * ds
    # conjugate symmetry: integral over u in R is 2 Re of the u >= 0 half
    weights = np.full(u.size, 1.0)
    weights[0] = 0.5
    return float(np.real(h / (1j * math.pi) * np.sum(weights * vals)))


def pdf_talbot(params: ExcursionParams, spectral: SpectralData, a_hat: float):
    """Scaled density by numerical inversion of :func:`laplace_pdf`. Returns ``(value, err)``."""
    _check_spectrum(params, spectral)
    value, change = invert_laplace(lambda s: _laplace_complex(spectral, s), a_hat)
    return value, change


# ---------------------------------------------------------------------------
# Dispatch and tables

def pdf(params: ExcursionParams, spectral: SpectralData, a_hat: float,
        method: Method | str | None = None):
    """Density with automatic method choice. Returns ``(value, err, method)``.

    Default routing: the series for ``A_hat >= 0.3`` and contour inversion below
    that or whenever the series reports cancellation.
    """
    if method is not None:
        method = Method(method)
    if method is Method.AIRY_CLOSED:
        return pdf_airy(params, spectral, a_hat), 1e-9, Method.AIRY_CLOSED
    if method is Method.TALBOT or (method is None and a_hat < HYP_MIN_A_HAT):
        v, e = pdf_talbot(params, spectral, a_hat)
        return v, e, Method.TALBOT
    try:
        v, e = pdf_hyp(params, spectral, a_hat)
        return v, e, Method.HYP_SERIES
    except (CancellationError, InsufficientSpectrumError):
        if method is Method.HYP_SERIES:
            raise
        v, e = pdf_talbot(params, spectral, a_hat)
        return v, e, Method.TALBOT


def default_grid(n: int = 400, lo: float = 0.05, hi: float = 6.0) -> np.ndarray:
    """Log-spaced ``A_hat`` grid."""
    return np.geomspace(lo, hi, n)


@dataclass(frozen=True)
class DistributionTable:
    """Scaled density ``A0 P`` tabulated against ``A_hat`` with per-point error and method."""

    a_hat_grid: np.ndarray
    pdf_scaled: np.ndarray
    err: np.ndarray
    method: tuple
    params: ExcursionParams | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("a_hat_grid", "pdf_scaled", "err"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        methods = tuple(Method(m) for m in self.method)
        object.__setattr__(self, "method", methods)
        n = self.a_hat_grid.size
        if not (self.pdf_scaled.size == n and self.err.size == n and len(methods) == n):
            raise ValueError("table columns must have equal length")
        if n > 1 and np.any(np.diff(self.a_hat_grid) <= 0):
            raise ValueError("A_hat grid must be strictly increasing")

    def integral(self) -> float:
        return float(np.trapezoid(self.pdf_scaled, self.a_hat_grid))

    def cdf(self) -> np.ndarray:
        """Cumulative trapezoid integral, starting at 0 on the first grid point."""
        inc = 0.5 * (self.pdf_scaled[1:] + self.pdf_scaled[:-1]) * np.diff(self.a_hat_grid)
        return np.concatenate(([0.0], np.cumsum(inc)))

    def to_csv(self, physical: bool = False) -> str:
        """CSV text with columns ``a_hat, pdf_scaled, err, method``.

        With ``physical`` the columns are ``A, P, err, method`` in the units of ``D, T``.
        """
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        if physical:
            if self.params is None:
                raise ValueError("physical units need params")
            A0 = self.params.A0
            writer.writerow(["A", "P", "err", "method"])
            for x, p, e, m in zip(self.a_hat_grid, self.pdf_scaled, self.err, self.method):
                writer.writerow([repr(float(x * A0)), repr(float(p / A0)), repr(float(e / A0)), m.value])
        else:
            writer.writerow(["a_hat", "pdf_scaled", "err", "method"])
            for x, p, e, m in zip(self.a_hat_grid, self.pdf_scaled, self.err, self.method):
                writer.writerow([repr(float(x)), repr(float(p)), repr(float(e)), m.value])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, params: ExcursionParams | None = None) -> DistributionTable:
        rows = [line for line in text.splitlines() if line and not line.startswith("#")]
        reader = csv.DictReader(rows)
        data = list(reader)
        return cls(np.array([float(r["a_hat"]) for r in data]),
                   np.array([float(r["pdf_scaled"]) for r in data]),
                   np.array([float(r["err"]) for r in data]),
                   tuple(r["method"] for r in data), params)

    def to_json(self) -> str:
        payload = {
            "params": self.params.to_dict() if self.params is not None else None,
            "meta": self.meta,
            "a_hat": self.a_hat_grid.tolist(),
            "pdf_scaled": self.pdf_scaled.tolist(),
            "err": self.err.tolist(),
            "method": [m.value for m in self.method],
        }
        return json.dumps(payload, indent=2)


def tabulate(params: ExcursionParams, spectral: SpectralData, grid: Sequence[float] | None = None,
             method: Method | str | None = None, on_fallback=None) -> DistributionTable:
    """Evaluate the density on ``grid`` (default: 400 log-spaced points on [0.05, 6]).

    ``on_fallback(a_hat, exc)`` is called whenever the series had to be replaced
    by contour inversion.
    """
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    values, errs, methods = [], [], []
    for x in grid:
        if method is None and x >= HYP_MIN_A_HAT:
            try:
                v, e = pdf_hyp(params, spectral, float(x))
                m = Method.HYP_SERIES
            except (CancellationError, InsufficientSpectrumError) as exc:
                if on_fallback is not None:
                    on_fallback(float(x), exc)
                v, e = pdf_talbot(params, spectral, float(x))
                m = Method.TALBOT
        else:
            v, e, m = pdf(params, spectral, float(x), method)
        values.append(v)
        errs.append(e)
        methods.append(m)
    return DistributionTable(grid, np.array(values), np.array(errs), tuple(methods), params,
                             {"K": spectral.K, "tol": spectral.tol})


# ---------------------------------------------------------------------------
# Free propagator

def g0_propagator(x: float, x0: float, T: float, params: ExcursionParams) -> float:
    """Absorbing-boundary transition density from ``x0`` to ``x`` in time ``T`` (no area weight).

    ``(x0/x)^{U0/2} sqrt(x x0) / (2 D T) exp(-(x^2 + x0^2) / (4 D T)) I_{|alpha|}(x x0 / (2 D T))``.
    """
    if not (x > 0 and x0 > 0 and T > 0):
        raise DomainError("x, x0 and T must be positive")
    D = params.D
    z = x * x0 / (2 * D * T)
    scaled_i = specfun.bessel_i(abs(params.alpha), z, scaled=True)
    return ((x0 / x) ** (params.U0 / 2) * math.sqrt(x * x0) / (2 * D * T)
            * math.exp(-(x - x0) ** 2 / (4 * D * T)) * scaled_i)
