"""Moments of the excursion area.

Closed forms for the first and the ``nu = (U0+1)/3`` fractional moment, the
series for the second moment, its two-point linear approximation, and
numerical moments of a tabulated density. Functions taking ``params`` return
physical values, i.e. including the power of ``A0``.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate, special

from . import specfun
from .distribution import DistributionTable
from .errors import CoverageError, DomainError, PoleError, TailFitError
from .params import ExcursionParams

M2_LEVELS = 200


class MomentMethod(str, enum.Enum):
    CLOSED_FORM = "ClosedForm"
    SERIES = "Series"
    QUADRATURE = "Quadrature"
    MC = "MC"


def m1_closed(params: ExcursionParams) -> float:
    """Mean area ``pi Gamma(a + 3/2) / (4 Gamma(a + 1)) A0``."""
    a = params.a
    if a <= -1:
        raise PoleError("first moment needs a > -1")
    return math.pi * math.gamma(a + 1.5) / (4 * math.gamma(a + 1)) * params.A0


def _m2_summand(a: float, k: int):
    """k-th term of the second-moment series (without the overall prefactor) and its error."""
    lg = math.lgamma
    log_pre = (2 * lg(k + 1.5) + 2 * lg(a + k + 1.5) - lg(k + 1) - lg(k + 4.5)
               - lg(a + k + 1) - lg(a + k + 4.5))
    pre = math.exp(log_pre)
    res = specfun.hyp_pfq([k + 1.5, a + k + 1.5, 3.0], [k + 4.5, a + k + 4.5], 1.0)
    return pre * res.value, pre * res.err_estimate


def _power_tail(ks: np.ndarray, values: np.ndarray, K: int, n_powers: int):
    basis = np.vstack([ks ** -float(j) for j in range(2, 2 + n_powers)]).T
    coef, *_ = np.linalg.lstsq(basis, values, rcond=None)
    resid = values - basis @ coef
    tail = sum(c * special.zeta(2 + j, K + 1) for j, c in enumerate(coef))
    return float(tail), coef, float(np.max(np.abs(resid)))


@dataclass(frozen=True)
class M2Result:
    """Second-moment series details, in units of ``A0^2``."""

    value: float
    err: float
    partial_sum: float
    tail: float
    tail_coefficients: tuple


def m2_series_detail(params: ExcursionParams, tol: float = 1e-7, K: int = M2_LEVELS,
                     threads: int = 1) -> M2Result:
    """Second moment from the level series with a fitted power-law tail.

    Summands are computed exactly up to ``K``; the tail is fitted as
    ``sum_j c_j k^{-j}`` for ``j = 2..6`` on ``[K/2, K]`` and summed with
    Hurwitz zeta values. The difference from a four-power fit is the error
    estimate; :class:`TailFitError` if it exceeds ``tol``.
    """
    if tol < 1e-10:
        raise DomainError("tol below 1e-10 is not supported")
    a = params.a
    if a <= -1:
        raise PoleError("second moment needs a > -1")
    ks = range(K + 1)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda k: _m2_summand(a, k), ks))
    else:
        parts = [_m2_summand(a, k) for k in ks]
    terms = np.array([p[0] for p in parts])
    term_err = float(sum(p[1] for p in parts))
    fit_k = np.arange(K // 2, K + 1, dtype=float)
    tail5, coef, _ = _power_tail(fit_k, terms[K // 2:], K, 5)
    tail4, _, _ = _power_tail(fit_k, terms[K // 2:], K, 4)
    scale = 16 * math.gamma(3 + a) / math.gamma(1 + a)
    partial = math.fsum(terms)
    value = scale * (partial + tail5)
    err = scale * (abs(tail5 - tail4) + term_err)
    if err > tol:
        raise TailFitError(f"second-moment tail uncertain: {err:.2e} > {tol:.1e}")
    return M2Result(value, err, scale * partial, scale * tail5, tuple(float(c) for c in coef))


def m2_series(params: ExcursionParams, tol: float = 1e-7, threads: int = 1) -> float:
    """Second moment ``E[A^2]`` (physical units)."""
    return m2_series_detail(params, tol, threads=threads).value * params.A0 ** 2


def m2_linear(params: ExcursionParams) -> float:
    """Straight line through the exact ``|alpha| = 1/2`` and ``|alpha| = 3`` values.

    ``((83/135)(a - 1/2) + 5/6) A0^2``. The slope 0.6148 is close to, but not the
    same as, the large-``a`` growth rate 0.61685 of the exact series.
    """
    return ((83 / 135) * (params.a - 0.5) + 5 / 6) * params.A0 ** 2


def m_nu_closed(params: ExcursionParams) -> float:
    """Moment of order ``nu = 2 alpha / 3``: ``2^{2alpha-1} Gamma(alpha) / (3^{2nu-1} Gamma(nu)) A0^nu``."""
    alpha = params.alpha
    if alpha <= 0:
        raise DomainError("the nu-th moment formula needs alpha > 0 (U0 > -1)")
    nu = params.nu
    return (2 ** (2 * alpha - 1) * math.gamma(alpha) / (3 ** (2 * nu - 1) * math.gamma(nu))
            * params.A0 ** nu)


# ---------------------------------------------------------------------------
# Moments of a tabulated density

def moment_quadrature(table: DistributionTable, p: float, tol: float = 1e-4) -> float:
    """``int A_hat^p pdf dA_hat`` from a table, with estimates of both uncovered tails added.

    Integrates in ``log A_hat`` with Simpson's rule. Below the grid the density
    is increasing, so ``x0^{p+1} f(x0) / (p+1)`` bounds the missing mass.
    Above it the Gaussian decay rate is read from the last two points.
    Raises :class:`CoverageError` when the tail estimate exceeds ``tol``.
    """
    if p < 0:
        raise DomainError("p must be non-negative")
    x = np.asarray(table.a_hat_grid, dtype=float)
    f = np.asarray(table.pdf_scaled, dtype=float)
    if x.size < 3 or x[0] <= 0:
        raise CoverageError("table needs at least three positive grid points")
    body = integrate.simpson(x ** (p + 1) * f, x=np.log(x))
    left = x[0] ** (p + 1) * max(f[0], 0.0) / (p + 1)
    right = _gaussian_tail(x[-2:], f[-2:], p)
    tail = left + right
    if tail > tol:
        raise CoverageError(f"table omits an estimated {tail:.2e} of the order-{p} moment")
    return float(body + tail)


def _gaussian_tail(x, f, p):
    x0, x1 = x
    f0, f1 = f
    if f1 <= 0:
        return 0.0
    if f0 <= f1:
        # not decaying yet: the grid stops too early
        return math.inf
    kappa = math.log(f0 / f1) / (x1 * x1 - x0 * x0)
    return x1 ** p * f1 / (2 * kappa * x1)


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentSet:
    """Moments in scaled units (powers of ``A0`` divided out) with their provenance."""

    m0: float
    m1: float
    m2: float
    m_nu: float
    nu: float
    method_tags: dict = field(default_factory=dict)
    A0: float = 1.0

    def __post_init__(self):
        if self.m2 < self.m1 ** 2 * (1 - 1e-12):
            raise ValueError("second moment below squared mean")

    def physical(self) -> dict:
        return {"m0": self.m0, "m1": self.m1 * self.A0, "m2": self.m2 * self.A0 ** 2,
                "m_nu": self.m_nu * self.A0 ** self.nu if math.isfinite(self.m_nu) else None}

    def to_dict(self) -> dict:
        out = asdict(self)
        out["method_tags"] = {k: MomentMethod(v).value for k, v in self.method_tags.items()}
        if not math.isfinite(self.m_nu):
            out["m_nu"] = None
        return out


def moment_set(params: ExcursionParams, tol: float = 1e-7, threads: int = 1) -> MomentSet:
    """All closed-form and series moments for ``params``."""
    A0 = params.A0
    m1 = m1_closed(params) / A0
    m2 = m2_series_detail(params, tol, threads=threads).value
    if params.alpha > 0:
        m_nu = m_nu_closed(params) / A0 ** params.nu
        tag_nu = MomentMethod.CLOSED_FORM
    else:
        m_nu = math.nan
        tag_nu = None
    tags = {"m0": MomentMethod.CLOSED_FORM, "m1": MomentMethod.CLOSED_FORM,
            "m2": MomentMethod.SERIES}
    if tag_nu is not None:
        tags["m_nu"] = tag_nu
    return MomentSet(1.0, m1, m2, m_nu, params.nu, tags, A0)
