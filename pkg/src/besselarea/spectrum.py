"""Eigenvalues and origin coefficients of the rescaled excursion Hamiltonian.

The operator is ``-phi'' + (c/x^2 + x) phi = lam phi`` with ``c = alpha^2 - 1/4``
and the regular behaviour ``phi ~ d x^{1/2 + a}`` at the origin, where ``a``
is ``|alpha|`` (absorbing boundary) or the signed ``alpha`` (continued branch).

Eigenvalues are found by shooting: a Frobenius series launches the solution
near the origin, a decaying Airy function launches it deep in the forbidden
region, and the normalized Wronskian of the two branches is driven to zero.
Roots are bracketed with a Sturm node count, so no eigenvalue can be skipped.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from . import _ode
from .errors import ConvergenceError, DomainError
from .params import BoundaryMode, ExcursionParams

X_MIN = 1e-4
RIGHT_MARGIN = 12.0
_SERIES_TERMS = 16


# ---------------------------------------------------------------------------
# Frobenius start

def _series_coefficients(a: float, lam: float, n_terms: int = _SERIES_TERMS) -> np.ndarray:
    """Coefficients of ``u`` in ``phi = x^{1/2+a} u(x)``, ``u(0) = 1``.

    From ``n (n + 2a) c_n = c_{n-3} - lam c_{n-2}``.
    """
    coef = np.zeros(n_terms)
    coef[0] = 1.0
    for n in range(2, n_terms):
        prev3 = coef[n - 3] if n >= 3 else 0.0
        coef[n] = (prev3 - lam * coef[n - 2]) / (n * (n + 2.0 * a))
    return coef


def _frobenius_start(a: float, lam: float, x0: float) -> np.ndarray:
    """``(phi, phi', int_0^x0 phi^2)`` at ``x0`` from the origin series."""
    coef = _series_coefficients(a, lam)
    n = np.arange(coef.size)
    u = np.polynomial.polynomial.polyval(x0, coef)
    du = np.polynomial.polynomial.polyval(x0, coef[1:] * n[1:])
    p = 0.5 + a
    phi = x0 ** p * u
    dphi = p * x0 ** (p - 1.0) * u + x0 ** p * du
    # int_0^x0 x^{1+2a} u^2 dx, term by term
    sq = np.polynomial.polynomial.polymul(coef, coef)
    m = np.arange(sq.size)
    norm = float(np.sum(sq * x0 ** (m + 2.0 + 2.0 * a) / (m + 2.0 + 2.0 * a)))
    return np.array([phi, dphi, norm])


# ---------------------------------------------------------------------------
# Shooting pieces

def _hmax(lam: float) -> float:
    return 0.5 / math.sqrt(abs(lam) + 1.0)


def _matching_point(lam: float) -> float:
    return max(1.0, 0.5 * lam)


def _left_branch(a: float, lam: float, x_end: float, rtol: float):
    c = a * a - 0.25
    y0 = _frobenius_start(a, lam, X_MIN)
    y, changes, _ = _ode.run(X_MIN, x_end, [y0[0], y0[1], 0.0], c, lam, rtol, _hmax(lam))
    y[2] += y0[2]
    return y, changes


def _right_branch(a: float, lam: float, x_end: float, rtol: float):
    c = a * a - 0.25
    x_max = lam + RIGHT_MARGIN
    ai, aip, _, _ = special.airy(RIGHT_MARGIN)
    y, changes, _ = _ode.run(x_max, x_end, [ai, aip, 0.0], c, lam, rtol, _hmax(lam))
    # int_{x_max}^inf Ai(x - lam)^2 dx = Ai'(s)^2 - s Ai(s)^2 at s = x_max - lam
    tail = aip * aip - RIGHT_MARGIN * ai * ai
    y[2] = tail - y[2]
    return y, changes


def _amplitude(y, lam: float) -> float:
    k2 = abs(lam) + 1.0
    return math.sqrt(y[0] * y[0] + y[1] * y[1] / k2)


def shooting_mismatch(a: float, lam: float, rtol: float) -> float:
    """Normalized Wronskian of the left and right branches at the matching point."""
    xm = _matching_point(lam)
    yl, _ = _left_branch(a, lam, xm, rtol)
    yr, _ = _right_branch(a, lam, xm, rtol)
    w = yl[0] * yr[1] - yl[1] * yr[0]
    return w / (_amplitude(yl, lam) * _amplitude(yr, lam) * math.sqrt(abs(lam) + 1.0))


def node_count(a: float, lam: float, rtol: float) -> int:
    """Number of eigenvalues below ``lam`` (zeros of the left solution on the full range)."""
    _, changes = _left_branch(a, lam, lam + RIGHT_MARGIN, rtol)
    return changes


def _normalization(a: float, lam: float, rtol: float) -> float:
    """``d`` such that ``d x^{1/2+a} u`` has unit L2 norm at eigenvalue ``lam``."""
    xm = _matching_point(lam)
    yl, _ = _left_branch(a, lam, xm, rtol)
    yr, _ = _right_branch(a, lam, xm, rtol)
    # scale the right branch onto the left one, using whichever of phi, phi' is larger
    if abs(yr[0]) * math.sqrt(abs(lam) + 1.0) >= abs(yr[1]):
        scale = yl[0] / yr[0]
    else:
        scale = yl[1] / yr[1]
    total = yl[2] + scale * scale * yr[2]
    return 1.0 / math.sqrt(total)


# ---------------------------------------------------------------------------
# Public API

@dataclass(frozen=True)
class SpectralData:
    """First ``K`` eigenvalues and origin coefficients for one parameter set.

    ``tail_start`` is the index at which callers switch to the asymptotic
    (continuum) treatment of higher levels; it equals ``K``.
    """

    lambdas: np.ndarray
    dks: np.ndarray
    K: int
    tol: float
    params: ExcursionParams
    tail_start: int = field(default=-1)

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        dk = np.asarray(self.dks, dtype=float)
        lam.setflags(write=False)
        dk.setflags(write=False)
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "dks", dk)
        if self.tail_start < 0:
            object.__setattr__(self, "tail_start", self.K)
        if lam.size != self.K or dk.size != self.K:
            raise ValueError("lambdas and dks must both have length K")

    @property
    def a(self) -> float:
        return self.params.a

    def to_rows(self):
        """Rows ``(k, lambda, d, lambda_asym, d_asym)``."""
        rows = []
        for k, (lam, d) in enumerate(zip(self.lambdas, self.dks)):
            rows.append((k, float(lam), float(d), lambda_asymptotic(self.params, k),
                         dk_asymptotic(self.params, float(lam))))
        return rows


def lambda_asymptotic(params: ExcursionParams, k: int) -> float:
    """Large-``k`` eigenvalue law ``(2/3) lam^{3/2} = pi (k + (a + 1)/2)``.

    With ``a = |alpha|`` this is ``pi (k + (|U0+1| + 2)/4)``; ``U0 = 0`` gives
    the Airy-zero asymptotics.
    """
    if k < 0:
        raise DomainError("k must be non-negative")
    return (1.5 * math.pi * (k + 0.5 * (params.a + 1.0))) ** (2.0 / 3.0)


def dk_asymptotic(params: ExcursionParams, lambda_k: float) -> float:
    """Large-``k`` origin coefficient ``2^{-a-1/2} sqrt(pi) lam^{(2a-1)/4} / Gamma(1+a)``."""
    if not lambda_k > 0:
        raise DomainError("lambda_k must be positive")
    a = params.a
    return 2.0 ** (-a - 0.5) * math.sqrt(math.pi) * lambda_k ** ((2 * a - 1) / 4) / math.gamma(1 + a)


def eigenfunction_eval(params: ExcursionParams, lam: float, x: float, tol: float = 1e-10) -> float:
    """Left shooting solution at ``x`` for trial energy ``lam``, with ``phi ~ x^{1/2+a}`` at 0."""
    if not x > 0:
        raise DomainError("x must be positive")
    a = params.a
    if x <= X_MIN:
        return float(_frobenius_start(a, lam, x)[0])
    y, _ = _left_branch(a, lam, x, tol / 10)
    return float(y[0])


def _bracket_roots(a: float, K: int, rtol: float, params: ExcursionParams):
    """Intervals ``(lo, hi)`` each holding exactly one eigenvalue, for k = 0..K-1."""
    counts: dict[float, int] = {}

    def count(lam):
        if lam not in counts:
            counts[lam] = node_count(a, lam, rtol)
        return counts[lam]

    if count(0.0) != 0:
        raise ConvergenceError("found a non-positive eigenvalue")
    # midpoints between consecutive asymptotic predictions
    guesses = [lambda_asymptotic(params, k) for k in range(K + 1)]
    grid = [0.0] + [0.5 * (g0 + g1) for g0, g1 in zip(guesses[:-1], guesses[1:])]
    for lam in grid:
        count(lam)
    top = grid[-1]
    gap = guesses[-1] - guesses[-2]
    lam_cap = 4.0 * guesses[-1] + 50.0
    while count(top) < K:
        top += gap
        if top > lam_cap:
            raise ConvergenceError(f"could not bracket {K} eigenvalues below {lam_cap:g}")

    brackets = []
    for k in range(K):
        for _ in range(200):
            pts = sorted(counts)
            lo = max(p for p in pts if counts[p] <= k)
            hi = min(p for p in pts if counts[p] >= k + 1)
            if counts[lo] == k and counts[hi] == k + 1:
                break
            count(0.5 * (lo + hi))
        else:
            raise ConvergenceError(f"could not isolate eigenvalue {k}")
        brackets.append((lo, hi))
    return brackets


def _solve_one(a: float, bracket, tol: float, rtol: float):
    lo, hi = bracket
    f = lambda lam: shooting_mismatch(a, lam, rtol)
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        root = lo
    elif fhi == 0.0:
        root = hi
    else:
        if flo * fhi > 0:
            raise ConvergenceError(f"mismatch does not change sign on [{lo}, {hi}]")
        root = optimize.brentq(f, lo, hi, xtol=tol * 1e-2, rtol=4 * np.finfo(float).eps,
                               maxiter=200)
    return root, _normalization(a, root, rtol)


def solve_spectrum(params: ExcursionParams, K: int, tol: float = 1e-10,
                   threads: int = 1) -> SpectralData:
    """First ``K`` eigenvalues ``lambda_k`` and coefficients ``d_k``.

    Parameters
    ----------
    params : ExcursionParams
        Drift strength and boundary mode. ``D`` and ``T`` do not enter.
    K : int
        Number of levels.
    tol : float
        Absolute tolerance on each eigenvalue, in ``[1e-12, 1e-4]``. The ODE
        integrator runs at relative tolerance ``tol / 10``.
    threads : int
        Worker threads for the independent root searches.
    """
    if K < 1:
        raise DomainError("K must be at least 1")
    if not 1e-12 <= tol <= 1e-4:
        raise DomainError("tol must lie in [1e-12, 1e-4]")
    a = params.a
    rtol = tol / 10.0
    brackets = _bracket_roots(a, K, rtol, params)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda b: _solve_one(a, b, tol, rtol), brackets))
    else:
        results = [_solve_one(a, b, tol, rtol) for b in brackets]
    lambdas = np.array([r[0] for r in results])
    dks = np.array([r[1] for r in results])
    return SpectralData(lambdas, dks, K, tol, params)


def limit_shape_params() -> ExcursionParams:
    """Parameters of the reduced problem with ``phi ~ x^{3/2}`` (``|alpha| = 1``)."""
    return ExcursionParams(U0=1.0, mode=BoundaryMode.ABSORBING)
