"""Analytically continued distribution close to ``U0 = -3``.

As ``U0 -> -3`` from above (continued branch) the lowest level ``lambda_0``
goes to zero linearly in ``U0 + 3`` while every higher ``d_k`` vanishes, so
the Laplace transform collapses to ``exp(-lambda_0 s_hat^{2/3})``: a one-sided
stable law of index 2/3 on the area scale ``A0 lambda_0^{3/2}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distribution import levy23
from .errors import DomainError
from .params import BoundaryMode, ExcursionParams
from .spectrum import solve_spectrum

LAMBDA0_RATE = 2 * math.pi / (3 ** (5 / 6) * math.gamma(2 / 3) ** 2)
VALIDITY_THRESHOLD = 0.1


def _check_range(U0: float) -> None:
    if not -3.0 <= U0 < -1.0:
        raise DomainError("the continued branch is defined for -3 < U0 < -1")


def lambda0_perturbative(U0: float) -> float:
    """Leading-order lowest level ``2 pi (U0 + 3) / (3^{5/6} Gamma(2/3)^2)``."""
    _check_range(U0)
    return LAMBDA0_RATE * (U0 + 3.0)


def d0_perturbative(U0: float) -> float:
    """Leading-order origin coefficient ``sqrt(U0 + 3)``."""
    _check_range(U0)
    return math.sqrt(U0 + 3.0)


def limit_fixed_spectrum(K: int, tol: float = 1e-10) -> np.ndarray:
    """Limits of ``lambda_1 .. lambda_K``: the levels of the problem with ``3/(4x^2)`` and ``phi ~ x^{3/2}``."""
    if K < 1:
        raise DomainError("K must be at least 1")
    reduced = ExcursionParams(U0=1.0, mode=BoundaryMode.ABSORBING)  # |alpha| = 1
    return solve_spectrum(reduced, K, tol).lambdas.copy()


@dataclass(frozen=True)
class LimitSpectrum:
    lambda0: float
    d0: float
    lambdas_fixed: np.ndarray


def limit_spectrum(U0: float, K: int = 5) -> LimitSpectrum:
    return LimitSpectrum(lambda0_perturbative(U0), d0_perturbative(U0), limit_fixed_spectrum(K))


def within_validity(U0: float) -> bool:
    """Whether ``U0 + 3`` is small enough (<= 0.1) for the limit law to be trusted to ~2%."""
    return U0 + 3.0 <= VALIDITY_THRESHOLD


def limit_laplace(U0: float, s_hat: float) -> float:
    """``exp(-lambda_0 s_hat^{2/3})`` with the leading-order ``lambda_0``."""
    if s_hat < 0:
        raise DomainError("s_hat must be non-negative")
    return math.exp(-lambda0_perturbative(U0) * s_hat ** (2 / 3))


def limit_pdf(U0: float, a_hat: float) -> float:
    """Scaled density of the limit law: ``levy23(A_hat / L) / L`` with ``L = lambda_0^{3/2}``."""
    scale = lambda0_perturbative(U0) ** 1.5
    if scale == 0:
        raise DomainError("the limit law degenerates at U0 = -3")
    return levy23(a_hat / scale) / scale
