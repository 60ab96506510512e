from __future__ import annotations

import functools

import pytest
from hypothesis import HealthCheck, settings

from besselarea import BoundaryMode, ExcursionParams, solve_spectrum

settings.register_profile(
    "default", deadline=None, max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@functools.lru_cache(maxsize=None)
def spectrum_for(U0: float, K: int = 150, mode: str = "absorbing", tol: float = 1e-10):
    """Cached spectra shared across test modules."""
    params = ExcursionParams(U0, mode=BoundaryMode(mode))
    return params, solve_spectrum(params, K, tol)


@pytest.fixture(scope="session")
def spectra():
    return spectrum_for
