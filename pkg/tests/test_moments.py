from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from besselarea import ExcursionParams, distribution as dist, moments
from besselarea.errors import CoverageError, DomainError, TailFitError

from conftest import spectrum_for


def test_first_moment_airy_value():
    params = ExcursionParams(0.0, D=1.0, T=1.0)
    assert moments.m1_closed(params) == pytest.approx(math.sqrt(math.pi) / 2, rel=1e-15)


def test_moments_scale_with_A0():
    base, scaled = ExcursionParams(1.0), ExcursionParams(1.0, D=3.0, T=2.5)
    r = scaled.A0 / base.A0
    assert moments.m1_closed(scaled) == pytest.approx(r * moments.m1_closed(base), rel=1e-14)
    assert moments.m2_series(scaled) == pytest.approx(r ** 2 * moments.m2_series(base), rel=1e-12)


@pytest.mark.parametrize("U0,exact", [(0.0, 5 / 6), (-2.0, 5 / 6), (5.0, 64 / 27), (-7.0, 64 / 27)])
def test_second_moment_exact_points(U0, exact):
    params = ExcursionParams(U0, D=1.0)
    assert moments.m2_series(params) == pytest.approx(exact, abs=1e-7)


def test_fractional_moment_reduces_to_integer_moments():
    p1, p2 = ExcursionParams(2.0), ExcursionParams(5.0)
    assert p1.nu == pytest.approx(1.0) and p2.nu == pytest.approx(2.0)
    assert moments.m_nu_closed(p1) == pytest.approx(moments.m1_closed(p1), rel=1e-12)
    assert moments.m_nu_closed(p2) == pytest.approx(moments.m2_series(p2), rel=1e-7)


def test_linear_approximation_hits_both_anchors():
    for U0, exact in ((0.0, 5 / 6), (5.0, 64 / 27)):
        params = ExcursionParams(U0, D=1.0)
        assert moments.m2_linear(params) == pytest.approx(exact, rel=1e-12)


def test_second_moment_large_a_growth():
    # the series grows linearly in a with slope close to 0.617
    m = [moments.m2_series(ExcursionParams(U0, D=1.0), tol=1e-6) for U0 in (7.0, 9.0)]
    assert 0.60 < (m[1] - m[0]) < 0.63


@settings(max_examples=15)
@given(st.floats(-0.95, 9.0))
def test_variance_non_negative(U0):
    s = moments.moment_set(ExcursionParams(U0))
    assert s.m2 - s.m1 ** 2 > 0


@settings(max_examples=15)
@given(st.floats(-0.95, 9.0))
def test_mirror_moments_match(U0):
    a = moments.moment_set(ExcursionParams(U0))
    b = moments.moment_set(ExcursionParams(-2.0 - U0))
    assert a.m1 == pytest.approx(b.m1, rel=1e-14)
    assert a.m2 == pytest.approx(b.m2, rel=1e-14)


@pytest.mark.parametrize("U0", [-0.5, 1.0, 2.5])
def test_moments_of_tabulated_density(U0):
    params, data = spectrum_for(U0)
    table = dist.tabulate(params, data, dist.default_grid(200, 0.05, 6.0))
    assert moments.moment_quadrature(table, 0) == pytest.approx(1.0, abs=1e-4)
    assert moments.moment_quadrature(table, 1) == pytest.approx(
        moments.m1_closed(params) / params.A0, abs=1e-4)
    assert moments.moment_quadrature(table, 2) == pytest.approx(
        moments.m2_series(params) / params.A0 ** 2, abs=1e-4)


def test_quadrature_refuses_short_table():
    params, data = spectrum_for(0.0)
    table = dist.tabulate(params, data, dist.default_grid(20, 0.3, 1.5))
    with pytest.raises(CoverageError):
        moments.moment_quadrature(table, 1)


def test_errors():
    with pytest.raises(DomainError):
        moments.m_nu_closed(ExcursionParams(-1.5))
    with pytest.raises(DomainError):
        moments.m2_series_detail(ExcursionParams(0.0), tol=1e-12)
    with pytest.raises(TailFitError):
        moments.m2_series_detail(ExcursionParams(0.0), K=10, tol=1e-10)


def test_moment_set_serializes():
    s = moments.moment_set(ExcursionParams(-1.5))
    d = s.to_dict()
    assert d["m_nu"] is None
    assert d["method_tags"]["m2"] == "Series"
    assert np.isfinite(s.physical()["m2"])
