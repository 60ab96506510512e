from __future__ import annotations

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from besselarea import specfun
from besselarea.errors import CancellationError, DomainError, PoleError

mp.mp.dps = 40


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


# ---------------------------------------------------------------------------
# Gamma family

@pytest.mark.parametrize("x", [0.5, 1.0, 2.5, 7.25, -0.5, -2.5, 30.1])
def test_gamma_matches_mpmath(x):
    assert rel(specfun.gamma(x), float(mp.gamma(x))) < 1e-13


@pytest.mark.parametrize("x", [0.0, -1.0, -4.0])
def test_gamma_poles_raise(x):
    with pytest.raises(PoleError):
        specfun.gamma(x)
    with pytest.raises(PoleError):
        specfun.log_gamma(x)


@given(st.floats(0.1, 20.0))
def test_gamma_recurrence(x):
    assert rel(specfun.gamma(x + 1), x * specfun.gamma(x)) < 1e-13


@pytest.mark.parametrize("a,z", [(0.5, 0.1), (1.5, 2.0), (2.75, 10.0), (4.0, 30.0), (0.2, 50.0)])
def test_gammaincc_real(a, z):
    assert rel(specfun.gammaincc(a, z), float(mp.gammainc(a, z, mp.inf, regularized=True))) < 1e-12


@pytest.mark.parametrize("z", [0.3 + 0.4j, 2.0 - 3.0j, 8.0 + 6.0j, -0.5 + 2.0j])
def test_gammaincc_complex(z):
    want = complex(mp.gammainc(1.75, z, mp.inf, regularized=True))
    assert abs(specfun.gammaincc(1.75, z) - want) < 1e-12 * max(1.0, abs(want))


@pytest.mark.parametrize("b", [-2.3, -1.0, -0.5, 0.0, 0.7, 3.2])
@pytest.mark.parametrize("z", [0.05, 1.0, 12.0])
def test_upper_gamma_any_order(b, z):
    want = float(mp.gammainc(b, z, mp.inf))
    assert rel(specfun.upper_gamma(b, z), want) < 5e-12


# ---------------------------------------------------------------------------
# Bessel and Airy

@pytest.mark.parametrize("order", [0.25, 0.5, -0.5, 1.0, 1.75, 3.0])
@pytest.mark.parametrize("x", [0.01, 1.0, 7.5, 40.0])
def test_bessel_i_and_k(order, x):
    assert rel(specfun.bessel_i(order, x), float(mp.besseli(order, x))) < 1e-12
    scaled = specfun.bessel_i(order, x, scaled=True)
    assert rel(scaled, float(mp.besseli(order, x) * mp.exp(-x))) < 1e-12
    assert rel(specfun.bessel_k(order, x), float(mp.besselk(order, x))) < 1e-12


@pytest.mark.parametrize("order", [0.5, -0.5, 1.5, 2.0])
def test_bessel_j(order):
    for x in (0.3, 2.0, 11.0):
        assert abs(specfun.bessel_j(order, x) - float(mp.besselj(order, x))) < 1e-13


@pytest.mark.parametrize("x", [-20.0, -7.3, -1.0, 0.0, 2.0, 10.0])
def test_airy(x):
    assert abs(specfun.airy_ai(x) - float(mp.airyai(x))) < 1e-11 * max(1.0, abs(float(mp.airyai(x))))
    aip = float(mp.airyai(x, derivative=1))
    assert abs(specfun.airy_aip(x) - aip) < 1e-11 * max(1.0, abs(aip))


def test_airy_zeros_match_mpmath():
    for k in range(12):
        assert abs(specfun.airy_zero(k) + float(mp.airyaizero(k + 1))) < 1e-12


def test_airy_zero_rejects_negative_index():
    with pytest.raises(DomainError):
        specfun.airy_zero(-1)


# ---------------------------------------------------------------------------
# Hypergeometric functions

@pytest.mark.parametrize("upper,lower,z", [
    ([1.5, 0.75], [1 / 3, 2 / 3], 3.0),
    ([1.5, 0.75], [1 / 3, 2 / 3], -25.0),
    ([0.5], [1.5], -4.0),
    ([2.0, 1.0, 0.5], [3.0, 1.5], 0.9),
    ([-3.0, 2.0], [0.5], 7.0),
])
def test_hyp_pfq_matches_mpmath(upper, lower, z):
    res = specfun.hyp_pfq(upper, lower, z)
    want = float(mp.hyper(upper, lower, z))
    assert abs(res.value - want) <= max(1e-12 * abs(want), 1e-300)
    assert res.err_estimate <= 1e-10 * max(abs(want), 1e-300)


def test_hyp_pfq_cancellation_escalates():
    # alternating series with heavy cancellation: the double-precision sum alone is useless
    res = specfun.hyp_pfq([4 / 3, 5 / 6], [1 / 3, 2 / 3], -60.0)
    want = float(mp.hyper([mp.mpf(4) / 3, mp.mpf(5) / 6], [mp.mpf(1) / 3, mp.mpf(2) / 3], -60))
    assert rel(res.value, want) < 1e-9


def test_hyp_pfq_domain_limit():
    dom = specfun.AccuracyDomain(max_abs_argument=30.0)
    with pytest.raises(CancellationError):
        specfun.hyp_pfq([1.0, 1.5], [0.5, 2.0], -40.0, dom)


def test_hyp_pfq_unit_argument_saalschutz():
    # 3F2(-n, a, b; c, 1+a+b-c-n; 1) = (c-a)_n (c-b)_n / ((c)_n (c-a-b)_n)
    n, a, b, c = 4, 0.3, 1.7, 2.2
    want = float(mp.rf(c - a, n) * mp.rf(c - b, n) / (mp.rf(c, n) * mp.rf(c - a - b, n)))
    res = specfun.hyp_pfq([-n, a, b], [c, 1 + a + b - c - n], 1.0)
    assert rel(res.value, want) < 1e-12


def test_hyp_pfq_unit_argument_gauss_nonterminating():
    upper, lower = [1.5, 2.5, 3.0], [4.5, 5.0]
    want = float(mp.hyper(upper, lower, 1))
    res = specfun.hyp_pfq(upper, lower, 1.0)
    assert rel(res.value, want) < 1e-11


@given(st.floats(0.1, 2.0), st.floats(0.2, 3.0), st.floats(-5.0, 5.0))
def test_hyp_pfq_upper_order_irrelevant(a, b, z):
    one = specfun.hyp_pfq([a, b], [1.3, 0.7], z).value
    two = specfun.hyp_pfq([b, a], [0.7, 1.3], z).value
    assert abs(one - two) <= 1e-12 * max(1.0, abs(one))


@pytest.mark.parametrize("a", [-2.7, -1.3, -0.5, 0.2, 0.9, 1.0, 2.1666, 4.5])
@pytest.mark.parametrize("b", [-0.5, 2 / 3, 1.5, 3.0])
@pytest.mark.parametrize("z", [0.05, 1.0, 6.0, 40.0])
def test_kummer_u_matches_mpmath(a, b, z):
    want = float(mp.hyperu(a, b, z))
    assert rel(specfun.kummer_u(a, b, z), want) < 1e-10


@given(st.floats(0.1, 3.0), st.floats(-1.0, 3.0), st.floats(0.1, 20.0))
def test_kummer_u_contiguous_relation(a, b, z):
    # U(a-1, b, z) + (b - 2a - z) U(a, b, z) + a(a - b + 1) U(a+1, b, z) = 0
    um, u0, up = (specfun.kummer_u(a + d, b, z) for d in (-1.0, 0.0, 1.0))
    scale = abs(um) + abs((b - 2 * a - z) * u0) + abs(a * (a - b + 1) * up)
    assert abs(um + (b - 2 * a - z) * u0 + a * (a - b + 1) * up) <= 1e-9 * scale


def test_whittaker_w():
    for kappa, mu, z in [(0.5, 0.25, 2.0), (-1.0, 1 / 3, 0.7)]:
        assert rel(specfun.whittaker_w(kappa, mu, z), float(mp.whitw(kappa, mu, z))) < 1e-13
