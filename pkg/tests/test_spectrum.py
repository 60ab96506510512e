from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, linalg

from besselarea import BoundaryMode, ExcursionParams, specfun, spectrum
from besselarea.errors import DomainError, ModeError

from conftest import spectrum_for


def fd_levels(a: float, n_levels: int, L: float = 18.0, N: int = 4000) -> np.ndarray:
    """Finite differences with Dirichlet ends, Richardson-extrapolated.

    The error decays like h^p with p = min(2, 2a) because of the x^{1/2+a}
    behaviour at the origin.
    """
    c = a * a - 0.25

    def levels(n):
        h = L / (n + 1)
        x = h * np.arange(1, n + 1)
        diag = 2.0 / h ** 2 + c / x ** 2 + x
        off = -np.ones(n - 1) / h ** 2
        return linalg.eigh_tridiagonal(diag, off, select="i", select_range=(0, n_levels - 1),
                                       eigvals_only=True)

    def extrapolate(coarse, fine, p):
        r = 2.0 ** p
        return (r * fine - coarse) / (r - 1)

    grids = [levels(N), levels(2 * N + 1)]
    if a >= 1.0:
        return extrapolate(*grids, 2.0)
    # both h^{2a} and h^2 error terms are present; remove them one after another
    grids.append(levels(4 * N + 3))
    p = 2.0 * a
    first = [extrapolate(grids[0], grids[1], p), extrapolate(grids[1], grids[2], p)]
    return extrapolate(*first, 2.0)


def test_airy_anchor():
    params, data = spectrum_for(0.0, 10)
    zeros = np.array([specfun.airy_zero(k) for k in range(10)])
    assert np.max(np.abs(data.lambdas - zeros)) < 1e-8
    assert np.max(np.abs(data.dks ** 2 - 1)) < 1e-6


@pytest.mark.parametrize("U0", [1.0, 2.5, 0.5])
def test_eigenvalues_match_finite_differences(U0):
    params, data = spectrum_for(U0, 150)
    a = params.a
    ref = fd_levels(a, 6)
    assert np.max(np.abs(data.lambdas[:6] - ref)) < 2e-6


def test_reduced_problem_level_frozen():
    # lowest level of -phi'' + 3/(4x^2) phi + x phi with phi ~ x^{3/2}, from the
    # finite-difference oracle above at N = 4000/8001 (frozen)
    params, data = spectrum_for(1.0, 150)
    assert abs(data.lambdas[0] - 2.8720977) < 1e-6


@pytest.mark.parametrize("U0,k", [(1.0, 0), (1.0, 3), (-0.5, 1), (2.5, 2), (0.5, 5)])
def test_origin_coefficient_by_quadrature(U0, k):
    params, data = spectrum_for(U0, 150)
    lam = float(data.lambdas[k])
    # phi ~ x^{1/2+a} at the origin; integrate phi^2 up to where the tail is negligible
    f = lambda x: spectrum.eigenfunction_eval(params, lam, x) ** 2
    edge = lam + 7.0
    pts = np.linspace(0.0, edge, 4 * (k + 2))
    norm = sum(integrate.quad(f, lo, hi, epsabs=0, epsrel=1e-11, limit=200)[0]
               for lo, hi in zip(pts[:-1], pts[1:]))
    assert abs(1.0 / math.sqrt(norm) - data.dks[k]) < 1e-7 * data.dks[k]


def test_mirror_symmetry_is_exact():
    one = spectrum.solve_spectrum(ExcursionParams(2.5), 12)
    two = spectrum.solve_spectrum(ExcursionParams(-4.5), 12)
    assert np.array_equal(one.lambdas, two.lambdas)
    assert np.array_equal(one.dks, two.dks)


@pytest.mark.parametrize("U0", [-1.0, 0.5, 2.5])
def test_shift_law_for_high_levels(U0):
    _, free = spectrum_for(0.0, 40)
    _, data = spectrum_for(U0, 40)
    k = np.arange(10, 40)
    shift = (data.lambdas[k] - free.lambdas[k]) / U0
    pred = math.pi / (4 * np.sqrt(free.lambdas[k]))
    assert np.max(np.abs(shift / pred - 1)) < 0.05


@pytest.mark.parametrize("U0", [-1.0, -0.5, 0.5])
def test_dk_asymptotics_from_k2(U0):
    params, data = spectrum_for(U0, 40)
    for k in range(2, 40):
        asym = spectrum.dk_asymptotic(params, float(data.lambdas[k]))
        assert abs(abs(data.dks[k]) / asym - 1) < 0.02


def test_continued_branch_lowest_level_small():
    params = ExcursionParams(-2.99, mode=BoundaryMode.CONTINUED)
    data = spectrum.solve_spectrum(params, 3)
    assert 0 < data.lambdas[0] < 0.02
    assert data.lambdas[1] > 2.8


def test_lambda_asymptotic_reduces_to_airy_law():
    p = ExcursionParams(0.0)
    for k in (0, 5, 50):
        want = (1.5 * math.pi * (k + 0.75)) ** (2 / 3)
        assert spectrum.lambda_asymptotic(p, k) == pytest.approx(want, rel=1e-15)


def test_argument_validation():
    p = ExcursionParams(0.0)
    with pytest.raises(DomainError):
        spectrum.solve_spectrum(p, 0)
    with pytest.raises(DomainError):
        spectrum.solve_spectrum(p, 5, tol=1e-3)
    with pytest.raises(DomainError):
        spectrum.dk_asymptotic(p, -1.0)
    with pytest.raises(ModeError):
        ExcursionParams(0.5, mode=BoundaryMode.CONTINUED)


def test_spectral_data_is_read_only():
    _, data = spectrum_for(0.0, 10)
    with pytest.raises(ValueError):
        data.lambdas[0] = 1.0


@settings(max_examples=15)
@given(st.floats(-0.99, 4.0), st.floats(0.5, 40.0), st.floats(0.1, 5.0))
def test_node_count_monotone(U0, lam, step):
    a = ExcursionParams(U0).a
    assert spectrum.node_count(a, lam, 1e-9) <= spectrum.node_count(a, lam + step, 1e-9)


@settings(max_examples=10)
@given(st.floats(-0.99, 4.0))
def test_levels_ordered_and_near_asymptotics(U0):
    params = ExcursionParams(U0)
    data = spectrum.solve_spectrum(params, 15, tol=1e-8)
    assert np.all(np.diff(data.lambdas) > 0)
    assert np.all(data.dks > 0)
    gaps = [spectrum.lambda_asymptotic(params, k + 1) - spectrum.lambda_asymptotic(params, k)
            for k in range(15)]
    for k in range(5, 15):
        assert abs(data.lambdas[k] - spectrum.lambda_asymptotic(params, k)) < 0.5 * gaps[k]
