from __future__ import annotations

import json
import math

import numpy as np
import pytest
from scipy import integrate, stats

from besselarea import BoundaryMode, ExcursionParams, distribution as dist, mcsim
from besselarea.errors import AcceptanceStarvationError, CoverageError, DomainError
from besselarea.mcsim import McConfig, McEnsemble

from conftest import spectrum_for


def _run(U0, n, seed, T=1.0, **kw):
    return mcsim.sample_excursions(McConfig.default(ExcursionParams(U0, T=T), n, seed, **kw))


@pytest.fixture(scope="module")
def small_airy():
    return _run(0.0, 3000, 11)


def test_deterministic_in_seed():
    a, b = _run(0.5, 300, 3), _run(0.5, 300, 3)
    assert np.array_equal(a.areas, b.areas) and np.array_equal(a.durations, b.durations)
    c = _run(0.5, 300, 4)
    assert not np.array_equal(a.areas, c.areas)


def test_thread_count_does_not_change_result():
    config = McConfig.default(ExcursionParams(1.0), 400, 9)
    one = mcsim.sample_excursions(config, threads=1)
    two = mcsim.sample_excursions(config, threads=3)
    assert np.array_equal(one.areas, two.areas)
    assert one.acceptance_rate == two.acceptance_rate


def test_ensemble_invariants(small_airy):
    e = small_airy
    assert e.areas.size == 3000
    assert np.all(e.areas > 0)
    assert np.all((e.durations >= 0.5) & (e.durations <= 1.0))
    assert np.all(np.diff(e.areas) >= 0)
    assert 0 < e.acceptance_rate <= 1


def test_small_sample_matches_airy_law(small_airy):
    params, data = spectrum_for(0.0)
    table = dist.tabulate(params, data, dist.default_grid(300, 0.05, 6.0), method="AiryClosed")
    report = mcsim.mc_vs_analytic(small_airy, table)
    assert report["ks_pass"]
    assert abs(report["z1"]) < 3.5 and abs(report["z2"]) < 3.5


def test_self_comparison_is_identical(small_airy):
    out = mcsim.two_sample_ks(small_airy, small_airy)
    assert out["statistic"] == 0.0 and out["pass_1pct"]


def test_coverage_error_for_narrow_table(small_airy):
    params, data = spectrum_for(0.0)
    table = dist.tabulate(params, data, dist.default_grid(40, 0.5, 1.5), method="AiryClosed")
    with pytest.raises(CoverageError):
        mcsim.mc_vs_analytic(small_airy, table)


def test_propagator_against_closed_form():
    params = ExcursionParams(0.5)
    x0, T = 1.0, 0.5
    ends, n = mcsim.sample_propagator(params, x0, T, 20_000, seed=5, dt=2.5e-4)
    g = lambda x: dist.g0_propagator(x, x0, T, params)
    survival = integrate.quad(g, 0, np.inf, limit=200)[0]
    se = math.sqrt(survival * (1 - survival) / n)
    assert abs(ends.size / n - survival) < 4 * se
    grid = np.linspace(1e-6, 6.0, 3000)
    cdf = integrate.cumulative_trapezoid([g(x) for x in grid], grid, initial=0.0) / survival
    res = stats.kstest(ends, lambda v: np.interp(v, grid, cdf))
    assert res.pvalue > 0.01


@pytest.mark.parametrize("U0", [-0.5, 1.0])
def test_propagator_survival_near_repulsive_and_attractive_origin(U0):
    params = ExcursionParams(U0)
    x0, T = 0.3, 0.5
    ends, n = mcsim.sample_propagator(params, x0, T, 20_000, seed=8, dt=1e-4)
    survival = integrate.quad(lambda x: dist.g0_propagator(x, x0, T, params), 0, np.inf, limit=200)[0]
    se = math.sqrt(survival * (1 - survival) / n)
    assert abs(ends.size / n - survival) < 4 * se


def test_mirror_pair_samples_agree():
    # U0 = -2 is sampled by plain rejection with the threshold proxy, U0 = 0 with the
    # conditioned climb; the scaled areas must nevertheless follow one law
    a, b = _run(-2.0, 800, 21), _run(0.0, 3000, 22)
    assert mcsim.two_sample_ks(a, b)["pass_1pct"]


def test_scaling_with_duration():
    short, long_ = _run(1.0, 2000, 31, T=1.0), _run(1.0, 2000, 32, T=4.0)
    assert np.median(long_.areas) / np.median(short.areas) == pytest.approx(8.0, rel=0.1)
    assert mcsim.two_sample_ks(short, long_)["pass_1pct"]


def test_csv_and_sidecar_roundtrip(small_airy):
    sidecar = json.loads(json.dumps(small_airy.sidecar()))
    back = McEnsemble.from_files(small_airy.to_csv(), sidecar)
    assert np.array_equal(back.areas, small_airy.areas)
    assert back.config == small_airy.config
    assert np.array_equal(back.scaled_areas, small_airy.scaled_areas)


def test_return_level_rule():
    assert McConfig.default(ExcursionParams(0.0), 1, 0).kill_level > 0
    assert McConfig.default(ExcursionParams(-2.0), 1, 0).kill_level > 0
    assert McConfig.default(ExcursionParams(1.0), 1, 0).kill_level == 0.0
    assert McConfig.default(ExcursionParams(-0.5), 1, 0).kill_level == 0.0
    forced = McConfig.default(ExcursionParams(1.0), 1, 0, return_level="threshold")
    assert forced.kill_level == forced.x_start


@pytest.mark.parametrize("kwargs", [
    dict(eps=0.5), dict(dt_fraction=0.1), dict(window=0.8), dict(reg_fraction=2.0),
    dict(return_level="middle"),
])
def test_config_validation(kwargs):
    with pytest.raises(DomainError):
        McConfig.default(ExcursionParams(0.0), 10, 0, **kwargs)


def test_config_rejects_continued_mode_and_origin_below_minus_one():
    with pytest.raises(DomainError):
        McConfig.default(ExcursionParams(-2.5, mode=BoundaryMode.CONTINUED), 10, 0)
    with pytest.raises(DomainError):
        McConfig.default(ExcursionParams(-1.5), 10, 0, return_level="origin")
    with pytest.raises(DomainError):
        McConfig.default(ExcursionParams(0.0), 0, 0)


def test_starvation_is_reported(monkeypatch):
    monkeypatch.setattr(mcsim, "BLOCK_ATTEMPTS", 200)
    monkeypatch.setattr(mcsim, "PROBE_ATTEMPTS", 200)
    monkeypatch.setattr(mcsim, "MIN_ACCEPTANCE", 2.0)
    with pytest.raises(AcceptanceStarvationError):
        _run(0.0, 10_000, 0)


def test_bias_ladder_non_increasing():
    # halve dt and the window together; the KS distance may only grow within noise
    params, data = spectrum_for(1.0)
    table = dist.tabulate(params, data, dist.default_grid(300, 0.02, 6.0))
    n = 2000
    ks = []
    for rung, (dt_fraction, window) in enumerate([(8e-4, 0.5), (4e-4, 0.25), (2e-4, 0.125)]):
        config = McConfig.default(params, n, 40 + rung, dt_fraction=dt_fraction, window=window)
        ks.append(mcsim.mc_vs_analytic(mcsim.sample_excursions(config), table)["ks_statistic"])
    allowance = 1.0 / math.sqrt(n)
    assert ks[1] <= ks[0] + allowance and ks[2] <= ks[1] + allowance, ks
