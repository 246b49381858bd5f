import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as sp_integrate

from oracles import joint_marginals, unnorm_omega_direct, unnorm_p_direct
from zib.analytic import (Param, PosteriorSummary, build_marginal, density_grids_for_plotting,
                          fit_nocov, summarize, unnorm_marginal_omega, unnorm_marginal_p)
from zib.model import PriorConfig, SufficientStats, ZibParams
from zib.simulation import generate_zib_nocov

DEFAULT = PriorConfig()
SURVEY = SufficientStats(1564, 433)


# --- unnormalized kernels -------------------------------------------------------

def test_no_data_kernels_are_flat():
    none = SufficientStats(0, 0)
    assert unnorm_marginal_omega(none, DEFAULT, 0.3) == pytest.approx(0.5, rel=1e-14)
    assert unnorm_marginal_p(none, DEFAULT, 0.7) == pytest.approx(0.5, rel=1e-14)
    for w in (0.01, 0.2, 0.5):
        assert unnorm_marginal_omega(none, DEFAULT, w) == pytest.approx(0.5, rel=1e-12)
    for p in (0.5, 0.8, 1.0):
        assert unnorm_marginal_p(none, DEFAULT, p) == pytest.approx(0.5, rel=1e-12)


def test_omega_kernel_matches_direct_integral_up_to_constant():
    ws = np.linspace(0.2, 0.5, 31)
    got = np.log([unnorm_marginal_omega(SURVEY, DEFAULT, w) for w in ws])
    ref = np.array([unnorm_omega_direct(1564, 433, w) for w in ws])
    offset = np.mean(got - ref)
    np.testing.assert_allclose(np.exp(got - ref - offset), 1.0, atol=1e-6)


def test_p_kernel_matches_direct_integral_up_to_constant():
    ps = np.linspace(0.52, 1.0, 25)
    got = np.log([unnorm_marginal_p(SURVEY, DEFAULT, p) for p in ps])
    ref = np.array([unnorm_p_direct(1564, 433, p) for p in ps])
    offset = np.mean(got - ref)
    np.testing.assert_allclose(np.exp(got - ref - offset), 1.0, atol=1e-6)


def test_all_ones_increasing_in_omega():
    ws = np.linspace(0.01, 0.5, 60)
    vals = [unnorm_marginal_omega(SufficientStats(10, 10), DEFAULT, w) for w in ws]
    assert np.all(np.diff(vals) > 0)


def test_all_zeros_decreasing_in_p():
    ps = np.linspace(0.5, 1.0, 60)
    vals = [unnorm_marginal_p(SufficientStats(5, 0), DEFAULT, p) for p in ps]
    assert np.all(np.diff(vals) < 0)
    ref = [math.exp(unnorm_p_direct(5, 0, p)) for p in ps]
    np.testing.assert_allclose(np.array(vals) / vals[0], np.array(ref) / ref[0], rtol=1e-6)


@pytest.mark.parametrize("value", [0.0, -0.1, 0.7])
def test_omega_kernel_domain(value):
    with pytest.raises(ValueError):
        unnorm_marginal_omega(SURVEY, DEFAULT, value)


@pytest.mark.parametrize("value", [0.0, -0.3, 0.2])
def test_p_kernel_domain(value):
    with pytest.raises(ValueError):
        unnorm_marginal_p(SURVEY, DEFAULT, value)


# --- build_marginal --------------------------------------------------------------

def test_prior_recovery_is_exact():
    none = SufficientStats(0, 0)
    mw = build_marginal(none, DEFAULT, "omega")
    mp = build_marginal(none, DEFAULT, "p")
    assert mw.norm_const == pytest.approx(0.25, rel=1e-12)
    for x, d in mw.grid[::97]:
        assert d == pytest.approx(2.0, rel=1e-12)
    for x, d in mp.grid[::97]:
        assert d == pytest.approx(2.0, rel=1e-12)
    assert mw.cdf(0.2) == pytest.approx(0.4, abs=1e-12)


def test_survey_marginal_normalized_with_interior_mode():
    m = build_marginal(SURVEY, DEFAULT, Param.OMEGA)
    xs, dens = np.array(m.grid).T
    assert sp_integrate.simpson(dens, x=xs) == pytest.approx(1.0, abs=1e-8)
    mode = xs[np.argmax(dens)]
    assert 0.27 < mode < 0.49


@pytest.mark.parametrize("stats", [SufficientStats(0, 0), SufficientStats(20, 10), SURVEY,
                                   SufficientStats(3, 3), SufficientStats(2000, 0)])
@pytest.mark.parametrize("which", list(Param))
def test_cdf_invariants(stats, which):
    m = build_marginal(stats, DEFAULT, which)
    lo, hi = m.support
    assert m.cdf(lo) == 0.0
    assert m.cdf(hi) == pytest.approx(1.0, abs=1e-8)
    table = m.cdf_table
    assert np.all(np.diff(table) >= 0)
    assert all(d >= 0 for _, d in m.grid)
    xs = np.linspace(lo, hi, 301)
    assert np.all(np.diff([m.cdf(x) for x in xs]) >= -1e-15)


def test_cdf_matches_independent_cumulative_simpson():
    n, s = 20, 10
    m = build_marginal(SufficientStats(n, s), DEFAULT, "p")
    grid = np.linspace(0.5, 1.0, 4001)
    f = np.array([sp_integrate.quad(lambda w: (w * p) ** s * (1 - w * p) ** (n - s), 0, 0.5,
                                    epsabs=0, epsrel=1e-13)[0] for p in grid])
    # cumulative Simpson over pairs of cells
    h = grid[1] - grid[0]
    pair = h / 3.0 * (f[:-2:2] + 4 * f[1:-1:2] + f[2::2])
    cum = np.concatenate([[0.0], np.cumsum(pair)])
    cum /= cum[-1]
    for i in range(0, cum.size, 100):
        assert m.cdf(grid[2 * i]) == pytest.approx(cum[i], abs=1e-7)


def test_generalized_box_matches_2d_quadrature():
    prior = PriorConfig(omega_lo=0.1, omega_hi=0.9, p_lo=0.2, p_hi=0.7)
    n, s = 30, 9
    dw, dp = joint_marginals(n, s, prior.omega_box, prior.p_box)
    mw = build_marginal(SufficientStats(n, s), prior, "omega")
    mp = build_marginal(SufficientStats(n, s), prior, "p")
    for w in np.linspace(0.12, 0.88, 9):
        assert mw.density(w) == pytest.approx(dw(w), rel=1e-6)
    for p in np.linspace(0.22, 0.68, 9):
        assert mp.density(p) == pytest.approx(dp(p), rel=1e-6)


# --- summaries ---------------------------------------------------------------------

def test_uniform_summary():
    summ = summarize(build_marginal(SufficientStats(0, 0), DEFAULT, "omega"))
    assert summ.median == pytest.approx(0.25, abs=1e-9)
    assert summ.q025 == pytest.approx(0.0125, abs=1e-9)
    assert summ.q975 == pytest.approx(0.4875, abs=1e-9)
    assert summ.mean == pytest.approx(0.25, abs=1e-10)


def test_survey_summaries():
    fit = fit_nocov(SURVEY)
    w, p = fit.omega_summary, fit.p_summary
    assert w.median == pytest.approx(0.37, abs=0.01)
    assert w.q025 == pytest.approx(0.27, abs=0.01)
    assert w.q975 == pytest.approx(0.49, abs=0.01)
    assert p.median == pytest.approx(0.74, abs=0.02)
    assert p.q025 == pytest.approx(0.55, abs=0.02)
    assert p.q975 == pytest.approx(0.99, abs=0.02)


@given(n=st.integers(0, 3000), frac=st.floats(0, 1))
@settings(max_examples=25, deadline=None)
def test_summary_ordering_and_quantile_consistency(n, frac):
    stats = SufficientStats(n, int(round(frac * n)))
    fit = fit_nocov(stats)
    for marg, summ in ((fit.omega, fit.omega_summary), (fit.p, fit.p_summary)):
        lo, hi = marg.support
        assert lo <= summ.q025 <= summ.median <= summ.q975 <= hi
        assert lo <= summ.mean <= hi
        assert marg.cdf(summ.median) == pytest.approx(0.5, abs=1e-8)
        assert marg.cdf(summ.q025) == pytest.approx(0.025, abs=1e-8)


def test_summary_as_dict():
    s = PosteriorSummary(0.5, 0.1, 0.9, 0.45)
    assert s.as_dict() == {"median": 0.5, "q025": 0.1, "q975": 0.9, "mean": 0.45}


# --- large-n behaviour ---------------------------------------------------------------

def _identified_set_width(omega, p, prior=DEFAULT, level=0.95):
    # with omega*p = t known exactly, the posterior along the curve is
    # proportional to 1/omega on [max(w_lo, t/p_hi), min(w_hi, t/p_lo)]
    t = omega * p
    a, b = max(prior.omega_lo, t / prior.p_hi), min(prior.omega_hi, t / prior.p_lo)
    tail = (1 - level) / 2
    return a * (b / a) ** (1 - tail) - a * (b / a) ** tail


def test_interval_width_tends_to_identified_set_limit():
    rng = np.random.default_rng(2)
    limit = _identified_set_width(0.3, 0.8)
    widths = []
    for n in (500, 5000, 50000):
        summ = fit_nocov(generate_zib_nocov(ZibParams(0.3, 0.8), n, rng)).omega_summary
        widths.append(summ.q975 - summ.q025)
    # omega is only partly identified: the width cannot shrink to 0
    assert abs(widths[-1] - limit) < 0.005
    assert widths[0] > limit - 0.005


# --- plotting grids ------------------------------------------------------------------

def _columns(rows, name):
    sel = [r for r in rows if r[0] == name]
    return (np.array([r[1] for r in sel]), np.array([r[2] for r in sel]), np.array([r[3] for r in sel]))


def test_density_grid_no_data_identical_columns():
    rows = density_grids_for_plotting(SufficientStats(0, 0), DEFAULT, points=257)
    for name in ("omega", "p"):
        x, prior, post = _columns(rows, name)
        np.testing.assert_allclose(post, prior, rtol=1e-12)


def test_density_grid_survey_learns_and_integrates():
    rows = density_grids_for_plotting(SURVEY, DEFAULT)
    assert {r[0] for r in rows} == {"omega", "p"}
    for name in ("omega", "p"):
        x, prior, post = _columns(rows, name)
        assert np.all(post >= 0) and np.all(prior >= 0)
        assert np.trapezoid(post, x) == pytest.approx(1.0, abs=1e-6)
        assert np.trapezoid(prior, x) == pytest.approx(1.0, abs=1e-12)
        tv = 0.5 * np.trapezoid(np.abs(post - prior), x)
        assert tv > 0.1


def test_density_grid_prior_override():
    rows = density_grids_for_plotting(SufficientStats(50, 10), PriorConfig(omega_hi=1.0), points=101)
    _, prior, _ = _columns(rows, "omega")
    assert np.all(prior == 1.0)
