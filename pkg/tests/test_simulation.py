import csv
import io
import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zib import simulation
from zib.mcmc import ChainConfig
from zib.model import CoefVector, ZibParams, inv_logit
from zib.simulation import (COVARIATE, NOCOVARIATE, SimScenario, covariate_grid, generate_zib_cov,
                            generate_zib_nocov, nocov_grid, study_covariate_grid, study_nocov_grid,
                            results_to_csv, run_grid, run_scenario)

TINY_CHAINS = ChainConfig(n_chains=2, iterations=300, warmup=200)
REFERENCE_ROW = CoefVector(np.array([-0.5, -2.0, -3.0]), np.array([0.5, 2.0, 3.0]))


# --- generators -------------------------------------------------------------------

def test_saturated_generators(rng):
    all_one = generate_zib_cov(CoefVector([50.0, 0, 0], [50.0, 0, 0]), 500, rng)
    assert np.all(all_one.y == 1)
    none = generate_zib_cov(CoefVector([-50.0, 0, 0], [0.5, 2, 3]), 500, rng)
    assert np.all(none.y == 0)
    assert none.x_names == ("x1", "x2") and none.z_names == ("x3", "x4")


def test_generated_marginal_matches_integral_oracle():
    data = generate_zib_cov(REFERENCE_ROW, 1_000_000, np.random.default_rng(8))
    # independent Monte Carlo integral of E[omega(x) p(z)]
    oracle_rng = np.random.default_rng(99)
    m = 2_000_000
    X = oracle_rng.standard_normal((m, 2))
    Z = oracle_rng.standard_normal((m, 2))
    expected = np.mean(inv_logit(-0.5 + X @ [-2.0, -3.0]) * inv_logit(0.5 + Z @ [2.0, 3.0]))
    assert data.y.mean() == pytest.approx(expected, abs=0.003)


def test_nocov_generator(rng):
    assert generate_zib_nocov(ZibParams(0.0, 0.7), 1000, rng).s == 0
    assert generate_zib_nocov(ZibParams(1.0, 1.0), 1000, rng).s == 1000
    st_ = generate_zib_nocov(ZibParams(0.4, 0.9), 1_000_000, rng)
    assert st_.s / st_.n == pytest.approx(0.36, abs=0.002)


def test_mean_outcome_over_replicates():
    sc = SimScenario(COVARIATE, REFERENCE_ROW, 2000, 30, seed=4)
    means = [generate_zib_cov(sc.truth, sc.n, simulation._replicate_rng(sc.seed, r, 0)).y.mean()
             for r in range(sc.replicates)]
    oracle_rng = np.random.default_rng(1)
    X, Z = oracle_rng.standard_normal((10**6, 2)), oracle_rng.standard_normal((10**6, 2))
    expected = np.mean(inv_logit(-0.5 + X @ [-2.0, -3.0]) * inv_logit(0.5 + Z @ [2.0, 3.0]))
    se = np.std(means, ddof=1) / math.sqrt(len(means))
    assert abs(np.mean(means) - expected) < 4 * se + 1e-3


# --- scenarios ---------------------------------------------------------------------------

def test_scenario_validation():
    with pytest.raises(ValueError):
        SimScenario("other", ZibParams(0.3, 0.8), 100)
    with pytest.raises(ValueError):
        SimScenario(NOCOVARIATE, REFERENCE_ROW, 100)
    with pytest.raises(ValueError):
        SimScenario(NOCOVARIATE, ZibParams(0.3, 0.8), 100, replicates=0)


def test_reference_scenario_nocov():
    res = run_scenario(SimScenario(NOCOVARIATE, ZibParams(0.3, 0.8), 1500, 20, seed=7))
    assert res.avg_median["omega"] == pytest.approx(0.36, abs=0.05)
    assert res.avg_median["p"] == pytest.approx(0.72, abs=0.05)
    assert res.avg_q025["omega"] == pytest.approx(0.26, abs=0.05)
    assert res.avg_q975["p"] == pytest.approx(0.98, abs=0.05)
    assert res.n_failed == 0


def test_single_replicate_determinism():
    sc = SimScenario(COVARIATE, REFERENCE_ROW, 300, 1, seed=5)
    a = run_scenario(sc, TINY_CHAINS)
    b = run_scenario(sc, TINY_CHAINS)
    assert results_to_csv([a]) == results_to_csv([b])


def test_thread_count_does_not_change_results():
    grid = nocov_grid([0.2, 0.4], [0.7], n=[300], replicates=3, seed=1)
    a = run_grid(grid, workers=1)
    b = run_grid(grid, workers=2)
    assert results_to_csv(a) == results_to_csv(b)
    cov = [SimScenario(COVARIATE, REFERENCE_ROW, 200, 2, seed=3)]
    assert results_to_csv(run_grid(cov, TINY_CHAINS, workers=1)) == \
        results_to_csv(run_grid(cov, TINY_CHAINS, workers=2))


def test_grid_sizes_and_order():
    assert len(study_covariate_grid(n=1500)) == 81
    assert len(study_covariate_grid(n=[500, 1500])) == 162
    assert len(study_nocov_grid(n=1500)) == 16
    cells = study_nocov_grid(n=500)
    assert [(c.truth.omega, c.truth.p) for c in cells[:5]] == [
        (0.1, 0.6), (0.1, 0.7), (0.1, 0.8), (0.1, 0.9), (0.2, 0.6)]
    first = study_covariate_grid()[0]
    assert first.true_values == {"beta0": 0.5, "beta1": 2.0, "beta2": 3.0,
                                 "theta0": -0.5, "theta1": -2.0, "theta2": -3.0}


def test_empty_grids_rejected():
    with pytest.raises(ValueError):
        nocov_grid([], [0.8], n=100)
    with pytest.raises(ValueError):
        covariate_grid([0.5], [2], [3], [], [-2], [-3], n=100)
    with pytest.raises(ValueError):
        run_grid([])


def test_progress_reports_every_cell_in_grid_order():
    seen = []
    grid = nocov_grid([0.2, 0.3, 0.4], [0.8], n=200, replicates=2)
    run_grid(grid, progress=lambda c, res: seen.append((c, res.scenario.truth.omega)))
    assert seen == [(0, 0.2), (1, 0.3), (2, 0.4)]


def test_failed_replicates_counted_and_excluded(monkeypatch, caplog):
    calls = {"n": 0}
    real = simulation.fit_nocov

    def flaky(stats, prior):
        calls["n"] += 1
        if calls["n"] == 2:
            raise ArithmeticError("synthetic failure")
        return real(stats, prior)

    monkeypatch.setattr(simulation, "fit_nocov", flaky)
    with caplog.at_level(logging.WARNING, logger="zib.simulation"):
        res = run_scenario(SimScenario(NOCOVARIATE, ZibParams(0.3, 0.8), 300, 4, seed=2))
    assert res.n_failed == 1
    assert len(res.replicate_estimates) == 4 and res.replicate_estimates[1] is None
    assert any("excluded" in r.message for r in caplog.records)
    assert math.isfinite(res.avg_median["omega"])


@given(w=st.floats(0.05, 0.45), p=st.floats(0.55, 0.95), n=st.integers(50, 2000),
       seed=st.integers(0, 2**31))
@settings(max_examples=15, deadline=None)
def test_result_invariants(w, p, n, seed):
    res = run_scenario(SimScenario(NOCOVARIATE, ZibParams(w, p), n, 3, seed=seed))
    for name in ("omega", "p"):
        assert res.avg_q025[name] <= res.avg_median[name] <= res.avg_q975[name]
        assert 0.0 <= res.coverage95[name] <= 1.0


# --- large-n behaviour ----------------------------------------------------------------

def test_medians_converge_to_identified_set_limit():
    # omega * p = 0.24 is identified; along that curve the posterior is
    # proportional to 1/omega on [0.24/p_hi, 0.24/p_lo] = [0.24, 0.48],
    # so medians tend to the geometric mean of those ends, not to (0.3, 0.8)
    limit_w = math.sqrt(0.24 * 0.48)
    limit_p = 0.24 / limit_w
    err_w, err_p = [], []
    for n in (500, 1500, 15000):
        res = run_scenario(SimScenario(NOCOVARIATE, ZibParams(0.3, 0.8), n, 20, seed=11))
        err_w.append(abs(res.avg_median["omega"] - limit_w))
        err_p.append(abs(res.avg_median["p"] - limit_p))
    assert err_w[0] > err_w[1] > err_w[2]
    assert err_p[0] > err_p[1] > err_p[2]
    assert err_w[2] < 0.002 and err_p[2] < 0.004


def test_boundary_truth_is_attenuated():
    res = run_scenario(SimScenario(NOCOVARIATE, ZibParams(0.4, 0.9), 1500, 20, seed=3))
    assert res.avg_median["omega"] < 0.5
    assert 0.40 < res.avg_median["omega"] < 0.47
    assert res.avg_median["p"] < 0.9


# --- output -------------------------------------------------------------------------

def test_csv_layout():
    res = run_grid(nocov_grid([0.3], [0.8, 0.9], n=200, replicates=2))
    rows = list(csv.reader(io.StringIO(results_to_csv(res))))
    assert rows[0] == ["mode", "n", "replicates", "omega", "p", "median_omega", "median_p",
                       "q025_omega", "q025_p", "q975_omega", "q975_p", "coverage95_omega",
                       "coverage95_p", "n_failed"]
    assert len(rows) == 3
    assert rows[1][:5] == ["nocovariate", "200", "2", "0.3", "0.8"]
    assert float(rows[1][5]) == res[0].avg_median["omega"]


def test_csv_rejects_mixed_layouts():
    a = run_grid(nocov_grid([0.3], [0.8], n=100, replicates=1))
    b = run_grid([SimScenario(COVARIATE, REFERENCE_ROW, 150, 1)], TINY_CHAINS)
    with pytest.raises(ValueError):
        results_to_csv(a + b)
