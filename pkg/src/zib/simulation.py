"""Simulation harness: generate ZIB data, refit, aggregate over replicates.

Each replicate draws its data and its chain seeds from
``SeedSequence(scenario.seed, spawn_key=(replicate, stream))``, so replicates
and grid cells can run in any order, or in parallel, and still give the same
table.
"""

from __future__ import annotations

import csv
import io
import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .analytic import fit_nocov
from .mcmc import ChainConfig, fit_covariate
from .model import CoefVector, Dataset, PriorConfig, SufficientStats, ZibParams, inv_logit

log = logging.getLogger(__name__)

COVARIATE = "covariate"
NOCOVARIATE = "nocovariate"

STUDY_COV_GRID = {
    "beta0": [0.5, 1.0, 2.0],
    "beta1": [2.0, 3.0, 4.0],
    "beta2": [3.0],
    "theta0": [-0.5, -1.0, -2.0],
    "theta1": [-2.0, -3.0, -4.0],
    "theta2": [-3.0],
}
STUDY_NOCOV_GRID = {
    "omega": [0.1, 0.2, 0.3, 0.4],
    "p": [0.6, 0.7, 0.8, 0.9],
}
STUDY_SAMPLE_SIZES = [500, 1500]


@dataclass(frozen=True)
class SimScenario:
    mode: str
    truth: CoefVector | ZibParams
    n: int
    replicates: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.mode not in (COVARIATE, NOCOVARIATE):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == COVARIATE and not isinstance(self.truth, CoefVector):
            raise ValueError("covariate scenarios need a CoefVector truth")
        if self.mode == NOCOVARIATE and not isinstance(self.truth, ZibParams):
            raise ValueError("no-covariate scenarios need a ZibParams truth")
        if self.n < 1 or self.replicates < 1:
            raise ValueError("n and replicates must be positive")

    @property
    def param_names(self) -> list[str]:
        if self.mode == NOCOVARIATE:
            return ["omega", "p"]
        return ([f"beta{j}" for j in range(self.truth.beta.size)]
                + [f"theta{j}" for j in range(self.truth.theta.size)])

    @property
    def true_values(self) -> dict[str, float]:
        if self.mode == NOCOVARIATE:
            return {"omega": self.truth.omega, "p": self.truth.p}
        values = [*self.truth.beta, *self.truth.theta]
        return dict(zip(self.param_names, map(float, values)))


@dataclass
class SimResult:
    scenario: SimScenario
    avg_median: dict
    avg_q025: dict
    avg_q975: dict
    coverage95: dict
    n_failed: int
    replicate_estimates: list = field(default_factory=list, repr=False)


# ---------------------------------------------------------------------------
# data generation

def generate_zib_cov(coefs: CoefVector, n: int, rng: np.random.Generator) -> Dataset:
    """Standard-normal covariates for both parts, latent exposure, observed y only."""
    k, q = coefs.theta.size - 1, coefs.beta.size - 1
    X = rng.standard_normal((n, k))
    Z = rng.standard_normal((n, q))
    omega = inv_logit(coefs.theta[0] + X @ coefs.theta[1:])
    p = inv_logit(coefs.beta[0] + Z @ coefs.beta[1:])
    exposed = rng.random(n) < omega
    event = rng.random(n) < p
    y = (exposed & event).astype(np.int64)
    x_names = tuple(f"x{j + 1}" for j in range(k))
    z_names = tuple(f"x{k + j + 1}" for j in range(q))
    return Dataset(y, X, Z, x_names, z_names)


def generate_zib_nocov(params: ZibParams, n: int, rng: np.random.Generator) -> SufficientStats:
    return SufficientStats(n, int(rng.binomial(n, params.omega * params.p)))


# ---------------------------------------------------------------------------
# replicates

def _replicate_rng(seed: int, replicate: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replicate, stream)))


def _replicate_chain_seed(seed: int, replicate: int) -> int:
    ss = np.random.SeedSequence(seed, spawn_key=(replicate, 1))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def fit_replicate(scenario: SimScenario, replicate: int, fit_config: ChainConfig,
                  prior: PriorConfig = PriorConfig()):
    """Return ``({name: (median, q025, q975)}, failed)`` for one replicate."""
    rng = _replicate_rng(scenario.seed, replicate, 0)
    if scenario.mode == NOCOVARIATE:
        stats = generate_zib_nocov(scenario.truth, scenario.n, rng)
        fit = fit_nocov(stats, prior)
        est = {"omega": fit.omega_summary, "p": fit.p_summary}
        return {k: (v.median, v.q025, v.q975) for k, v in est.items()}, False

    data = generate_zib_cov(scenario.truth, scenario.n, rng)
    config = replace(fit_config, seed=_replicate_chain_seed(scenario.seed, replicate))
    fit = fit_covariate(data, prior, config)
    k1 = scenario.truth.theta.size
    order = list(fit.draws.param_names)
    names = order[k1:] + order[:k1]   # beta block first, as in the result table
    out = {}
    for sim_name, model_name in zip(scenario.param_names, names):
        s = fit.summaries[model_name]
        out[sim_name] = (s.median, s.q025, s.q975)
    return out, not fit.diagnostics.converged()


def _safe_fit(scenario, replicate, fit_config, prior):
    try:
        return fit_replicate(scenario, replicate, fit_config, prior)
    except Exception as exc:  # recorded as a failed replicate, never dropped silently
        log.warning("replicate %d of %s failed: %s", replicate, scenario, exc)
        return None, True


def aggregate(scenario: SimScenario, outcomes: Sequence) -> SimResult:
    names = scenario.param_names
    truth = scenario.true_values
    kept = [est for est, failed in outcomes if est is not None and not failed]
    n_failed = len(outcomes) - len(kept)
    if n_failed:
        log.warning("%d of %d replicates excluded from averages (failed diagnostics)",
                    n_failed, len(outcomes))
    if kept:
        arr = np.array([[est[nm] for nm in names] for est in kept])   # (r, params, 3)
        med, lo, hi = arr[..., 0].mean(0), arr[..., 1].mean(0), arr[..., 2].mean(0)
        tv = np.array([truth[nm] for nm in names])
        cov = ((arr[..., 1] <= tv) & (tv <= arr[..., 2])).mean(0)
    else:
        med = lo = hi = cov = np.full(len(names), math.nan)
    as_dict = lambda v: {nm: float(x) for nm, x in zip(names, v)}
    return SimResult(scenario, as_dict(med), as_dict(lo), as_dict(hi), as_dict(cov), n_failed,
                     [est for est, _ in outcomes])


def run_scenario(scenario: SimScenario, fit_config: ChainConfig = ChainConfig(),
                 prior: PriorConfig = PriorConfig(), workers: int = 1) -> SimResult:
    """Generate, fit and aggregate every replicate of one scenario."""
    return run_grid([scenario], fit_config, prior, workers)[0]


def run_grid(scenarios: Sequence[SimScenario], fit_config: ChainConfig = ChainConfig(),
             prior: PriorConfig = PriorConfig(), workers: int = 1,
             progress: Callable[[int, SimResult], None] | None = None) -> list[SimResult]:
    """Run every cell; rows come back in grid order whatever the completion order."""
    scenarios = list(scenarios)
    if not scenarios:
        raise ValueError("empty simulation grid")
    tasks = [(c, r) for c, sc in enumerate(scenarios) for r in range(sc.replicates)]
    outcomes = [[None] * sc.replicates for sc in scenarios]
    remaining = [sc.replicates for sc in scenarios]
    results: list = [None] * len(scenarios)

    def finish(c, r, outcome):
        outcomes[c][r] = outcome
        remaining[c] -= 1
        if remaining[c] == 0:
            results[c] = aggregate(scenarios[c], outcomes[c])
            if progress is not None:
                progress(c, results[c])

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(_safe_fit, scenarios[c], r, fit_config, prior): (c, r)
                       for c, r in tasks}
            for fut in as_completed(futures):
                c, r = futures[fut]
                finish(c, r, fut.result())
    else:
        for c, r in tasks:
            finish(c, r, _safe_fit(scenarios[c], r, fit_config, prior))
    return results


# ---------------------------------------------------------------------------
# grids and output

def _values(name, values) -> list:
    values = list(values)
    if not values:
        raise ValueError(f"empty value list for {name}")
    return values


def covariate_grid(beta0, beta1, beta2, theta0, theta1, theta2, n, replicates: int = 100,
                   seed: int = 0) -> list[SimScenario]:
    """Cartesian product in table order (beta0, beta1, theta0, theta1 outermost first)."""
    ns = _values("n", n if isinstance(n, Iterable) else [n])
    lists = [_values(k, v) for k, v in
             (("beta0", beta0), ("beta1", beta1), ("beta2", beta2),
              ("theta0", theta0), ("theta1", theta1), ("theta2", theta2))]
    cells = []
    for size in ns:
        for b0, b1, t0, t1, b2, t2 in itertools.product(lists[0], lists[1], lists[3], lists[4],
                                                        lists[2], lists[5]):
            truth = CoefVector(theta=[t0, t1, t2], beta=[b0, b1, b2])
            cells.append(SimScenario(COVARIATE, truth, int(size), replicates, seed))
    return cells


def nocov_grid(omega, p, n, replicates: int = 100, seed: int = 0) -> list[SimScenario]:
    ns = _values("n", n if isinstance(n, Iterable) else [n])
    omegas, ps = _values("omega", omega), _values("p", p)
    return [SimScenario(NOCOVARIATE, ZibParams(float(w), float(pp)), int(size), replicates, seed)
            for size in ns for w in omegas for pp in ps]


def study_covariate_grid(n=1500, replicates: int = 100, seed: int = 0) -> list[SimScenario]:
    return covariate_grid(n=n, replicates=replicates, seed=seed, **STUDY_COV_GRID)


def study_nocov_grid(n=1500, replicates: int = 100, seed: int = 0) -> list[SimScenario]:
    return nocov_grid(n=n, replicates=replicates, seed=seed, **STUDY_NOCOV_GRID)


def result_header(results: Sequence[SimResult]) -> list[str]:
    sc = results[0].scenario
    names = sc.param_names
    return (["mode", "n", "replicates"] + names
            + [f"median_{nm}" for nm in names] + [f"q025_{nm}" for nm in names]
            + [f"q975_{nm}" for nm in names] + [f"coverage95_{nm}" for nm in names]
            + ["n_failed"])


def results_to_csv(results: Sequence[SimResult]) -> str:
    """CSV text, one row per cell. All rows must share a mode and parameter layout."""
    header = result_header(results)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for res in results:
        sc = res.scenario
        names = sc.param_names
        if result_header([res]) != header:
            raise ValueError("cannot mix scenario layouts in one table")
        truth = sc.true_values
        row = [sc.mode, sc.n, sc.replicates] + [repr(truth[nm]) for nm in names]
        for block in (res.avg_median, res.avg_q025, res.avg_q975, res.coverage95):
            row += [repr(block[nm]) for nm in names]
        row.append(res.n_failed)
        writer.writerow(row)
    return buf.getvalue()
