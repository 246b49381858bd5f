"""Adaptive random-walk Metropolis with convergence diagnostics.

Sampling happens on an unconstrained scale: each bounded coordinate goes
through a scaled logit and the target is corrected by the log-Jacobian of the
inverse map. During warmup the proposal covariance tracks the empirical
covariance of the chain (scaled by 2.38^2/d) and a global step multiplier is
tuned towards the target acceptance rate; both are frozen afterwards.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .analytic import PosteriorSummary
from .model import CovariateModel, Dataset, PriorConfig, SufficientStats, loglik_nocov, ZibParams
from .specfun import beta_ppf

log = logging.getLogger(__name__)

_ADAPT_EVERY = 50


class SamplerError(RuntimeError):
    """Raised when no chain can be initialized at a finite target value."""


@dataclass(frozen=True)
class ChainConfig:
    n_chains: int = 4
    iterations: int = 2000
    warmup: int = 1000
    seed: int = 20240517
    target_accept: float = 0.30
    init_jitter: float = 0.5
    adapt: bool = True
    thin: int = 1

    def __post_init__(self):
        if self.n_chains < 1 or self.iterations < 1 or self.warmup < 0:
            raise ValueError("n_chains and iterations must be positive, warmup non-negative")
        if self.adapt and self.warmup < 100:
            raise ValueError("warmup must be >= 100 when adaptation is enabled")
        if not (0.0 < self.target_accept < 1.0):
            raise ValueError("target_accept must lie in (0, 1)")
        if not (0 <= self.seed < 2**64):
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.init_jitter <= 0:
            raise ValueError("init_jitter must be positive")


# ---------------------------------------------------------------------------
# transforms

def _bounds(supports):
    lo = np.array([-np.inf if s is None or s[0] is None else s[0] for s in supports], dtype=float)
    hi = np.array([np.inf if s is None or s[1] is None else s[1] for s in supports], dtype=float)
    bounded = np.isfinite(lo) & np.isfinite(hi)
    if np.any(np.isfinite(lo) != np.isfinite(hi)):
        raise ValueError("half-bounded supports are not supported")
    if np.any(hi[bounded] <= lo[bounded]):
        raise ValueError("each support needs lo < hi")
    return lo, hi, bounded


def _log_sigmoid(u):
    return -np.logaddexp(0.0, -u)


def transform_to_unconstrained(params, supports) -> np.ndarray:
    """Scaled logit per bounded coordinate; identity for unbounded ones."""
    x = np.asarray(params, dtype=float)
    lo, hi, bounded = _bounds(supports)
    u = x.copy()
    if bounded.any():
        frac = (x[bounded] - lo[bounded]) / (hi[bounded] - lo[bounded])
        if np.any(frac <= 0.0) or np.any(frac >= 1.0):
            raise ValueError("parameters must lie strictly inside their supports")
        u[bounded] = np.log(frac) - np.log1p(-frac)
    return u


def transform_back(u, supports) -> tuple[np.ndarray, float]:
    """Inverse of :func:`transform_to_unconstrained` and its log-Jacobian."""
    return _back(np.asarray(u, dtype=float), *_bounds(supports))


def _back(u, lo, hi, bounded):
    x = u.copy()
    log_jac = 0.0
    if bounded.any():
        ub = u[bounded]
        width = hi[bounded] - lo[bounded]
        ls_pos, ls_neg = _log_sigmoid(ub), _log_sigmoid(-ub)
        x[bounded] = lo[bounded] + width * np.exp(ls_pos)
        log_jac = float(np.sum(np.log(width) + ls_pos + ls_neg))
    return x, log_jac


# ---------------------------------------------------------------------------
# sampler

@dataclass
class ChainDraws:
    param_names: list
    draws: np.ndarray          # (n_chains, iterations, n_params), constrained scale
    accept_rate: np.ndarray    # (n_chains,) post-warmup
    proposal_cov: np.ndarray   # (n_chains, d, d) frozen proposal covariance
    proposal_trace: list | None = None

    @property
    def n_chains(self) -> int:
        return self.draws.shape[0]

    def param(self, name) -> np.ndarray:
        return self.draws[:, :, self.param_names.index(name)]


def _chol(cov):
    d = cov.shape[0]
    jitter = 1e-12 * max(1.0, float(np.trace(cov)) / d)
    for _ in range(12):
        try:
            return np.linalg.cholesky(cov + jitter * np.eye(d))
        except np.linalg.LinAlgError:
            jitter *= 10.0
    return np.diag(np.sqrt(np.maximum(np.diag(cov), 1e-12)))


def _chain_rng(seed: int, chain: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chain,)))


def _run_chain(chain, log_target, supports, u_init, init_cov, config, record):
    rng = _chain_rng(config.seed, chain)
    d = u_init.size
    bounds = _bounds(supports)
    if not bounds[2].any():
        def back(u):
            return u, 0.0
    else:
        def back(u):
            return _back(u, *bounds)

    def log_post(u):
        x, lj = back(u)
        value = log_target(x)
        if value is None or math.isnan(value):
            return -math.inf, x
        return value + lj, x

    lp = -math.inf
    for _ in range(100):
        u = u_init + config.init_jitter * rng.standard_normal(d)
        lp, x = log_post(u)
        if math.isfinite(lp):
            break
    else:
        raise SamplerError(f"chain {chain}: target not finite at 100 jittered initial points")

    total = config.warmup + config.iterations * config.thin
    noise = rng.standard_normal((total, d))
    log_unif = np.log(rng.random(total))

    scale = 2.38**2 / d
    base_cov = np.array(init_cov, dtype=float)
    chol = _chol(scale * base_cov)
    log_lam = 0.0
    window_start = config.warmup // 4
    last_update = config.warmup - 100
    w_n, w_mean, w_m2 = 0, np.zeros(d), np.zeros((d, d))

    out = np.empty((config.iterations, d))
    accepted = 0
    trace = [] if record else None
    factor = chol
    for t in range(total):
        warm = t < config.warmup
        if warm and config.adapt:
            factor = math.exp(log_lam) * chol
        prop = u + factor @ noise[t]
        lp_prop, x_prop = log_post(prop)
        log_ratio = lp_prop - lp
        if log_unif[t] < log_ratio:
            u, lp, x = prop, lp_prop, x_prop
            if not warm:
                accepted += 1
        if warm:
            if config.adapt:
                alpha = math.exp(min(0.0, log_ratio)) if not math.isnan(log_ratio) else 0.0
                log_lam += (t + 1) ** -0.6 * (alpha - config.target_accept)
                if t >= window_start:
                    w_n += 1
                    delta = u - w_mean
                    w_mean = w_mean + delta / w_n
                    w_m2 += np.outer(delta, u - w_mean)
                    if (w_n % _ADAPT_EVERY == 0 and w_n > 2 * d and t < last_update):
                        chol = _chol(scale * w_m2 / (w_n - 1))
            if t == config.warmup - 1:
                factor = math.exp(log_lam) * chol if config.adapt else chol
        else:
            step = t - config.warmup
            if (step + 1) % config.thin == 0:
                out[step // config.thin] = x
            if record:
                trace.append(factor.copy())
    frozen = factor @ factor.T
    return out, accepted / (config.iterations * config.thin), frozen, trace


def sample(log_target: Callable[[np.ndarray], float], supports: Sequence, config: ChainConfig,
           *, param_names: Sequence[str] | None = None, init=None, init_cov=None,
           n_jobs: int = 1, record_proposal: bool = False) -> ChainDraws:
    """Draw from ``exp(log_target)`` over the product of ``supports``.

    ``supports`` holds one ``(lo, hi)`` pair per coordinate, with ``None`` (or
    infinite bounds) for unbounded ones. ``init`` is a constrained starting
    point (default: box midpoints, 0 for unbounded) and ``init_cov`` an initial
    proposal covariance on the unconstrained scale. Chains are independent
    given ``(config.seed, chain index)``, so results do not depend on
    ``n_jobs``.
    """
    supports = list(supports)
    d = len(supports)
    lo, hi, bounded = _bounds(supports)
    if init is None:
        init = np.where(bounded, 0.5 * (np.where(bounded, lo, 0) + np.where(bounded, hi, 0)), 0.0)
    u_init = transform_to_unconstrained(init, supports)
    if init_cov is None:
        init_cov = 0.1 * np.eye(d)
    names = list(param_names) if param_names is not None else [f"x{j}" for j in range(d)]

    def run(c):
        return _run_chain(c, log_target, supports, u_init, init_cov, config, record_proposal)

    if n_jobs > 1 and config.n_chains > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(run, range(config.n_chains)))
    else:
        results = [run(c) for c in range(config.n_chains)]

    return ChainDraws(
        param_names=names,
        draws=np.stack([r[0] for r in results]),
        accept_rate=np.array([r[1] for r in results]),
        proposal_cov=np.stack([r[2] for r in results]),
        proposal_trace=[r[3] for r in results] if record_proposal else None,
    )


# ---------------------------------------------------------------------------
# diagnostics

@dataclass
class Diagnostics:
    rhat: dict
    ess: dict
    divergent_or_stuck: list
    constant: dict = field(default_factory=dict)

    def converged(self, rhat_max: float = 1.1) -> bool:
        return all(r <= rhat_max for r in self.rhat.values()) and not any(self.divergent_or_stuck)


def _split(x):
    half = x.shape[1] // 2
    return np.concatenate([x[:, :half], x[:, x.shape[1] - half:]], axis=0)


def split_rhat(x) -> float:
    """Split-R-hat of a (chains, draws) array."""
    x = _split(np.asarray(x, dtype=float))
    n = x.shape[1]
    within = x.var(axis=1, ddof=1).mean()
    between = n * x.mean(axis=1).var(ddof=1)
    if within == 0.0:
        return 1.0 if between == 0.0 else math.inf
    var_plus = (n - 1) / n * within + between / n
    return float(math.sqrt(var_plus / within))


def _autocov(x):
    m, n = x.shape
    centered = x - x.mean(axis=1, keepdims=True)
    size = 1 << (2 * n - 1).bit_length()
    spec = np.fft.rfft(centered, n=size, axis=1)
    acov = np.fft.irfft(spec * np.conj(spec), n=size, axis=1)[:, :n]
    return acov / n


def ess(x, split: bool = True) -> float:
    """Effective sample size by Geyer's initial monotone positive sequence.

    Chains are halved first (``split=True``) so slow drifts within a chain
    count against the estimate.
    """
    x = np.asarray(x, dtype=float)
    if split and x.shape[1] >= 8:
        x = _split(x)
    m, n = x.shape
    if n < 4:
        raise ValueError("need at least 4 draws per chain")
    acov = _autocov(x)
    chain_var = acov[:, 0] * n / (n - 1)
    mean_var = chain_var.mean()
    var_plus = mean_var * (n - 1) / n
    if m > 1:
        var_plus += x.mean(axis=1).var(ddof=1)
    if var_plus == 0.0:
        return float(m * n)
    rho = 1.0 - (mean_var - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0
    k = n // 2
    pairs = rho[0:2 * k:2] + rho[1:2 * k:2]
    nonpos = np.nonzero(pairs <= 0.0)[0]
    if nonpos.size:
        pairs = pairs[:nonpos[0]]
    pairs = np.minimum.accumulate(pairs)
    tau = max(-1.0 + 2.0 * pairs.sum(), 1.0 / math.log10(m * n) if m * n > 10 else 1e-3)
    return float(m * n / tau)


def diagnose(draws: ChainDraws) -> Diagnostics:
    """Split-R-hat and ESS per parameter, stuck-chain flags per chain."""
    c, n, _ = draws.draws.shape
    if c < 2 or n < 4:
        raise ValueError("diagnostics need >= 2 chains with >= 4 draws each")
    rhat, ess_, const = {}, {}, {}
    for j, name in enumerate(draws.param_names):
        x = draws.draws[:, :, j]
        if np.ptp(x) == 0.0:
            rhat[name], ess_[name], const[name] = 1.0, float(c * n), True
            continue
        const[name] = False
        rhat[name] = split_rhat(x)
        ess_[name] = ess(x)
    stuck = [bool(a < 0.05 or a > 0.95) for a in draws.accept_rate]
    return Diagnostics(rhat, ess_, stuck, const)


def summarize_draws(draws: ChainDraws) -> dict[str, PosteriorSummary]:
    """Pooled median and 2.5/97.5 percentiles (linear interpolation)."""
    out = {}
    for j, name in enumerate(draws.param_names):
        x = draws.draws[:, :, j].ravel()
        q025, med, q975 = np.percentile(x, [2.5, 50.0, 97.5])
        out[name] = PosteriorSummary(float(med), float(q025), float(q975), float(x.mean()))
    return out


def mcse_quantile(x, prob: float) -> float:
    """Monte Carlo standard error of an empirical quantile.

    Uses the ESS of the indicator ``x <= q`` and maps a +-1 sd beta interval on
    the probability scale back through the empirical quantile function.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    flat = np.sort(x.ravel())
    total = flat.size
    q = np.percentile(flat, 100.0 * prob)
    ind = (x <= q).astype(float)
    s = ess(ind) if np.ptp(ind) > 0 else float(total)
    a = beta_ppf(0.15865525393145707, (s * prob + 1.0, s * (1.0 - prob) + 1.0))
    b = beta_ppf(0.8413447460685429, (s * prob + 1.0, s * (1.0 - prob) + 1.0))
    i1 = min(max(int(math.floor(a * total)), 1), total) - 1
    i2 = min(max(int(math.ceil(b * total)), 1), total) - 1
    return float((flat[i2] - flat[i1]) / 2.0)


def mcse_mean(x) -> float:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    return float(x.std(ddof=1) / math.sqrt(ess(x)))


# ---------------------------------------------------------------------------
# model-level fits

@dataclass
class McmcFit:
    draws: ChainDraws
    diagnostics: Diagnostics
    summaries: dict
    map_estimate: np.ndarray | None = None


def fit_nocov_mcmc(stats: SufficientStats, prior: PriorConfig = PriorConfig(),
                   config: ChainConfig = ChainConfig(), n_jobs: int = 1) -> McmcFit:
    """Sample (omega, p) on the prior box."""

    def target(x):
        return loglik_nocov(stats, ZibParams(float(x[0]), float(x[1])))

    draws = sample(target, [prior.omega_box, prior.p_box], config,
                   param_names=["omega", "p"], n_jobs=n_jobs)
    return McmcFit(draws, diagnose(draws), summarize_draws(draws))


def find_map(model: CovariateModel, start=None, max_steps: int = 500) -> tuple[np.ndarray, bool]:
    """Posterior mode by quasi-Newton ascent with a backtracking line search."""
    x0 = np.zeros(model.dim) if start is None else np.asarray(start, dtype=float)

    def neg(v):
        value, grad = model.log_density_and_grad(v)
        if not math.isfinite(value):
            return 1e300, np.zeros_like(v)
        return -value, -grad

    res = optimize.minimize(neg, x0, jac=True, method="BFGS",
                            options={"maxiter": max_steps, "gtol": 1e-9})
    return res.x, bool(res.success)


def laplace_cov(model: CovariateModel, mode, step: float = 1e-5) -> np.ndarray | None:
    """Inverse negative Hessian at ``mode`` from central differences of the gradient."""
    d = model.dim
    hess = np.empty((d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = step
        hess[:, j] = (model.grad(mode + e) - model.grad(mode - e)) / (2 * step)
    hess = 0.5 * (hess + hess.T)
    try:
        cov = np.linalg.inv(-hess)
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        return None
    return cov


def fit_covariate(data: Dataset, prior: PriorConfig = PriorConfig(),
                  config: ChainConfig = ChainConfig(), n_jobs: int = 1) -> McmcFit:
    """MAP-initialized adaptive Metropolis fit of the covariate model."""
    model = CovariateModel(data, prior)
    mode, ok = find_map(model)
    if not ok:
        log.debug("MAP search stopped before convergence; using last iterate")
    cov = laplace_cov(model, mode)
    if cov is None:
        cov = 0.1 * np.eye(model.dim)
    draws = sample(model.log_density, [None] * model.dim, config,
                   param_names=model.param_names, init=mode, init_cov=cov, n_jobs=n_jobs)
    return McmcFit(draws, diagnose(draws), summarize_draws(draws), mode)
