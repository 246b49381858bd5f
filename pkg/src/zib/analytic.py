"""Closed-form posterior for the model without covariates.

With uniform priors on ``omega in [w_lo, w_hi]`` and ``p in [p_lo, p_hi]`` the
substitution ``t = p * omega`` turns each marginal into a difference of beta
distribution functions:

    f(omega) ~ [F(p_hi * omega) - F(p_lo * omega)] / omega
    f(p)     ~ [F(w_hi * p) - F(w_lo * p)] / p

where ``F`` is the Beta(s + 1, n - s + 1) CDF. The kernels are evaluated in
log space, normalized numerically, and the CDF is tabulated on a refined grid
so quantiles are cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels
from .model import PriorConfig, SufficientStats
from .specfun import BetaShape, integrate, invert_monotone, log_beta_cdf_diff

# kernels have a finite limit at 0; they are evaluated no closer than this
_EDGE = 1e-12
_BASE_CELLS = 2048
_MAX_ROUNDS = 12
_MAX_NODES = 1 << 20


class Param(str, Enum):
    OMEGA = "omega"
    P = "p"


@dataclass(frozen=True)
class PosteriorSummary:
    median: float
    q025: float
    q975: float
    mean: float

    def as_dict(self) -> dict:
        return {"median": self.median, "q025": self.q025, "q975": self.q975, "mean": self.mean}


def _support(prior: PriorConfig, which: Param) -> tuple[float, float]:
    return prior.omega_box if which is Param.OMEGA else prior.p_box


def _substitution_box(prior: PriorConfig, which: Param) -> tuple[float, float]:
    # the *other* parameter's box scales the integration range for t = p * omega
    return prior.p_box if which is Param.OMEGA else prior.omega_box


def log_kernel(stats: SufficientStats, prior: PriorConfig, which, x) -> np.ndarray:
    """Log of the unnormalized marginal density at ``x`` (array in, array out)."""
    which = Param(which)
    x = np.maximum(np.asarray(x, dtype=float), _EDGE)
    c_lo, c_hi = _substitution_box(prior, which)
    shape = BetaShape(stats.s + 1.0, stats.n - stats.s + 1.0)
    return log_beta_cdf_diff(c_lo * x, c_hi * x, shape) - np.log(x)


def _scalar_log_kernel(stats, prior, which):
    c_lo, c_hi = _substitution_box(prior, which)
    a, b = stats.s + 1.0, stats.n - stats.s + 1.0
    diff = _kernels.log_beta_cdf_diff

    def f(x):
        x = max(x, _EDGE)
        return diff(c_lo * x, c_hi * x, a, b) - math.log(x)

    return f


def _check_point(which, value, prior):
    lo, hi = _support(prior, which)
    if value <= 0.0:
        raise ValueError(f"{which.value} must be > 0, got {value}")
    if not (lo <= value <= hi):
        raise ValueError(f"{which.value}={value} outside the prior support [{lo}, {hi}]")


def unnorm_marginal_omega(stats: SufficientStats, prior: PriorConfig, omega: float) -> float:
    """[F(p_hi w) - F(p_lo w)] / w with F the Beta(s+1, n-s+1) CDF."""
    _check_point(Param.OMEGA, omega, prior)
    return math.exp(_scalar_log_kernel(stats, prior, Param.OMEGA)(float(omega)))


def unnorm_marginal_p(stats: SufficientStats, prior: PriorConfig, p: float) -> float:
    """[F(w_hi p) - F(w_lo p)] / p with F the Beta(s+1, n-s+1) CDF."""
    _check_point(Param.P, p, prior)
    return math.exp(_scalar_log_kernel(stats, prior, Param.P)(float(p)))


class MarginalPosterior:
    """Normalized marginal posterior of ``omega`` or ``p`` on its prior support."""

    def __init__(self, param_name, support, nodes, kernel_nodes, cells, z_scaled, log_shift,
                 scalar_log_kernel):
        self.param_name = Param(param_name)
        self.support = support
        self._nodes = nodes
        self._f_nodes = kernel_nodes
        self._z = z_scaled
        self._shift = log_shift
        self._logk = scalar_log_kernel
        self._cdf_nodes = np.concatenate([[0.0], np.cumsum(cells)]) / z_scaled
        self.norm_const = z_scaled * math.exp(log_shift)

    def _scaled(self, x: float) -> float:
        return math.exp(self._logk(x) - self._shift)

    @property
    def grid(self) -> list[tuple[float, float]]:
        dens = self._f_nodes / self._z
        return list(zip(self._nodes.tolist(), dens.tolist()))

    @property
    def nodes(self) -> np.ndarray:
        return self._nodes.copy()

    @property
    def cdf_table(self) -> np.ndarray:
        return self._cdf_nodes.copy()

    def density(self, x: float) -> float:
        lo, hi = self.support
        if x < lo or x > hi:
            return 0.0
        return self._scaled(x) / self._z

    def cdf(self, x: float) -> float:
        lo, hi = self.support
        if x <= lo:
            return 0.0
        if x >= hi:
            return float(self._cdf_nodes[-1])
        i = int(np.searchsorted(self._nodes, x, side="right")) - 1
        x0 = float(self._nodes[i])
        if x == x0:
            return float(self._cdf_nodes[i])
        f0 = float(self._f_nodes[i])
        part = (x - x0) / 6.0 * (f0 + 4.0 * self._scaled(0.5 * (x0 + x)) + self._scaled(x))
        return float(self._cdf_nodes[i]) + part / self._z

    def quantile(self, q: float) -> float:
        lo, hi = self.support
        return invert_monotone(self.cdf, q, lo, hi)

    def mean(self) -> float:
        lo, hi = self.support
        first = integrate(lambda x: x * self._scaled(x), lo, hi, tol=1e-10, panels=64)
        return first / self._z


def _tabulate(logk_vec, lo, hi):
    nodes = np.linspace(lo, hi, _BASE_CELLS + 1)
    log_f = logk_vec(nodes)
    shift = float(np.max(log_f))
    if not math.isfinite(shift):
        raise ArithmeticError("posterior kernel vanishes on the whole support")
    f = np.exp(log_f - shift)
    previous = None
    for _ in range(_MAX_ROUNDS):
        mids = 0.5 * (nodes[:-1] + nodes[1:])
        fm = np.exp(logk_vec(mids) - shift)
        h = np.diff(nodes)
        simpson = h / 6.0 * (f[:-1] + 4.0 * fm + f[1:])
        trapezoid = h / 4.0 * (f[:-1] + 2.0 * fm + f[1:])
        total = float(simpson.sum())
        if previous is not None and abs(total - previous) <= 1e-9 * total:
            break
        previous = total
        flagged = np.abs(simpson - trapezoid) > 1e-10 * total / simpson.size
        if not flagged.any() or nodes.size + flagged.sum() > _MAX_NODES:
            break
        nodes = np.insert(nodes, np.nonzero(flagged)[0] + 1, mids[flagged])
        f = np.insert(f, np.nonzero(flagged)[0] + 1, fm[flagged])
    return nodes, f, simpson, shift


def build_marginal(stats: SufficientStats, prior: PriorConfig, which) -> MarginalPosterior:
    """Normalize the marginal kernel of ``which`` ('omega' or 'p')."""
    which = Param(which)
    lo, hi = _support(prior, which)
    nodes, f, cells, shift = _tabulate(lambda x: log_kernel(stats, prior, which, x), lo, hi)
    logk = _scalar_log_kernel(stats, prior, which)
    z = integrate(lambda x: math.exp(logk(x) - shift), lo, hi, tol=1e-10, panels=64)
    return MarginalPosterior(which, (lo, hi), nodes, f, cells, z, shift, logk)


def summarize(marg: MarginalPosterior) -> PosteriorSummary:
    """Posterior median, central 95% interval and mean."""
    return PosteriorSummary(
        median=marg.quantile(0.5),
        q025=marg.quantile(0.025),
        q975=marg.quantile(0.975),
        mean=marg.mean(),
    )


@dataclass(frozen=True)
class NoCovariateFit:
    stats: SufficientStats
    prior: PriorConfig
    omega: MarginalPosterior
    p: MarginalPosterior
    omega_summary: PosteriorSummary
    p_summary: PosteriorSummary


def fit_nocov(stats: SufficientStats, prior: PriorConfig = PriorConfig()) -> NoCovariateFit:
    omega = build_marginal(stats, prior, Param.OMEGA)
    p = build_marginal(stats, prior, Param.P)
    return NoCovariateFit(stats, prior, omega, p, summarize(omega), summarize(p))


def density_grids_for_plotting(stats: SufficientStats, prior: PriorConfig = PriorConfig(),
                               points: int = 2049) -> list[tuple[str, float, float, float]]:
    """Rows ``(param, value, prior_density, posterior_density)`` on even grids."""
    rows = []
    for which in (Param.OMEGA, Param.P):
        lo, hi = _support(prior, which)
        marg = build_marginal(stats, prior, which)
        xs = np.linspace(lo, hi, points)
        logk = log_kernel(stats, prior, which, xs)
        post = np.exp(logk - marg._shift) / marg._z
        prior_density = 1.0 / (hi - lo)
        rows.extend((which.value, float(x), prior_density, float(d)) for x, d in zip(xs, post))
    return rows
