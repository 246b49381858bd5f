"""Zero-inflated Bernoulli model: parameters, priors, likelihoods.

An observation is 1 with probability ``omega * p``: ``omega`` is the chance
of being exposed (at risk) and ``p`` the chance of the event among the
exposed. Without covariates only the product is identified by the data, so
the two are separated through bounded uniform priors. With covariates each
probability gets its own logit-linear predictor,

    logit(omega_i) = theta_0 + theta . x_i      (zero-inflated part)
    logit(p_i)     = beta_0  + beta . z_i       (event part)

with independent normal priors on the coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from . import _kernels

_LOG_2PI = math.log(2.0 * math.pi)


class ModelError(ValueError):
    """Invalid model input (dimensions, domains, data values)."""


def _check_prob(name, value):
    if not (0.0 <= value <= 1.0):
        raise ModelError(f"{name} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class ZibParams:
    omega: float
    p: float

    def __post_init__(self):
        _check_prob("omega", self.omega)
        _check_prob("p", self.p)


class SigmaMode(str, Enum):
    FIXED = "fixed"
    HYPERPRIOR = "hyperprior"


@dataclass(frozen=True)
class PriorConfig:
    """Uniform box priors on (omega, p) and normal priors on coefficients.

    ``sigma_mode='hyperprior'`` puts a half-normal(0, ``hyper_scale``) prior on
    each coefficient-block standard deviation; they are then sampled on the log
    scale as two extra coordinates.
    """

    omega_lo: float = 0.0
    omega_hi: float = 0.5
    p_lo: float = 0.5
    p_hi: float = 1.0
    coef_sigma_theta: float = 5.0
    coef_sigma_beta: float = 5.0
    sigma_mode: SigmaMode = SigmaMode.FIXED
    hyper_scale: float = 2.5

    def __post_init__(self):
        for name in ("omega_lo", "omega_hi", "p_lo", "p_hi"):
            _check_prob(name, getattr(self, name))
        if not self.omega_lo < self.omega_hi:
            raise ModelError("omega prior needs omega_lo < omega_hi")
        if not self.p_lo < self.p_hi:
            raise ModelError("p prior needs p_lo < p_hi")
        for name in ("coef_sigma_theta", "coef_sigma_beta", "hyper_scale"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ModelError(f"{name} must be positive, got {value}")
        object.__setattr__(self, "sigma_mode", SigmaMode(self.sigma_mode))

    @property
    def omega_box(self) -> tuple[float, float]:
        return (self.omega_lo, self.omega_hi)

    @property
    def p_box(self) -> tuple[float, float]:
        return (self.p_lo, self.p_hi)


@dataclass(frozen=True)
class SufficientStats:
    """Sample size ``n`` and number of ones ``s``."""

    n: int
    s: int

    def __post_init__(self):
        if self.n < 0 or not (0 <= self.s <= self.n):
            raise ModelError(f"need 0 <= s <= n, got n={self.n}, s={self.s}")

    @classmethod
    def from_outcomes(cls, y) -> "SufficientStats":
        y = np.asarray(y)
        return cls(int(y.size), int(np.count_nonzero(y == 1)))


def _as_matrix(a, n):
    if a is None:
        return np.zeros((n, 0))
    a = np.asarray(a, dtype=float)
    if a.ndim == 2:
        return a
    if a.size == 0:
        return np.zeros((n, 0))
    return a.reshape(a.shape[0], -1)


@dataclass(frozen=True)
class Dataset:
    """Binary outcomes plus covariates for both model parts.

    ``X`` (n x k) feeds omega, ``Z`` (n x q) feeds p. Intercepts are implicit
    and must not be included. An empty dataset (n = 0) is allowed here; the
    command-line front end rejects it.
    """

    y: np.ndarray
    X: np.ndarray
    Z: np.ndarray
    x_names: tuple = ()
    z_names: tuple = ()

    def __post_init__(self):
        y = np.asarray(self.y)
        if y.ndim != 1:
            raise ModelError("y must be a vector")
        if not np.all((y == 0) | (y == 1)):
            raise ModelError("y must contain only 0 and 1")
        n = y.size
        X = _as_matrix(self.X, n)
        Z = _as_matrix(self.Z, n)
        if X.shape[0] != n or Z.shape[0] != n:
            raise ModelError("covariate matrices must have one row per outcome")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Z))):
            raise ModelError("covariates must be finite")
        x_names = tuple(self.x_names) or tuple(f"x{j + 1}" for j in range(X.shape[1]))
        z_names = tuple(self.z_names) or tuple(f"z{j + 1}" for j in range(Z.shape[1]))
        if len(x_names) != X.shape[1] or len(z_names) != Z.shape[1]:
            raise ModelError("column name count does not match covariate matrix width")
        object.__setattr__(self, "y", y.astype(np.int64))
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "x_names", x_names)
        object.__setattr__(self, "z_names", z_names)

    @property
    def n(self) -> int:
        return int(self.y.size)

    @property
    def k(self) -> int:
        return self.X.shape[1]

    @property
    def q(self) -> int:
        return self.Z.shape[1]

    def stats(self) -> SufficientStats:
        return SufficientStats.from_outcomes(self.y)

    def design(self) -> tuple[np.ndarray, np.ndarray]:
        """Design matrices with the intercept column prepended."""
        ones = np.ones((self.n, 1))
        return np.hstack([ones, self.X]), np.hstack([ones, self.Z])


@dataclass(frozen=True)
class CoefVector:
    theta: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float))
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(beta))):
            raise ModelError("coefficients must be finite")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "beta", beta)

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.theta, self.beta])


# ---------------------------------------------------------------------------
# No-covariate model

def mass(params: ZibParams, y: int) -> float:
    """P(Y = y) under the mixture."""
    if y == 1:
        return params.omega * params.p
    if y == 0:
        return (1.0 - params.omega) + params.omega * (1.0 - params.p)
    raise ModelError(f"y must be 0 or 1, got {y}")


def logit(x: float) -> float:
    if not (0.0 < x < 1.0):
        raise ModelError(f"logit requires 0 < x < 1, got {x}")
    return math.log(x) - math.log1p(-x)


def inv_logit(t):
    """Logistic function; accepts scalars or arrays."""
    t = np.asarray(t, dtype=float)
    out = np.where(t >= 0, 1.0 / (1.0 + np.exp(-np.abs(t))),
                   np.exp(-np.abs(t)) / (1.0 + np.exp(-np.abs(t))))
    return float(out) if out.ndim == 0 else out


def loglik_nocov(stats: SufficientStats, params: ZibParams) -> float:
    """s log(omega p) + (n - s) log(1 - omega p); -inf where the likelihood is 0."""
    t = params.omega * params.p
    total = 0.0
    if stats.s:
        if t <= 0.0:
            return -math.inf
        total += stats.s * math.log(t)
    failures = stats.n - stats.s
    if failures:
        if t >= 1.0:
            return -math.inf
        total += failures * math.log1p(-t)
    return total


def log_posterior_nocov(stats: SufficientStats, prior: PriorConfig, omega: float, p: float) -> float:
    """Joint log posterior of (omega, p) up to a constant; -inf outside the prior box."""
    if not (prior.omega_lo <= omega <= prior.omega_hi and prior.p_lo <= p <= prior.p_hi):
        return -math.inf
    return loglik_nocov(stats, ZibParams(omega, p))


# ---------------------------------------------------------------------------
# Covariate model

def _normal_logpdf_sum(x, sigma):
    return float(-0.5 * np.dot(x, x) / sigma**2 - x.size * (math.log(sigma) + 0.5 * _LOG_2PI))


def _half_normal_logpdf(x, scale):
    return math.log(2.0) - math.log(scale) - 0.5 * _LOG_2PI - 0.5 * (x / scale) ** 2


@dataclass
class CovariateModel:
    """Log posterior over the flattened coefficient vector.

    The vector is ``[theta_0..theta_k, beta_0..beta_q]`` and, in hyperprior
    mode, additionally ``[log sigma_theta, log sigma_beta]``.
    """

    data: Dataset
    prior: PriorConfig = field(default_factory=PriorConfig)

    def __post_init__(self):
        self._X, self._Z = self.data.design()
        self._y = self.data.y

    @property
    def n_theta(self) -> int:
        return self.data.k + 1

    @property
    def n_beta(self) -> int:
        return self.data.q + 1

    @property
    def hyper(self) -> bool:
        return self.prior.sigma_mode is SigmaMode.HYPERPRIOR

    @property
    def dim(self) -> int:
        return self.n_theta + self.n_beta + (2 if self.hyper else 0)

    @property
    def param_names(self) -> list[str]:
        names = ["zi:(Intercept)"] + [f"zi:{c}" for c in self.data.x_names]
        names += ["nzi:(Intercept)"] + [f"nzi:{c}" for c in self.data.z_names]
        if self.hyper:
            names += ["log_sigma_theta", "log_sigma_beta"]
        return names

    def split(self, vec) -> tuple[np.ndarray, np.ndarray, float, float]:
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (self.dim,):
            raise ModelError(f"expected a vector of length {self.dim}, got shape {vec.shape}")
        theta = vec[: self.n_theta]
        beta = vec[self.n_theta: self.n_theta + self.n_beta]
        if self.hyper:
            return theta, beta, float(vec[-2]), float(vec[-1])
        return theta, beta, math.log(self.prior.coef_sigma_theta), math.log(self.prior.coef_sigma_beta)

    def _log_prior(self, theta, beta, ls_t, ls_b):
        lp = _normal_logpdf_sum(theta, math.exp(ls_t)) + _normal_logpdf_sum(beta, math.exp(ls_b))
        if self.hyper:
            s = self.prior.hyper_scale
            # half-normal on sigma, sampled as log sigma (Jacobian = sigma)
            lp += _half_normal_logpdf(math.exp(ls_t), s) + ls_t
            lp += _half_normal_logpdf(math.exp(ls_b), s) + ls_b
        return lp

    def log_density(self, vec) -> float:
        theta, beta, ls_t, ls_b = self.split(vec)
        ll = _kernels.zib_loglik(self._y, self._X, self._Z, theta, beta)
        return float(ll) + self._log_prior(theta, beta, ls_t, ls_b)

    def log_density_and_grad(self, vec) -> tuple[float, np.ndarray]:
        theta, beta, ls_t, ls_b = self.split(vec)
        ll, g_theta, g_beta = _kernels.zib_loglik_grad(self._y, self._X, self._Z, theta, beta)
        var_t, var_b = math.exp(2 * ls_t), math.exp(2 * ls_b)
        parts = [g_theta - theta / var_t, g_beta - beta / var_b]
        if self.hyper:
            s2 = self.prior.hyper_scale ** 2
            parts.append(np.array([
                theta @ theta / var_t - theta.size - var_t / s2 + 1.0,
                beta @ beta / var_b - beta.size - var_b / s2 + 1.0,
            ]))
        return float(ll) + self._log_prior(theta, beta, ls_t, ls_b), np.concatenate(parts)

    def grad(self, vec) -> np.ndarray:
        return self.log_density_and_grad(vec)[1]


def _model_vector(model: CovariateModel, coefs: CoefVector, log_sigmas):
    if coefs.theta.size != model.n_theta or coefs.beta.size != model.n_beta:
        raise ModelError(
            f"coefficient sizes ({coefs.theta.size}, {coefs.beta.size}) do not match data "
            f"({model.n_theta}, {model.n_beta})")
    vec = coefs.flatten()
    if model.hyper:
        if log_sigmas is None:
            log_sigmas = (math.log(model.prior.coef_sigma_theta), math.log(model.prior.coef_sigma_beta))
        vec = np.concatenate([vec, np.asarray(log_sigmas, dtype=float)])
    return vec


def log_posterior_cov(data: Dataset, coefs: CoefVector, prior: PriorConfig = PriorConfig(),
                      log_sigmas: Sequence[float] | None = None) -> float:
    """Log posterior (up to a constant) of the covariate model."""
    model = CovariateModel(data, prior)
    return model.log_density(_model_vector(model, coefs, log_sigmas))


def grad_log_posterior_cov(data: Dataset, coefs: CoefVector, prior: PriorConfig = PriorConfig(),
                           log_sigmas: Sequence[float] | None = None) -> np.ndarray:
    """Gradient of :func:`log_posterior_cov` w.r.t. the flattened vector."""
    model = CovariateModel(data, prior)
    return model.grad(_model_vector(model, coefs, log_sigmas))


def log_prior_cov(coefs: CoefVector, prior: PriorConfig = PriorConfig(),
                  log_sigmas: Sequence[float] | None = None) -> float:
    """Coefficient (and hyper-) prior alone; what the posterior reduces to with no data."""
    if prior.sigma_mode is SigmaMode.HYPERPRIOR:
        ls_t, ls_b = log_sigmas if log_sigmas is not None else (
            math.log(prior.coef_sigma_theta), math.log(prior.coef_sigma_beta))
    else:
        ls_t, ls_b = math.log(prior.coef_sigma_theta), math.log(prior.coef_sigma_beta)
    lp = _normal_logpdf_sum(coefs.theta, math.exp(ls_t)) + _normal_logpdf_sum(coefs.beta, math.exp(ls_b))
    if prior.sigma_mode is SigmaMode.HYPERPRIOR:
        s = prior.hyper_scale
        lp += _half_normal_logpdf(math.exp(ls_t), s) + ls_t + _half_normal_logpdf(math.exp(ls_b), s) + ls_b
    return lp
