"""Bayesian zero-inflated Bernoulli models.

Closed-form marginal posteriors for the covariate-free model, an adaptive
Metropolis sampler for the logistic covariate model, a logistic GLM baseline
and a simulation harness.
"""

from ._kernels import BACKEND
from .analytic import (MarginalPosterior, NoCovariateFit, Param, PosteriorSummary,
                       build_marginal, fit_nocov)
from .glm import LogisticFit, fit_logistic
from .mcmc import ChainConfig, ChainDraws, Diagnostics, McmcFit, diagnose, fit_covariate, sample
from .model import (CoefVector, CovariateModel, Dataset, ModelError, PriorConfig, SigmaMode,
                    SufficientStats, ZibParams)
from .specfun import BetaShape, log_gamma, reg_inc_beta

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BetaShape", "ChainConfig", "ChainDraws", "CoefVector", "CovariateModel",
    "Dataset", "Diagnostics", "LogisticFit", "MarginalPosterior", "McmcFit", "ModelError",
    "NoCovariateFit", "Param", "PosteriorSummary", "PriorConfig", "SigmaMode",
    "SufficientStats", "ZibParams", "build_marginal", "diagnose", "fit_covariate",
    "fit_logistic", "fit_nocov", "log_gamma", "reg_inc_beta", "sample",
]
