"""Maximum-likelihood logistic regression by IRLS, with Wald intervals.

Used as the conventional comparison: a logistic fit on the whole population
(which estimates omega * p) or on the exposed subgroup only (which estimates
the p-side coefficients directly).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Z95 = 1.96
SEPARATION_BOUND = 30.0


@dataclass
class LogisticFit:
    coefficients: np.ndarray
    standard_errors: np.ndarray
    ci95: np.ndarray            # (p, 2)
    converged: bool
    n_iterations: int
    max_score: float
    message: str = ""

    def fitted(self, W) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-np.asarray(W, dtype=float) @ self.coefficients))


def _sigmoid(eta):
    return np.where(eta >= 0, 1.0 / (1.0 + np.exp(-eta)), np.exp(eta) / (1.0 + np.exp(eta)))


def fit_logistic(y, W, max_iter: int = 100, score_tol: float = 1e-8) -> LogisticFit:
    """Fit ``logit P(y=1) = W @ b``. ``W`` must already contain an intercept column."""
    y = np.asarray(y, dtype=float)
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != y.size:
        raise ValueError("W must be an n x p matrix matching y")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("y must be binary")
    n, p = W.shape
    if n < p:
        raise ValueError(f"need at least as many observations ({n}) as columns ({p})")

    b = np.zeros(p)
    message = ""
    converged = False
    it = 0
    score = np.full(p, np.inf)
    step = np.full(p, np.inf)
    for it in range(1, max_iter + 1):
        mu = _sigmoid(W @ b)
        weights = mu * (1.0 - mu)
        score = W.T @ (y - mu)
        # Under separation the score vanishes like exp(-|b|) while Newton steps
        # stay O(1), so a small score alone is not enough.
        if np.max(np.abs(score)) < score_tol and np.max(np.abs(step)) < 1e-6 * (1.0 + np.max(np.abs(b))):
            converged = True
            break
        info = W.T @ (weights[:, None] * W)
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError:
            message = "singular information matrix"
            break
        b = b + step
        if np.max(np.abs(b)) > SEPARATION_BOUND:
            message = (f"coefficients exceed {SEPARATION_BOUND:g} in absolute value: "
                       "perfect or quasi-complete separation, no finite MLE")
            break
    else:
        message = f"no convergence in {max_iter} iterations"

    mu = _sigmoid(W @ b)
    info = W.T @ ((mu * (1.0 - mu))[:, None] * W)
    try:
        se = np.sqrt(np.diag(np.linalg.inv(info)))
    except np.linalg.LinAlgError:
        se = np.full(p, np.inf)
    ci = np.column_stack([b - Z95 * se, b + Z95 * se])
    return LogisticFit(b, se, ci, converged, it, float(np.max(np.abs(score))), message)
