"""Special functions and small numerical tools used by the posterior code.

Everything here is a pure function. The regularized incomplete beta
``I_x(a, b)`` is the beta distribution function; it is evaluated by the
continued fraction with the usual symmetry switch at ``x > (a+1)/(a+b+2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _kernels


class DomainError(ValueError):
    """Argument outside the domain of a special function."""


class IntegrationError(ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message: str, estimate: float, error: float):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class BracketError(ValueError):
    """Root-finding target lies outside [F(lo), F(hi)]."""


@dataclass(frozen=True)
class BetaShape:
    a: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)) or self.a <= 0 or self.b <= 0:
            raise DomainError(f"beta shape parameters must be positive, got a={self.a}, b={self.b}")


def _shape(shape) -> BetaShape:
    if isinstance(shape, BetaShape):
        return shape
    a, b = shape
    return BetaShape(float(a), float(b))


def log_gamma(x: float) -> float:
    """ln Gamma(x) for x > 0 (Lanczos approximation)."""
    x = float(x)
    if not math.isfinite(x) or x <= 0:
        raise DomainError(f"log_gamma requires finite x > 0, got {x}")
    return float(_kernels.log_gamma(x))


def _check_x(x: float) -> float:
    x = float(x)
    if not (0.0 <= x <= 1.0):
        raise DomainError(f"incomplete beta argument must lie in [0, 1], got {x}")
    return x


def log_reg_inc_beta(x: float, shape) -> tuple[float, float]:
    """Return ``(log I_x(a,b), log(1 - I_x(a,b)))``, both accurate in the tails."""
    s = _shape(shape)
    lower, upper = _kernels.log_beta_cdf(_check_x(x), s.a, s.b)
    return float(lower), float(upper)


def reg_inc_beta(x: float, shape) -> float:
    """Regularized incomplete beta function I_x(a, b).

    ``shape`` is a :class:`BetaShape` or an ``(a, b)`` pair.

    >>> round(reg_inc_beta(0.25, (2, 1)), 12)
    0.0625
    """
    lower, _ = log_reg_inc_beta(x, shape)
    return math.exp(lower)


def reg_inc_beta_array(x, shape) -> np.ndarray:
    s = _shape(shape)
    x = np.asarray(x, dtype=float)
    if np.any((x < 0) | (x > 1)) or np.any(np.isnan(x)):
        raise DomainError("incomplete beta arguments must lie in [0, 1]")
    lower, _ = _kernels.log_beta_cdf_arr(x, s.a, s.b)
    return np.exp(lower)


def log_beta_cdf_diff(lo, hi, shape) -> np.ndarray:
    """``log(I_hi - I_lo)`` elementwise, without cancellation in either tail."""
    s = _shape(shape)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any((lo < 0) | (lo > 1) | (hi < 0) | (hi > 1)):
        raise DomainError("incomplete beta arguments must lie in [0, 1]")
    return _kernels.log_beta_cdf_diff_arr(lo, hi, s.a, s.b)


def beta_ppf(q: float, shape) -> float:
    """Quantile of the Beta(a, b) distribution."""
    s = _shape(shape)
    if q <= 0.0:
        return 0.0
    if q >= 1.0:
        return 1.0
    return invert_monotone(lambda x: reg_inc_beta(x, s), q, 0.0, 1.0)


def _simpson(fa, fm, fb, h):
    return h / 6.0 * (fa + 4.0 * fm + fb)


def integrate(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-10,
              *, panels: int = 1, max_intervals: int = 200_000,
              singular_ends: bool = False) -> float:
    """Adaptive Simpson quadrature of ``f`` over ``[lo, hi]``.

    The interval is first cut into ``panels`` equal pieces, which helps when
    the integrand is sharply peaked. Each piece is bisected until the two-level
    Simpson difference is below ``15 * tol_local``; tolerance is split in half
    at each bisection. Raises :class:`IntegrationError` (carrying the estimate
    and the achieved error bound) if ``max_intervals`` is exhausted.

    ``singular_ends=True`` integrates after the substitution
    ``x = lo + (hi - lo) * (3t^2 - 2t^3)``, which cancels integrable
    singularities of the form ``(x - lo)^(-1/2)`` at either endpoint. The
    integrand is never evaluated exactly at an endpoint in that mode.
    """
    if not hi >= lo:
        raise ValueError(f"integrate requires lo <= hi, got [{lo}, {hi}]")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if hi == lo:
        return 0.0
    if singular_ends:
        width = hi - lo

        def g(t):
            if t < 0.5:
                x = lo + width * t * t * (3.0 - 2.0 * t)
            else:
                x = hi - width * (1.0 - t) ** 2 * (1.0 + 2.0 * t)
            if not lo < x < hi:
                return 0.0  # rounds onto an endpoint; the Jacobian makes this negligible
            return f(x) * 6.0 * width * t * (1.0 - t)

        return integrate(g, 0.0, 1.0, tol, panels=panels, max_intervals=max_intervals)

    edges = np.linspace(lo, hi, panels + 1)
    stack = []
    for a, b in zip(edges[:-1], edges[1:]):
        a, b = float(a), float(b)
        m = 0.5 * (a + b)
        fa, fm, fb = f(a), f(m), f(b)
        stack.append((a, b, fa, fm, fb, _simpson(fa, fm, fb, b - a), tol / panels, 0))

    total = 0.0
    err_total = 0.0
    intervals = 0
    failed = False
    while stack:
        a, b, fa, fm, fb, whole, eps, depth = stack.pop()
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = _simpson(fa, flm, fm, m - a)
        right = _simpson(fm, frm, fb, b - m)
        delta = left + right - whole
        intervals += 1
        if abs(delta) <= 15.0 * eps or depth >= 50 or intervals >= max_intervals:
            if abs(delta) > 15.0 * eps:
                failed = True
            total += left + right + delta / 15.0
            err_total += abs(delta) / 15.0
            continue
        stack.append((a, m, fa, flm, fm, left, 0.5 * eps, depth + 1))
        stack.append((m, b, fm, frm, fb, right, 0.5 * eps, depth + 1))

    if not math.isfinite(total):
        raise IntegrationError("integrand produced non-finite values", total, math.inf)
    if failed and err_total > tol:
        raise IntegrationError(
            f"adaptive Simpson did not converge: achieved error {err_total:.3g} > tol {tol:.3g}",
            total, err_total)
    return total


def invert_monotone(F: Callable[[float], float], target: float, lo: float, hi: float,
                    ftol: float = 1e-9) -> float:
    """Solve ``F(x) = target`` for non-decreasing ``F`` on ``[lo, hi]`` by bisection."""
    f_lo = F(lo) - target
    f_hi = F(hi) - target
    if f_lo > ftol or f_hi < -ftol:
        raise BracketError(
            f"target {target} outside [F(lo), F(hi)] = [{f_lo + target}, {f_hi + target}]")
    if f_lo >= 0.0:
        return lo
    if f_hi <= 0.0:
        return hi
    # Bisect to machine resolution rather than stopping at |F - target| <= ftol,
    # so flat stretches of F still give an accurate x.
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f_mid = F(mid) - target
        if f_mid == 0.0:
            return mid
        if f_mid < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4.0 * np.finfo(float).eps * max(1.0, abs(mid)):
            break
    return 0.5 * (lo + hi)
