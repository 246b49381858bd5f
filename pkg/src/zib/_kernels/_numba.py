"""numba-compiled kernels; same surface as ``_numpy``."""

import math

import numpy as np
from numba import njit

from ._common import (CF_EPS, CF_MAX_ITER, CF_TINY, LANCZOS_C0, LANCZOS_COEF,
                      LANCZOS_G, SQRT_2PI)

_JIT = dict(cache=True, nogil=True)
_HALF_LOG = -0.6931471805599453
_COEF = LANCZOS_COEF.copy()


@njit(**_JIT)
def log_gamma(x):
    y = x
    tmp = x + LANCZOS_G
    tmp = (x + 0.5) * math.log(tmp) - tmp
    ser = LANCZOS_C0
    for j in range(_COEF.shape[0]):
        y += 1.0
        ser += _COEF[j] / y
    return tmp + math.log(SQRT_2PI * ser / x)


@njit(**_JIT)
def _betacf(a, b, x):
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < CF_TINY:
        d = CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < CF_TINY:
            d = CF_TINY
        c = 1.0 + aa / c
        if abs(c) < CF_TINY:
            c = CF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < CF_TINY:
            d = CF_TINY
        c = 1.0 + aa / c
        if abs(c) < CF_TINY:
            c = CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < CF_EPS:
            return h
    return math.nan


@njit(**_JIT)
def _log1mexp(v):
    if v == -math.inf:
        return 0.0
    if v > _HALF_LOG:
        return math.log(-math.expm1(v))
    return math.log1p(-math.exp(v))


@njit(**_JIT)
def log_beta_cdf(x, a, b):
    if x <= 0.0:
        return -math.inf, 0.0
    if x >= 1.0:
        return 0.0, -math.inf
    front = (log_gamma(a + b) - log_gamma(a) - log_gamma(b)
             + a * math.log(x) + b * math.log1p(-x))
    if x < (a + 1.0) / (a + b + 2.0):
        log_lower = front + math.log(_betacf(a, b, x) / a)
        return log_lower, _log1mexp(log_lower)
    log_upper = front + math.log(_betacf(b, a, 1.0 - x) / b)
    return _log1mexp(log_upper), log_upper


@njit(**_JIT)
def log_beta_cdf_diff(lo, hi, a, b):
    if hi <= lo:
        return -math.inf
    l_lo, u_lo = log_beta_cdf(lo, a, b)
    l_hi, u_hi = log_beta_cdf(hi, a, b)
    if l_hi < _HALF_LOG:
        return l_hi + _log1mexp(l_lo - l_hi)
    if u_lo < _HALF_LOG:
        return u_lo + _log1mexp(u_hi - u_lo)
    return math.log1p(-(math.exp(l_lo) + math.exp(u_hi)))


@njit(**_JIT)
def _log_beta_cdf_loop(x, a, b, out_lower, out_upper):
    for i in range(x.shape[0]):
        out_lower[i], out_upper[i] = log_beta_cdf(x[i], a, b)


def log_beta_cdf_arr(x, a, b):
    x = np.ascontiguousarray(x, dtype=np.float64)
    flat = x.ravel()
    lower = np.empty_like(flat)
    upper = np.empty_like(flat)
    _log_beta_cdf_loop(flat, float(a), float(b), lower, upper)
    return lower.reshape(x.shape), upper.reshape(x.shape)


@njit(**_JIT)
def _log_beta_cdf_diff_loop(lo, hi, a, b, out):
    for i in range(lo.shape[0]):
        out[i] = log_beta_cdf_diff(lo[i], hi[i], a, b)


def log_beta_cdf_diff_arr(lo, hi, a, b):
    lo, hi = np.broadcast_arrays(np.asarray(lo, np.float64), np.asarray(hi, np.float64))
    out = np.empty(lo.size)
    _log_beta_cdf_diff_loop(np.ascontiguousarray(lo).ravel(),
                            np.ascontiguousarray(hi).ravel(), float(a), float(b), out)
    return out.reshape(lo.shape)


@njit(**_JIT)
def _prob_pair(t):
    # (sigmoid(t), 1 - sigmoid(t)) without cancellation
    e = math.exp(-abs(t))
    inv = 1.0 / (1.0 + e)
    if t >= 0.0:
        return inv, e * inv
    return e * inv, inv


@njit(**_JIT)
def zib_loglik(y, X, Z, theta, beta):
    total = 0.0
    for i in range(y.shape[0]):
        eta = 0.0
        for j in range(X.shape[1]):
            eta += X[i, j] * theta[j]
        zeta = 0.0
        for j in range(Z.shape[1]):
            zeta += Z[i, j] * beta[j]
        w, wc = _prob_pair(eta)
        p, pc = _prob_pair(zeta)
        if y[i] == 1:
            total += math.log(w * p)
        else:
            total += math.log(wc + w * pc)
    return total


@njit(**_JIT)
def _zib_loglik_grad(y, X, Z, theta, beta, g_theta, g_beta):
    total = 0.0
    for i in range(y.shape[0]):
        eta = 0.0
        for j in range(X.shape[1]):
            eta += X[i, j] * theta[j]
        zeta = 0.0
        for j in range(Z.shape[1]):
            zeta += Z[i, j] * beta[j]
        w, wc = _prob_pair(eta)
        p, pc = _prob_pair(zeta)
        if y[i] == 1:
            total += math.log(w * p)
            d_eta = wc
            d_zeta = pc
        else:
            miss = wc + w * pc
            total += math.log(miss)
            d_eta = -p * w * wc / miss
            d_zeta = -w * p * pc / miss
        for j in range(X.shape[1]):
            g_theta[j] += d_eta * X[i, j]
        for j in range(Z.shape[1]):
            g_beta[j] += d_zeta * Z[i, j]
    return total


def zib_loglik_grad(y, X, Z, theta, beta):
    g_theta = np.zeros(X.shape[1])
    g_beta = np.zeros(Z.shape[1])
    total = _zib_loglik_grad(y, X, Z, theta, beta, g_theta, g_beta)
    return total, g_theta, g_beta
