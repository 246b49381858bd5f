"""Pure-numpy kernels. Scalar entry points run plain-Python loops; the
array entry points vectorize the continued fraction across points."""

import math

import numpy as np

from ._common import (CF_EPS, CF_MAX_ITER, CF_TINY, LANCZOS_C0, LANCZOS_COEF,
                      LANCZOS_G, SQRT_2PI)

_COEF = [float(c) for c in LANCZOS_COEF]


def log_gamma(x):
    y = x
    tmp = x + LANCZOS_G
    tmp = (x + 0.5) * math.log(tmp) - tmp
    ser = LANCZOS_C0
    for c in _COEF:
        y += 1.0
        ser += c / y
    return tmp + math.log(SQRT_2PI * ser / x)


def _betacf(a, b, x):
    # modified Lentz evaluation of the incomplete beta continued fraction
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


def _log1mexp(v):
    # log(1 - exp(v)) for v <= 0
    if v == -math.inf:
        return 0.0
    if v > -0.6931471805599453:
        return math.log(-math.expm1(v))
    return math.log1p(-math.exp(v))


def log_beta_cdf(x, a, b):
    """Return (log I_x(a,b), log(1 - I_x(a,b)))."""
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


def log_beta_cdf_diff(lo, hi, a, b):
    """log(I_hi - I_lo) for lo <= hi, choosing the tail that avoids cancellation."""
    if hi <= lo:
        return -math.inf
    l_lo, u_lo = log_beta_cdf(lo, a, b)
    l_hi, u_hi = log_beta_cdf(hi, a, b)
    if l_hi < -0.6931471805599453:
        return l_hi + _log1mexp(l_lo - l_hi)
    if u_lo < -0.6931471805599453:
        return u_lo + _log1mexp(u_hi - u_lo)
    return math.log1p(-(math.exp(l_lo) + math.exp(u_hi)))


# ---- array versions -------------------------------------------------------

def _log1mexp_arr(v):
    v = np.asarray(v, dtype=float)
    out = np.zeros_like(v)
    with np.errstate(divide="ignore", invalid="ignore"):
        big = v > -0.6931471805599453
        out[big] = np.log(-np.expm1(v[big]))
        small = ~big & np.isfinite(v)
        out[small] = np.log1p(-np.exp(v[small]))
    return out


def _log_gamma_arr(x):
    x = np.asarray(x, dtype=float)
    y = x.copy()
    tmp = x + LANCZOS_G
    tmp = (x + 0.5) * np.log(tmp) - tmp
    ser = np.full_like(x, LANCZOS_C0)
    for c in _COEF:
        y = y + 1.0
        ser += c / y
    return tmp + np.log(SQRT_2PI * ser / x)


def _betacf_arr(a, b, x):
    a, b, x = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float),
                                  np.asarray(x, float))
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = np.ones_like(x)
    d = 1.0 - qab * x / qap
    d = np.where(np.abs(d) < CF_TINY, CF_TINY, d)
    d = 1.0 / d
    h = d.copy()
    done = np.zeros(x.shape, dtype=bool)
    for m in range(1, CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < CF_TINY, CF_TINY, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < CF_TINY, CF_TINY, c)
        d = 1.0 / d
        h = np.where(done, h, h * d * c)
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < CF_TINY, CF_TINY, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < CF_TINY, CF_TINY, c)
        d = 1.0 / d
        delta = d * c
        h = np.where(done, h, h * delta)
        done |= np.abs(delta - 1.0) < CF_EPS
        if done.all():
            return h
    return np.where(done, h, np.nan)


def log_beta_cdf_arr(x, a, b):
    x = np.asarray(x, dtype=float)
    log_lower = np.empty_like(x)
    log_upper = np.empty_like(x)
    low_edge = x <= 0.0
    high_edge = x >= 1.0
    log_lower[low_edge], log_upper[low_edge] = -np.inf, 0.0
    log_lower[high_edge], log_upper[high_edge] = 0.0, -np.inf
    inner = ~(low_edge | high_edge)
    xi = x[inner]
    if xi.size:
        front = (_log_gamma_arr(a + b) - _log_gamma_arr(a) - _log_gamma_arr(b)
                 + a * np.log(xi) + b * np.log1p(-xi))
        direct = xi < (a + 1.0) / (a + b + 2.0)
        ll = np.empty_like(xi)
        lu = np.empty_like(xi)
        if direct.any():
            ll[direct] = front[direct] + np.log(_betacf_arr(a, b, xi[direct]) / a)
            lu[direct] = _log1mexp_arr(ll[direct])
        flip = ~direct
        if flip.any():
            lu[flip] = front[flip] + np.log(_betacf_arr(b, a, 1.0 - xi[flip]) / b)
            ll[flip] = _log1mexp_arr(lu[flip])
        log_lower[inner] = ll
        log_upper[inner] = lu
    return log_lower, log_upper


def log_beta_cdf_diff_arr(lo, hi, a, b):
    lo, hi = np.broadcast_arrays(np.asarray(lo, float), np.asarray(hi, float))
    l_lo, u_lo = log_beta_cdf_arr(lo.ravel(), a, b)
    l_hi, u_hi = log_beta_cdf_arr(hi.ravel(), a, b)
    out = np.full(l_lo.shape, -np.inf)
    half = -0.6931471805599453
    with np.errstate(invalid="ignore", over="ignore"):
        lower_tail = l_hi < half
        upper_tail = ~lower_tail & (u_lo < half)
        middle = ~lower_tail & ~upper_tail
        out[lower_tail] = l_hi[lower_tail] + _log1mexp_arr(l_lo[lower_tail] - l_hi[lower_tail])
        out[upper_tail] = u_lo[upper_tail] + _log1mexp_arr(u_hi[upper_tail] - u_lo[upper_tail])
        out[middle] = np.log1p(-(np.exp(l_lo[middle]) + np.exp(u_hi[middle])))
    out[(hi <= lo).ravel()] = -np.inf
    return out.reshape(lo.shape)


# ---- covariate-model likelihood ------------------------------------------

def _prob_pair(t):
    e = np.exp(-np.abs(t))
    inv = 1.0 / (1.0 + e)
    pos = t >= 0.0
    return np.where(pos, inv, e * inv), np.where(pos, e * inv, inv)


def zib_loglik(y, X, Z, theta, beta):
    w, wc = _prob_pair(X @ theta)
    p, pc = _prob_pair(Z @ beta)
    ones = y == 1
    return float(np.log(w[ones] * p[ones]).sum() + np.log(wc[~ones] + w[~ones] * pc[~ones]).sum())


def zib_loglik_grad(y, X, Z, theta, beta):
    w, wc = _prob_pair(X @ theta)
    p, pc = _prob_pair(Z @ beta)
    ones = y == 1
    miss = wc + w * pc
    total = np.log(w[ones] * p[ones]).sum() + np.log(miss[~ones]).sum()
    d_eta = np.where(ones, wc, -p * w * wc / miss)
    d_zeta = np.where(ones, pc, -w * p * pc / miss)
    return float(total), X.T @ d_eta, Z.T @ d_zeta
