"""Compiled hot-path evaluation of the joint log posteriors.

These kernels mirror the numpy reference implementation in
:mod:`becca.models` exactly (same clipping, same rejection rules); the
test suite asserts agreement between the two paths.  Each kernel writes
the gradient into its ``grad`` argument and returns the log-posterior
value, returning -inf for points that must be rejected.
"""

from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn
        if args and callable(args[0]):
            return args[0]
        return wrap

NEG_INF = -np.inf
LOG_SQRT_TWO_PI = 0.5 * math.log(2.0 * math.pi)
LOG_TWO_OVER_PI = math.log(2.0 / math.pi)
LOG_HALF = math.log(0.5)
_TINY = 2.2250738585072014e-308
_ONE_MINUS_EPS = 0.9999999999999999  # nextafter(1, 0)


@njit(cache=True)
def _sigmoid(x):
    if x >= 0.0:
        out = 1.0 / (1.0 + math.exp(-x))
    else:
        e = math.exp(x)
        out = e / (1.0 + e)
    if out < _TINY:
        return _TINY
    if out > _ONE_MINUS_EPS:
        return _ONE_MINUS_EPS
    return out


@njit(cache=True)
def _softplus(x):
    if x > 0.0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


@njit(cache=True)
def _digamma(x):
    """Digamma for x > 0 via upward recurrence and the asymptotic series."""
    res = 0.0
    while x < 6.0:
        res -= 1.0 / x
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    res += math.log(x) - 0.5 * inv
    res -= inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (
        1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0)))))
    return res


@njit(cache=True)
def _likelihood(z, X, XT, y, beta, off, intercept, linear, ws, sigma2, grad):
    """Shared likelihood block.  Returns (value, dlik_dsigma2, G) with G
    the gradient of the log likelihood w.r.t. beta; the intercept
    gradient entry is written directly."""
    n = X.shape[0]
    eta = np.dot(X, beta)
    beta0 = 0.0
    if intercept:
        beta0 = z[0]
        for i in range(n):
            eta[i] += beta0
    value = 0.0
    dlik_ds2 = 0.0
    resid_sum = 0.0
    if linear:
        r = y - eta
        rss = 0.0
        for i in range(n):
            rss += r[i] * r[i]
        value = -n * LOG_SQRT_TWO_PI - 0.5 * n * ws - rss / (2.0 * sigma2)
        G = np.dot(XT, r)
        for j in range(G.shape[0]):
            G[j] /= sigma2
        dlik_ds2 = -0.5 * n / sigma2 + rss / (2.0 * sigma2 * sigma2)
        if intercept:
            for i in range(n):
                resid_sum += r[i] / sigma2
    else:
        resid = np.empty(n)
        for i in range(n):
            value += y[i] * eta[i] - _softplus(eta[i])
            resid[i] = y[i] - _sigmoid(eta[i])
            resid_sum += resid[i]
        G = np.dot(XT, resid)
    if intercept:
        # wide normal prior on the unpenalized intercept (sd 10)
        value += -LOG_SQRT_TWO_PI - math.log(10.0) - beta0 * beta0 / 200.0
        grad[0] = resid_sum - beta0 / 100.0
    return value, dlik_ds2, G


@njit(cache=True)
def becca_logp_grad(z, X, XT, y, linear, noncentered, intercept, a, b, grad):
    n = X.shape[0]
    p = X.shape[1]
    off = 1 if intercept else 0
    iw = off + 2 * p
    w_g = z[iw]
    w_u = z[iw + 1]
    w_v = z[iw + 2]
    if w_g > 700.0 or w_u > 700.0 or w_v > 700.0:
        return NEG_INF
    g = math.exp(w_g)
    u = math.exp(w_u)
    v = math.exp(w_v)
    if g <= 0.0 or u <= 0.0 or v <= 0.0:
        return NEG_INF
    ws = 0.0
    sigma2 = 1.0
    if linear:
        ws = z[iw + 3]
        if ws > 700.0:
            return NEG_INF
        sigma2 = math.exp(ws)
        if sigma2 <= 0.0:
            return NEG_INF

    value = w_g + w_u + w_v
    if linear:
        value += ws
    log_sqrt_gs = 0.5 * w_g + (0.5 * ws if linear else 0.0)

    gamma = np.empty(p)
    log_gamma = np.empty(p)
    log_1mg = np.empty(p)
    s = np.empty(p)
    beta = np.empty(p)
    for j in range(p):
        w = z[off + p + j]
        gamma[j] = _sigmoid(w)
        lg = -_softplus(-w)
        l1 = -_softplus(w)
        log_gamma[j] = lg
        log_1mg[j] = l1
        value += lg + l1                      # logit Jacobian
        sj = math.exp(log_sqrt_gs + lg)
        s[j] = sj
        beta[j] = z[off + j] * sj if noncentered else z[off + j]

    lik, dlik_ds2, G = _likelihood(z, X, XT, y, beta, off, intercept,
                                   linear, ws, sigma2, grad)
    value += lik

    q = np.empty(p)
    if noncentered:
        for j in range(p):
            zj = z[off + j]
            value += -LOG_SQRT_TWO_PI - 0.5 * zj * zj
            grad[off + j] = G[j] * s[j] - zj
            q[j] = G[j] * beta[j]
    else:
        for j in range(p):
            if s[j] <= 0.0:
                return NEG_INF
            ratio = beta[j] / s[j]
            value += -LOG_SQRT_TWO_PI - (log_sqrt_gs + log_gamma[j]) - 0.5 * ratio * ratio
            grad[off + j] = G[j] - beta[j] / (s[j] * s[j])
            q[j] = ratio * ratio - 1.0

    lbeta = math.lgamma(u) + math.lgamma(v) - math.lgamma(u + v)
    sum_lg = 0.0
    sum_l1 = 0.0
    sum_q = 0.0
    for j in range(p):
        value += (u - 1.0) * log_gamma[j] + (v - 1.0) * log_1mg[j]
        d_gamma = (q[j] + u - 1.0) / gamma[j] - (v - 1.0) / (1.0 - gamma[j])
        grad[off + p + j] = d_gamma * gamma[j] * (1.0 - gamma[j]) + (1.0 - 2.0 * gamma[j])
        sum_lg += log_gamma[j]
        sum_l1 += log_1mg[j]
        sum_q += q[j]
    value -= p * lbeta
    value += LOG_TWO_OVER_PI - math.log1p(g * g)
    value += LOG_TWO_OVER_PI - math.log1p(u * u)
    value += LOG_TWO_OVER_PI - math.log1p(v * v)

    d_g = sum_q / (2.0 * g) - 2.0 * g / (1.0 + g * g)
    grad[iw] = d_g * g + 1.0
    dig_uv = _digamma(u + v)
    d_u = sum_lg - p * (_digamma(u) - dig_uv) - 2.0 * u / (1.0 + u * u)
    grad[iw + 1] = d_u * u + 1.0
    d_v = sum_l1 - p * (_digamma(v) - dig_uv) - 2.0 * v / (1.0 + v * v)
    grad[iw + 2] = d_v * v + 1.0
    if linear:
        value += a * math.log(b) - math.lgamma(a) - (a + 1.0) * ws - b / sigma2
        d_s2 = dlik_ds2 + sum_q / (2.0 * sigma2) - (a + 1.0) / sigma2 + b / (sigma2 * sigma2)
        grad[iw + 3] = d_s2 * sigma2 + 1.0
    return value


@njit(cache=True)
def hs_logp_grad(z, X, XT, y, plus, linear, noncentered, intercept, a, b, grad):
    p = X.shape[1]
    off = 1 if intercept else 0
    n_local = 2 * p if plus else p
    iw = off + p + n_local
    w_tau = z[iw]
    if w_tau > 700.0:
        return NEG_INF
    tau = math.exp(w_tau)
    if tau <= 0.0:
        return NEG_INF
    ws = 0.0
    sigma2 = 1.0
    if linear:
        ws = z[iw + 1]
        if ws > 700.0:
            return NEG_INF
        sigma2 = math.exp(ws)
        if sigma2 <= 0.0:
            return NEG_INF

    value = w_tau
    if linear:
        value += ws

    lam = np.empty(p)
    eta_l = np.empty(p)
    log_s = np.empty(p)
    s = np.empty(p)
    beta = np.empty(p)
    for j in range(p):
        wl = z[off + p + j]
        if wl > 700.0:
            return NEG_INF
        lam[j] = math.exp(wl)
        if lam[j] <= 0.0:
            return NEG_INF
        value += wl
        ls = wl + w_tau
        if plus:
            we = z[off + 2 * p + j]
            if we > 700.0:
                return NEG_INF
            eta_l[j] = math.exp(we)
            if eta_l[j] <= 0.0:
                return NEG_INF
            value += we
            ls += we
        log_s[j] = ls
        s[j] = math.exp(ls)
        beta[j] = z[off + j] * s[j] if noncentered else z[off + j]

    lik, dlik_ds2, G = _likelihood(z, X, XT, y, beta, off, intercept,
                                   linear, ws, sigma2, grad)
    value += lik

    q = np.empty(p)
    if noncentered:
        for j in range(p):
            zj = z[off + j]
            value += -LOG_SQRT_TWO_PI - 0.5 * zj * zj
            grad[off + j] = G[j] * s[j] - zj
            q[j] = G[j] * beta[j]
    else:
        for j in range(p):
            if s[j] <= 0.0:
                return NEG_INF
            ratio = beta[j] / s[j]
            value += -LOG_SQRT_TWO_PI - log_s[j] - 0.5 * ratio * ratio
            grad[off + j] = G[j] - beta[j] / (s[j] * s[j])
            q[j] = ratio * ratio - 1.0

    sum_q = 0.0
    for j in range(p):
        value += LOG_TWO_OVER_PI - math.log1p(lam[j] * lam[j])
        d_lam = q[j] / lam[j] - 2.0 * lam[j] / (1.0 + lam[j] * lam[j])
        grad[off + p + j] = d_lam * lam[j] + 1.0
        if plus:
            value += LOG_TWO_OVER_PI - math.log1p(eta_l[j] * eta_l[j])
            d_eta = q[j] / eta_l[j] - 2.0 * eta_l[j] / (1.0 + eta_l[j] * eta_l[j])
            grad[off + 2 * p + j] = d_eta * eta_l[j] + 1.0
        sum_q += q[j]
    value += LOG_TWO_OVER_PI - math.log1p(tau * tau)
    d_tau = sum_q / tau - 2.0 * tau / (1.0 + tau * tau)
    grad[iw] = d_tau * tau + 1.0
    if linear:
        value += a * math.log(b) - math.lgamma(a) - (a + 1.0) * ws - b / sigma2
        d_s2 = dlik_ds2 - (a + 1.0) / sigma2 + b / (sigma2 * sigma2)
        grad[iw + 1] = d_s2 * sigma2 + 1.0
    return value


@njit(cache=True)
def dl_logp_grad(z, X, XT, y, linear, noncentered, intercept, a, b,
                 a_dl, dir_const, tau_shape, tau_const, grad):
    p = X.shape[1]
    off = 1 if intercept else 0
    i_phi = off + 2 * p
    iw = i_phi + (p - 1)
    w_tau = z[iw]
    if w_tau > 700.0:
        return NEG_INF
    tau = math.exp(w_tau)
    if tau <= 0.0:
        return NEG_INF
    ws = 0.0
    sigma2 = 1.0
    if linear:
        ws = z[iw + 1]
        if ws > 700.0:
            return NEG_INF
        sigma2 = math.exp(ws)
        if sigma2 <= 0.0:
            return NEG_INF

    value = w_tau
    if linear:
        value += ws

    # stick-breaking simplex with log-Jacobian
    phi = np.empty(p)
    v_stick = np.empty(p - 1)
    stick = 1.0
    for k in range(p - 1):
        if stick <= 0.0:
            return NEG_INF
        vk = _sigmoid(z[i_phi + k] - math.log(p - (k + 1)))
        v_stick[k] = vk
        xk = vk * stick
        phi[k] = xk if xk > _TINY else _TINY
        value += math.log(vk) + math.log1p(-vk) + math.log(stick)
        stick *= 1.0 - vk
    phi[p - 1] = stick if stick > _TINY else _TINY

    psi = np.empty(p)
    log_s = np.empty(p)
    s = np.empty(p)
    beta = np.empty(p)
    for j in range(p):
        wp = z[off + p + j]
        if wp > 700.0:
            return NEG_INF
        psi[j] = math.exp(wp)
        if psi[j] <= 0.0:
            return NEG_INF
        value += wp
        ls = 0.5 * wp + math.log(phi[j]) + w_tau
        log_s[j] = ls
        s[j] = math.exp(ls)
        beta[j] = z[off + j] * s[j] if noncentered else z[off + j]

    lik, dlik_ds2, G = _likelihood(z, X, XT, y, beta, off, intercept,
                                   linear, ws, sigma2, grad)
    value += lik

    q = np.empty(p)
    if noncentered:
        for j in range(p):
            zj = z[off + j]
            value += -LOG_SQRT_TWO_PI - 0.5 * zj * zj
            grad[off + j] = G[j] * s[j] - zj
            q[j] = G[j] * beta[j]
    else:
        for j in range(p):
            if s[j] <= 0.0:
                return NEG_INF
            ratio = beta[j] / s[j]
            value += -LOG_SQRT_TWO_PI - log_s[j] - 0.5 * ratio * ratio
            grad[off + j] = G[j] - beta[j] / (s[j] * s[j])
            q[j] = ratio * ratio - 1.0

    sum_q = 0.0
    d_phi = np.empty(p)
    for j in range(p):
        value += LOG_HALF - 0.5 * psi[j]
        d_psi = q[j] / (2.0 * psi[j]) - 0.5
        grad[off + p + j] = d_psi * psi[j] + 1.0
        value += (a_dl - 1.0) * math.log(phi[j])
        d_phi[j] = (q[j] + a_dl - 1.0) / phi[j]
        sum_q += q[j]
    value += dir_const
    value += tau_const + (tau_shape - 1.0) * w_tau - 0.5 * tau
    d_tau = sum_q / tau + (tau_shape - 1.0) / tau - 0.5
    grad[iw] = d_tau * tau + 1.0

    # pull d_phi back through the stick-breaking map
    suffix = 0.0
    suffixes = np.empty(p - 1)
    for k in range(p - 2, -1, -1):
        suffix += d_phi[k + 1] * phi[k + 1]
        suffixes[k] = suffix
    stick = 1.0
    for k in range(p - 1):
        vk = v_stick[k]
        dv = d_phi[k] * stick - suffixes[k] / (1.0 - vk)
        grad[i_phi + k] = dv * vk * (1.0 - vk) + (1.0 - vk) - (p - (k + 1)) * vk
        stick *= 1.0 - vk

    if linear:
        value += a * math.log(b) - math.lgamma(a) - (a + 1.0) * ws - b / sigma2
        d_s2 = dlik_ds2 - (a + 1.0) / sigma2 + b / (sigma2 * sigma2)
        grad[iw + 1] = d_s2 * sigma2 + 1.0
    return value
