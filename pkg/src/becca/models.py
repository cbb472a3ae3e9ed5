"""Likelihoods for linear and logistic regression and assembly of the
joint unconstrained log posterior with its analytic gradient.

Both parameterizations of the coefficient block are supported:

* ``centered``: the sampler moves beta_j directly.
* ``noncentered``: the sampler moves standard-normal innovations z_j and
  beta_j = s_j * z_j is reconstructed from the prior scale s_j.  This
  breaks the funnel geometry of the shrinkage hierarchies and is the
  default for the BECCA and horseshoe-family priors.

Gradient assembly uses the shared scale-mixture structure: for every
prior the coupling of the coefficient block to a scale parameter theta
enters through d(log s_j)/d(theta), so a single quantity

    q_j = beta_j^2 / s_j^2 - 1          (centered)
    q_j = G_j * beta_j                  (noncentered, G = dloglik/dbeta)

carries the whole chain rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import digamma, gammaln

from . import _kernels
from .core_stats import DomainError
from .priors import REJECTED
from .transforms import (
    Block,
    BlockLayout,
    _simplex_backward,
    _simplex_forward,
    sigmoid,
    softplus,
    to_constrained,
)

__all__ = [
    "Dataset",
    "PosteriorTarget",
    "linear_log_likelihood",
    "logistic_prob",
    "logistic_log_likelihood",
    "log_posterior_and_grad",
    "linear_conditional_beta",
    "MODELS",
    "PRIORS",
    "default_parameterization",
]

MODELS = ("linear", "logistic")
PRIORS = ("becca", "hs", "hsplus", "dl")

LOG_TWO_PI = math.log(2.0 * math.pi)

# Wide normal on the optional unpenalized logistic intercept.
_INTERCEPT_SD = 10.0


@dataclass
class Dataset:
    """Response vector, predictor matrix and (for simulated data) the truth."""

    y: np.ndarray
    X: np.ndarray
    true_beta: np.ndarray | None = None
    true_inclusion: np.ndarray | None = None
    standardized: bool = False
    scaling: object | None = field(default=None, repr=False)

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim != 2:
            raise ValueError("X must be a 2-d matrix")
        if self.y.shape != (self.X.shape[0],):
            raise ValueError("y length must match the number of rows of X")
        if not np.all(np.isfinite(self.X)):
            raise ValueError("X contains non-finite entries")
        if not np.all(np.isfinite(self.y)):
            raise ValueError("y contains non-finite entries")
        if self.true_beta is not None:
            self.true_beta = np.asarray(self.true_beta, dtype=float)
            if self.true_beta.shape != (self.p,):
                raise ValueError("true_beta length must equal the number of predictors")
        if self.true_inclusion is not None:
            self.true_inclusion = np.asarray(self.true_inclusion, dtype=int)
            if self.true_inclusion.shape != (self.p,):
                raise ValueError("true_inclusion length must equal the number of predictors")
            if not np.all(np.isin(self.true_inclusion, (0, 1))):
                raise ValueError("true_inclusion must be 0/1")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


def linear_log_likelihood(y, X, beta, sigma2) -> float:
    """Fully normalized Gaussian log likelihood of the linear model."""
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if X.shape != (y.shape[0], beta.shape[0]):
        raise ValueError(f"dimension mismatch: X {X.shape}, y {y.shape}, beta {beta.shape}")
    if sigma2 <= 0:
        raise DomainError("sigma2 must be positive")
    n = y.shape[0]
    r = y - X @ beta
    return float(-0.5 * n * (LOG_TWO_PI + math.log(sigma2)) - (r @ r) / (2.0 * sigma2))


def logistic_prob(x_row, beta) -> float:
    """Success probability, a numerically stable sigmoid of the linear predictor."""
    x_row = np.asarray(x_row, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if x_row.shape != beta.shape:
        raise ValueError("x_row and beta must have the same length")
    return float(sigmoid(float(x_row @ beta)))


def logistic_log_likelihood(y, X, beta) -> float:
    """Bernoulli log likelihood, computed as sum(y * eta - softplus(eta))."""
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if y.shape[0] == 0:
        return 0.0
    if X.shape != (y.shape[0], beta.shape[0]):
        raise ValueError(f"dimension mismatch: X {X.shape}, y {y.shape}, beta {beta.shape}")
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise ValueError("logistic responses must be 0/1")
    eta = X @ beta
    return float(np.sum(y * eta - softplus(eta)))


def linear_conditional_beta(X, y, prior_variances, sigma2):
    """Exact Gaussian conditional posterior of beta given all scales.

    Returns (mean, covariance) of beta | y, X, D, sigma2 where the prior is
    N(0, diag(prior_variances)).  Used as an oracle for the sampler.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    d = np.asarray(prior_variances, dtype=float)
    precision = X.T @ X / sigma2 + np.diag(1.0 / d)
    cov = np.linalg.inv(precision)
    mean = cov @ (X.T @ y) / sigma2
    return mean, cov


def default_parameterization(prior: str) -> str:
    return "centered" if prior == "dl" else "noncentered"


def _build_layout(model, prior, p, intercept):
    blocks = []
    if intercept:
        blocks.append(Block("beta0", "identity", 1))
    blocks.append(Block("beta", "identity", p))
    if prior == "becca":
        blocks += [Block("gamma", "logit", p), Block("g", "log", 1),
                   Block("u", "log", 1), Block("v", "log", 1)]
    elif prior == "hs":
        blocks += [Block("lambda", "log", p), Block("tau", "log", 1)]
    elif prior == "hsplus":
        blocks += [Block("lambda", "log", p), Block("eta", "log", p),
                   Block("tau", "log", 1)]
    elif prior == "dl":
        blocks += [Block("psi", "log", p), Block("phi", "simplex", p),
                   Block("tau", "log", 1)]
    else:
        raise ValueError(f"unknown prior {prior!r}")
    if model == "linear":
        blocks.append(Block("sigma2", "log", 1))
    return BlockLayout(blocks)


class PosteriorTarget:
    """Joint unconstrained log posterior for one (model, prior, dataset).

    Immutable after construction; evaluation is reentrant.  Evaluating at
    any finite point returns a finite value or the rejected sentinel
    (-inf with a zero gradient), never NaN.
    """

    def __init__(self, model, prior, data: Dataset, a=0.5, b=0.5, a_dl=None,
                 parameterization=None, intercept=False):
        if model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {model!r}")
        if prior not in PRIORS:
            raise ValueError(f"prior must be one of {PRIORS}, got {prior!r}")
        if model == "logistic" and not np.all(np.isin(data.y, (0.0, 1.0))):
            raise ValueError("logistic model requires 0/1 responses")
        if intercept and model != "logistic":
            raise ValueError("the intercept flag applies to the logistic model only")
        if parameterization is None:
            parameterization = default_parameterization(prior)
        if parameterization not in ("centered", "noncentered"):
            raise ValueError(f"unknown parameterization {parameterization!r}")
        if prior == "dl" and data.p < 2:
            raise ValueError("the Dirichlet-Laplace prior needs at least 2 predictors")
        self.model = model
        self.prior = prior
        self.data = data
        self.a = float(a)
        self.b = float(b)
        self.a_dl = float(a_dl) if a_dl is not None else 1.0 / data.p
        if self.a_dl <= 0:
            raise ValueError("a_dl must be positive")
        self.parameterization = parameterization
        self.intercept = bool(intercept)
        self.layout = _build_layout(model, prior, data.p, intercept)
        self.dim = self.layout.unconstrained_dim

        self._X = np.ascontiguousarray(data.X)
        self._XT = np.ascontiguousarray(data.X.T)
        self._y = np.ascontiguousarray(data.y)
        self._n = data.n
        self._p = data.p
        self._include_s2 = model == "linear"

        sl = self.layout.unconstrained_slices
        self._s_beta = sl["beta"]
        self._s_beta0 = sl["beta0"] if intercept else None
        self._s_gamma = sl.get("gamma")
        self._s_g = sl.get("g")
        self._s_u = sl.get("u")
        self._s_v = sl.get("v")
        self._s_lam = sl.get("lambda")
        self._s_eta = sl.get("eta")
        self._s_tau = sl.get("tau")
        self._s_psi = sl.get("psi")
        self._s_phi = sl.get("phi")
        self._s_sigma2 = sl.get("sigma2")

        p = self._p
        self._lik_const = -0.5 * self._n * LOG_TWO_PI
        self._z_const = -0.5 * p * LOG_TWO_PI
        self._ig_const = self.a * math.log(self.b) - gammaln(self.a)
        if prior == "dl":
            ad = self.a_dl
            self._dir_const = float(gammaln(p * ad) - p * gammaln(ad))
            self._tau_shape = p * ad
            self._tau_const = float(self._tau_shape * math.log(0.5) - gammaln(self._tau_shape))
        self.use_compiled = _kernels.HAVE_NUMBA

    # -- public surface ---------------------------------------------------

    def constrained_names(self):
        return self.layout.names()

    def constrain(self, z) -> np.ndarray:
        """Constrained parameter vector at z; beta is reconstructed from the
        innovations under the noncentered parameterization."""
        tv = to_constrained(np.asarray(z, dtype=float), self.layout)
        x = tv.constrained.copy()
        if self.parameterization == "noncentered":
            cs = self.layout.constrained_slices
            s = self._scale_from_constrained(x)
            x[cs["beta"]] = x[cs["beta"]] * s
        return x

    def logp(self, z) -> float:
        return self.logp_and_grad(z)[0]

    def logp_and_grad(self, z):
        """Log posterior (likelihood + prior + transform Jacobians) and its
        exact gradient with respect to the unconstrained coordinates."""
        z = np.asarray(z, dtype=float)
        if z.shape != (self.dim,):
            raise ValueError(f"expected point of dimension {self.dim}, got {z.shape}")
        if not np.all(np.isfinite(z)):
            return REJECTED, np.zeros(self.dim)
        if self.use_compiled:
            grad = np.zeros(self.dim)
            value = self._call_kernel(z, grad)
        else:
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                value, grad = self._evaluate(z)
        if not (np.isfinite(value) and np.all(np.isfinite(grad))):
            return REJECTED, np.zeros(self.dim)
        return value, grad

    def _call_kernel(self, z, grad):
        linear = self.model == "linear"
        noncentered = self.parameterization == "noncentered"
        if self.prior == "becca":
            return _kernels.becca_logp_grad(
                z, self._X, self._XT, self._y, linear, noncentered,
                self.intercept, self.a, self.b, grad)
        if self.prior in ("hs", "hsplus"):
            return _kernels.hs_logp_grad(
                z, self._X, self._XT, self._y, self.prior == "hsplus", linear,
                noncentered, self.intercept, self.a, self.b, grad)
        return _kernels.dl_logp_grad(
            z, self._X, self._XT, self._y, linear, noncentered,
            self.intercept, self.a, self.b, self.a_dl, self._dir_const,
            self._tau_shape, self._tau_const, grad)

    # -- internals ---------------------------------------------------------

    def _scale_from_constrained(self, x):
        """Prior sd of beta given the constrained scale parameters."""
        cs = self.layout.constrained_slices
        if self.prior == "becca":
            s = x[cs["g"]][0] ** 0.5 * x[cs["gamma"]]
            if self._include_s2:
                s = s * x[cs["sigma2"]][0] ** 0.5
            return s
        if self.prior == "hs":
            return x[cs["lambda"]] * x[cs["tau"]][0]
        if self.prior == "hsplus":
            return x[cs["lambda"]] * x[cs["eta"]] * x[cs["tau"]][0]
        return np.sqrt(x[cs["psi"]]) * x[cs["phi"]] * x[cs["tau"]][0]

    def _evaluate(self, z):
        p = self._p
        noncentered = self.parameterization == "noncentered"
        grad = np.zeros(self.dim)
        value = 0.0

        zb = z[self._s_beta]

        # --- decode scale blocks, accumulating transform Jacobians ---
        if self.prior == "becca":
            wg = z[self._s_gamma]
            gamma = sigmoid(wg)
            log_gamma = -softplus(-wg)
            log_1m_gamma = -softplus(wg)
            w_g = z[self._s_g][0]
            w_u = z[self._s_u][0]
            w_v = z[self._s_v][0]
            g = float(np.exp(w_g))
            u = float(np.exp(w_u))
            v = float(np.exp(w_v))
            if not (0.0 < g < np.inf and 0.0 < u < np.inf and 0.0 < v < np.inf):
                return REJECTED, grad
            value += float(np.sum(log_gamma + log_1m_gamma))      # logit Jacobian
            value += w_g + w_u + w_v
            log_scale = 0.5 * w_g + log_gamma
        elif self.prior in ("hs", "hsplus"):
            lam = np.exp(z[self._s_lam])
            w_tau = z[self._s_tau][0]
            tau = float(np.exp(w_tau))
            if not (np.all(np.isfinite(lam)) and 0.0 < tau < np.inf):
                return REJECTED, grad
            value += float(np.sum(z[self._s_lam])) + w_tau
            log_scale = z[self._s_lam] + w_tau
            if self.prior == "hsplus":
                eta = np.exp(z[self._s_eta])
                if not np.all(np.isfinite(eta)):
                    return REJECTED, grad
                value += float(np.sum(z[self._s_eta]))
                log_scale = log_scale + z[self._s_eta]
        else:  # dl
            psi = np.exp(z[self._s_psi])
            w_tau = z[self._s_tau][0]
            tau = float(np.exp(w_tau))
            if not (np.all(np.isfinite(psi)) and 0.0 < tau < np.inf):
                return REJECTED, grad
            phi, logj_phi, v_stick = _simplex_forward(z[self._s_phi])
            if not np.isfinite(logj_phi):
                return REJECTED, grad
            value += float(np.sum(z[self._s_psi])) + w_tau + logj_phi
            log_scale = 0.5 * z[self._s_psi] + np.log(phi) + w_tau

        if self._include_s2:
            ws = z[self._s_sigma2][0]
            sigma2 = float(np.exp(ws))
            if not 0.0 < sigma2 < np.inf:
                return REJECTED, grad
            value += ws                                           # log Jacobian
            if self.prior == "becca":
                log_scale = log_scale + 0.5 * ws
        else:
            sigma2 = 1.0
            ws = 0.0

        s = np.exp(log_scale)
        if not np.all(np.isfinite(s)):
            return REJECTED, grad

        # --- coefficient block and likelihood ---
        beta = s * zb if noncentered else zb
        eta_lin = self._X @ beta
        if self.intercept:
            beta0 = z[self._s_beta0][0]
            eta_lin = eta_lin + beta0
        if self.model == "linear":
            r = self._y - eta_lin
            rss = float(r @ r)
            value += self._lik_const - 0.5 * self._n * ws - rss / (2.0 * sigma2)
            G = self._XT @ r / sigma2
            dlik_dsigma2 = -0.5 * self._n / sigma2 + rss / (2.0 * sigma2 * sigma2)
        else:
            pi = sigmoid(eta_lin)
            value += float(self._y @ eta_lin - np.sum(softplus(eta_lin)))
            resid = self._y - pi
            G = self._XT @ resid
            dlik_dsigma2 = 0.0
        if self.intercept:
            value += -0.5 * (LOG_TWO_PI + 2.0 * math.log(_INTERCEPT_SD)) \
                - beta0 * beta0 / (2.0 * _INTERCEPT_SD**2)
            grad[self._s_beta0] = float(np.sum(resid)) - beta0 / _INTERCEPT_SD**2

        # --- coefficient prior and the scale-coupling vector q ---
        if noncentered:
            value += self._z_const - 0.5 * float(zb @ zb)
            grad[self._s_beta] = G * s - zb
            q = G * beta
        else:
            ratio = beta / s
            value += self._z_const - float(np.sum(log_scale)) - 0.5 * float(ratio @ ratio)
            grad[self._s_beta] = G - beta / (s * s)
            q = ratio * ratio - 1.0

        # --- prior-specific hyperprior terms and scale gradients ---
        if self.prior == "becca":
            value += float(np.sum((u - 1.0) * log_gamma + (v - 1.0) * log_1m_gamma)) \
                - p * float(_betaln(u, v))
            value += _log_half_cauchy_scalar(g) + _log_half_cauchy_scalar(u) \
                + _log_half_cauchy_scalar(v)
            d_gamma = q / gamma + (u - 1.0) / gamma - (v - 1.0) / (1.0 - gamma)
            grad[self._s_gamma] = d_gamma * gamma * (1.0 - gamma) + (1.0 - 2.0 * gamma)
            sum_q = float(np.sum(q))
            d_g = sum_q / (2.0 * g) - 2.0 * g / (1.0 + g * g)
            grad[self._s_g] = d_g * g + 1.0
            dig_uv = digamma(u + v)
            d_u = float(np.sum(log_gamma)) - p * (digamma(u) - dig_uv) - 2.0 * u / (1.0 + u * u)
            grad[self._s_u] = d_u * u + 1.0
            d_v = float(np.sum(log_1m_gamma)) - p * (digamma(v) - dig_uv) - 2.0 * v / (1.0 + v * v)
            grad[self._s_v] = d_v * v + 1.0
            d_sigma2_prior = sum_q / (2.0 * sigma2) if self._include_s2 else 0.0
        elif self.prior in ("hs", "hsplus"):
            value += float(np.sum(_LOG_2_OVER_PI - np.log1p(lam * lam)))
            value += _log_half_cauchy_scalar(tau)
            d_lam = q / lam - 2.0 * lam / (1.0 + lam * lam)
            grad[self._s_lam] = d_lam * lam + 1.0
            sum_q = float(np.sum(q))
            d_tau = sum_q / tau - 2.0 * tau / (1.0 + tau * tau)
            grad[self._s_tau] = d_tau * tau + 1.0
            if self.prior == "hsplus":
                value += float(np.sum(_LOG_2_OVER_PI - np.log1p(eta * eta)))
                d_eta = q / eta - 2.0 * eta / (1.0 + eta * eta)
                grad[self._s_eta] = d_eta * eta + 1.0
            d_sigma2_prior = 0.0
        else:  # dl
            ad = self.a_dl
            value += float(np.sum(math.log(0.5) - 0.5 * psi))
            value += self._dir_const + float(np.sum((ad - 1.0) * np.log(phi)))
            value += self._tau_const + (self._tau_shape - 1.0) * w_tau - 0.5 * tau
            d_psi = q / (2.0 * psi) - 0.5
            grad[self._s_psi] = d_psi * psi + 1.0
            d_phi = q / phi + (ad - 1.0) / phi
            grad[self._s_phi] = _simplex_backward(phi, v_stick, d_phi, include_jacobian=True)
            sum_q = float(np.sum(q))
            d_tau = sum_q / tau + (self._tau_shape - 1.0) / tau - 0.5
            grad[self._s_tau] = d_tau * tau + 1.0
            d_sigma2_prior = 0.0

        if self._include_s2:
            value += self._ig_const - (self.a + 1.0) * ws - self.b / sigma2
            d_s2 = dlik_dsigma2 + d_sigma2_prior \
                - (self.a + 1.0) / sigma2 + self.b / (sigma2 * sigma2)
            grad[self._s_sigma2] = d_s2 * sigma2 + 1.0

        return value, grad


_LOG_2_OVER_PI = math.log(2.0 / math.pi)


def _log_half_cauchy_scalar(x):
    return _LOG_2_OVER_PI - math.log1p(x * x)


def _betaln(u, v):
    return gammaln(u) + gammaln(v) - gammaln(u + v)


def log_posterior_and_grad(target: PosteriorTarget, z):
    """Joint unconstrained log posterior and gradient at ``z``."""
    return target.logp_and_grad(z)
