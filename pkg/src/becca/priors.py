"""Log-prior densities and marginal-density evaluators for the four
shrinkage priors: the Beta-Cauchy-Cauchy (BECCA) prior, the horseshoe,
the horseshoe+ and the Dirichlet-Laplace prior.

Every prior shares the scale-mixture skeleton ``beta_j ~ N(0, s_j^2)``;
they differ in how the per-coordinate prior scale ``s_j`` is built:

==========  =====================================
becca       s_j^2 = g * sigma2 * gamma_j^2   (sigma2 dropped for logistic)
hs          s_j^2 = lambda_j^2 * tau^2
hsplus      s_j^2 = lambda_j^2 * eta_j^2 * tau^2
dl          s_j^2 = psi_j * phi_j^2 * tau^2
==========  =====================================

The functions here return prior values only; the joint posterior and its
analytic gradient are assembled in :mod:`becca.models`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc, gammaln

from .transforms import softplus
from .core_stats import (
    IntegrationError,
    integrate_1d,
    log_beta_pdf,
    log_half_cauchy,
    log_inv_gamma_pdf,
)

__all__ = [
    "BeccaState",
    "HorseshoeState",
    "DirichletLaplaceState",
    "becca_log_prior",
    "hs_log_prior",
    "dl_log_prior",
    "kappa",
    "becca_marginal_gamma_density",
    "becca_gamma_tail_mass",
    "becca_marginal_beta_density",
    "half_cauchy_product_density",
    "hs_marginal_beta_density",
    "hsplus_marginal_beta_density",
]

LOG_SQRT_TWO_PI = 0.5 * math.log(2.0 * math.pi)

# Log-prior value treated by the sampler as an infinite energy barrier.
REJECTED = -np.inf


def _normal_logpdf_sum(beta, variance):
    """Sum_j log N(beta_j; 0, variance_j); REJECTED when a variance underflows."""
    variance = np.asarray(variance, dtype=float)
    if np.any(variance <= 0.0) or not np.all(np.isfinite(variance)):
        return REJECTED
    out = float(np.sum(-LOG_SQRT_TWO_PI - 0.5 * np.log(variance) - beta * beta / (2.0 * variance)))
    return out if np.isfinite(out) else REJECTED


def _positive(name, value):
    if np.any(np.asarray(value) <= 0):
        raise ValueError(f"{name} must be strictly positive")


@dataclass
class BeccaState:
    """Latent state of the BECCA prior for one regression problem."""

    beta: np.ndarray
    gamma: np.ndarray
    g: float
    u: float
    v: float
    sigma2: float = 1.0

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        self.gamma = np.asarray(self.gamma, dtype=float)
        if self.beta.shape != self.gamma.shape:
            raise ValueError("beta and gamma must have the same length")
        if np.any(self.gamma <= 0) or np.any(self.gamma >= 1):
            raise ValueError("gamma entries must lie strictly in (0, 1)")
        _positive("g", self.g)
        _positive("u", self.u)
        _positive("v", self.v)
        _positive("sigma2", self.sigma2)


@dataclass
class HorseshoeState:
    """Latent state of the horseshoe prior; ``eta`` present only for HS+."""

    beta: np.ndarray
    lam: np.ndarray
    tau: float
    eta: np.ndarray | None = None
    sigma2: float = 1.0

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        self.lam = np.asarray(self.lam, dtype=float)
        if self.beta.shape != self.lam.shape:
            raise ValueError("beta and lambda must have the same length")
        _positive("lambda", self.lam)
        _positive("tau", self.tau)
        _positive("sigma2", self.sigma2)
        if self.eta is not None:
            self.eta = np.asarray(self.eta, dtype=float)
            if self.eta.shape != self.beta.shape:
                raise ValueError("eta must match beta in length")
            _positive("eta", self.eta)


@dataclass
class DirichletLaplaceState:
    """Latent state of the Dirichlet-Laplace prior."""

    beta: np.ndarray
    psi: np.ndarray
    phi: np.ndarray
    tau: float
    a_dl: float
    sigma2: float = 1.0

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        self.psi = np.asarray(self.psi, dtype=float)
        self.phi = np.asarray(self.phi, dtype=float)
        if not (self.beta.shape == self.psi.shape == self.phi.shape):
            raise ValueError("beta, psi and phi must have the same length")
        _positive("psi", self.psi)
        _positive("phi", self.phi)
        if abs(float(np.sum(self.phi)) - 1.0) > 1e-8:
            raise ValueError("phi must sum to 1")
        _positive("tau", self.tau)
        _positive("a_dl", self.a_dl)
        _positive("sigma2", self.sigma2)


def becca_log_prior(state: BeccaState, include_sigma2: bool, a: float, b: float) -> float:
    """Joint log prior of the BECCA hierarchy.

    Normal terms for beta with variance g * sigma2 * gamma^2 (sigma2
    dropped when ``include_sigma2`` is false, i.e. the logistic model),
    Beta(u, v) terms for gamma, half-Cauchy hyperpriors on g, u and v and
    an inverse-gamma prior IG(a, b) on sigma2 when included.
    """
    variance = state.g * state.gamma**2
    if include_sigma2:
        variance = variance * state.sigma2
    total = _normal_logpdf_sum(state.beta, variance)
    if total == REJECTED:
        return REJECTED
    total += float(np.sum(log_beta_pdf(state.gamma, state.u, state.v)))
    total += float(log_half_cauchy(state.g))
    total += float(log_half_cauchy(state.u))
    total += float(log_half_cauchy(state.v))
    if include_sigma2:
        total += float(log_inv_gamma_pdf(state.sigma2, a, b))
    return total if np.isfinite(total) else REJECTED


def hs_log_prior(state: HorseshoeState, plus: bool, include_sigma2: bool,
                 a: float, b: float) -> float:
    """Joint log prior of the horseshoe (``plus=False``) or horseshoe+.

    HS: beta_j ~ N(0, lambda_j^2 tau^2) with lambda_j, tau ~ C+(0,1).
    HS+: the local scale becomes lambda_j * eta_j with an extra
    half-Cauchy on each eta_j.
    """
    if plus:
        if state.eta is None:
            raise ValueError("horseshoe+ requires the eta block")
        variance = (state.lam * state.eta * state.tau) ** 2
    else:
        variance = (state.lam * state.tau) ** 2
    total = _normal_logpdf_sum(state.beta, variance)
    if total == REJECTED:
        return REJECTED
    total += float(np.sum(log_half_cauchy(state.lam)))
    if plus:
        total += float(np.sum(log_half_cauchy(state.eta)))
    total += float(log_half_cauchy(state.tau))
    if include_sigma2:
        total += float(log_inv_gamma_pdf(state.sigma2, a, b))
    return total if np.isfinite(total) else REJECTED


def dl_log_prior(state: DirichletLaplaceState, include_sigma2: bool,
                 a: float, b: float) -> float:
    """Joint log prior of the Dirichlet-Laplace hierarchy.

    beta_j ~ N(0, psi_j phi_j^2 tau^2), psi_j ~ Exp(1/2),
    phi ~ Dirichlet(a_dl, ..., a_dl), tau ~ Gamma(p * a_dl, rate 1/2).
    """
    p = state.beta.shape[0]
    variance = state.psi * state.phi**2 * state.tau**2
    total = _normal_logpdf_sum(state.beta, variance)
    if total == REJECTED:
        return REJECTED
    total += float(np.sum(math.log(0.5) - 0.5 * state.psi))
    a_dl = state.a_dl
    total += float(gammaln(p * a_dl) - p * gammaln(a_dl)
                   + np.sum((a_dl - 1.0) * np.log(state.phi)))
    shape = p * a_dl
    total += float(shape * math.log(0.5) - gammaln(shape)
                   + (shape - 1.0) * math.log(state.tau) - 0.5 * state.tau)
    if include_sigma2:
        total += float(log_inv_gamma_pdf(state.sigma2, a, b))
    return total if np.isfinite(total) else REJECTED


def kappa(lam, tau):
    """Shrinkage coefficient 1 / (1 + lambda^2 tau^2) in (0, 1)."""
    lam = np.asarray(lam, dtype=float)
    tau = np.asarray(tau, dtype=float)
    out = 1.0 / (1.0 + lam * lam * tau * tau)
    return float(out) if out.ndim == 0 else out


_SHAPE_LOG_CAP = 34.0

# seed breakpoints so narrow humps inside the wide log-domain are found
_LOG_SEED_POINTS = (-250.0, -100.0, -30.0, -10.0, -3.0, -1.0, 0.0,
                    1.0, 3.0, 10.0, 30.0, 100.0, 250.0)


def _integrate_positive(f, tol, soft=True, lo=-350.0, hi=350.0):
    """Integral of f over (0, inf) via the substitution x = exp(s).

    The log substitution turns power-law behaviour at both endpoints into
    exponential decay, which the adaptive rule resolves quickly.  The
    tolerance applies in absolute and relative terms.  ``lo``/``hi``
    bound the log-domain (the default covers (1e-152, 1e152), beyond
    which every integrand here carries mass below any tolerance in use);
    integrals of Beta densities over their shape parameters cap ``hi``
    further because the log Beta normalizer loses all precision for
    astronomically large shapes, whose true contribution decays like the
    inverse square of the cap.
    """

    def g(s):
        s = np.asarray(s, dtype=float)
        x = np.exp(s)
        return f(x) * x

    if soft:
        try:
            return integrate_1d(g, lo, hi, tol=tol, rel_tol=tol,
                                points=_LOG_SEED_POINTS)
        except IntegrationError as exc:
            return exc.best_estimate
    return integrate_1d(g, lo, hi, tol=tol, rel_tol=tol, points=_LOG_SEED_POINTS)


def becca_marginal_gamma_density(gamma: float, tol: float = 1e-8) -> float:
    """Marginal prior density of an inclusion probability.

    Integrates the Beta(gamma; u, v) density against independent standard
    half-Cauchy priors on u and v by nested quadrature.  The normalizing
    constants enter as exponentiated log-density sums rather than a
    literal constant, so the result integrates to one over (0, 1).  The
    tolerance bounds the absolute error, or the relative error when the
    density is large (it diverges toward both endpoints).
    """
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie strictly in (0, 1)")
    inner_tol = tol / 10.0

    def over_u(u_values):
        u_values = np.atleast_1d(u_values)
        out = np.empty_like(u_values)
        for i, u in enumerate(u_values):
            u = float(u)

            def over_v(v):
                return np.exp(log_beta_pdf(gamma, u, v)
                              + log_half_cauchy(u) + log_half_cauchy(v))

            out[i] = _integrate_positive(over_v, inner_tol, hi=_SHAPE_LOG_CAP)
        return out

    return _integrate_positive(over_u, tol, soft=False, hi=_SHAPE_LOG_CAP)


def _normal_density(beta, variance):
    return np.exp(-LOG_SQRT_TWO_PI - 0.5 * np.log(variance) - beta * beta / (2.0 * variance))


def becca_gamma_tail_mass(eps: float, tol: float = 1e-8) -> float:
    """Prior mass of the inclusion probability below ``eps`` (equal, by
    symmetry, to the mass above 1 - eps).

    Computed with the order of integration exchanged: the conditional
    Beta tail mass (regularized incomplete beta) is integrated against
    the half-Cauchy hyperpriors.  This stays accurate for eps far below
    what gamma-space quadrature can resolve; a noticeable share of the
    marginal's mass sits closer to the endpoints than float spacing.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie strictly in (0, 1)")

    def over_u(u_values):
        u_values = np.atleast_1d(u_values)
        out = np.empty_like(u_values)
        for i, u in enumerate(u_values):
            u = float(u)

            def over_v(v):
                return betainc(u, v, eps) * np.exp(log_half_cauchy(u) + log_half_cauchy(v))

            out[i] = _integrate_positive(over_v, tol / 10.0, hi=_SHAPE_LOG_CAP)
        return out

    return _integrate_positive(over_u, tol, soft=False, hi=_SHAPE_LOG_CAP)


# logit-space spline caches of the inclusion-probability marginal,
# keyed by the knot tolerance
_GAMMA_SPLINE_CACHE: dict[float, object] = {}

_W_MIN = -708.0          # logit floor; sigmoid underflows below
_W_MAX = 36.6            # logit ceiling; 1 - sigmoid underflows above


def _log_gamma_marginal_spline(knot_tol: float = 1e-5):
    """Cubic spline of log p(gamma) against logit(gamma) on [-708, 0].

    The marginal is symmetric about 1/2, so only the lower half is
    tabulated; evaluation at w > 0 mirrors to -w.  Far-tail knots use a
    loose tolerance: the scale-mixture weight out there is negligible
    for every coefficient marginal.
    """
    spline = _GAMMA_SPLINE_CACHE.get(knot_tol)
    if spline is None:
        from scipy.interpolate import CubicSpline

        coarse = np.array([_W_MIN, -600.0, -500.0, -400.0, -300.0, -240.0,
                           -190.0, -150.0, -115.0, -88.0, -68.0, -53.0, -44.0])
        fine = np.linspace(-40.0, 0.0, 81)
        knots = np.concatenate([coarse, fine])
        values = np.array([
            math.log(becca_marginal_gamma_density(
                _sigmoid_scalar(w),
                tol=knot_tol if w >= -40.0 else 1e-3,
            ))
            for w in knots
        ])
        spline = CubicSpline(knots, values)
        _GAMMA_SPLINE_CACHE[knot_tol] = spline
    return spline


def _sigmoid_scalar(w):
    if w >= 0:
        return 1.0 / (1.0 + math.exp(-w))
    e = math.exp(w)
    return e / (1.0 + e)


def _gamma_scale_mixture(beta, gamma, tol):
    """m(beta, gamma) = integral over g of N(beta; 0, g gamma^2) C+(g)."""

    def over_g(g):
        return _normal_density(beta, g * gamma * gamma) * np.exp(log_half_cauchy(g))

    return _integrate_positive(over_g, tol)


def becca_marginal_beta_density(beta: float, tol: float = 1e-4) -> float:
    """Marginal prior density of a coefficient under the BECCA hierarchy.

    Evaluates the triple integral (the double-integral inclusion marginal,
    the inclusion probability and the global scale) by nested quadrature
    at sigma2 = 1.  The integration over gamma runs in logit space with
    the inclusion marginal served by a spline of the direct evaluator;
    the marginal's mass above the largest representable gamma is added
    through the exchanged-order tail formula.  The density diverges at
    beta = 0.
    """
    beta = float(beta)
    if beta == 0.0:
        return math.inf  # the gamma -> 0 spike makes the origin singular
    spline = _log_gamma_marginal_spline()
    m_tol = tol / 10.0

    def integrand(w_values):
        w_values = np.atleast_1d(w_values)
        out = np.empty_like(w_values)
        for i, w in enumerate(w_values):
            w = float(w)
            gamma = _sigmoid_scalar(w)
            if gamma <= 0.0 or gamma >= 1.0:
                out[i] = 0.0
                continue
            # log sigmoid'(w), stable for large |w|
            log_jac = -(softplus(w) + softplus(-w))
            log_p = float(spline(-abs(w)))
            m = _gamma_scale_mixture(beta, gamma, m_tol)
            out[i] = math.exp(log_p + log_jac) * m if m > 0.0 else 0.0
        return out

    interior = integrate_1d(integrand, -np.inf, _W_MAX, tol=tol, rel_tol=tol)
    delta = _sigmoid_scalar(-_W_MAX)
    upper_tail = becca_gamma_tail_mass(delta, tol=min(1e-6, tol)) \
        * _gamma_scale_mixture(beta, 1.0 - delta, m_tol)
    return interior + upper_tail


def hs_marginal_beta_density(beta: float, tol: float = 1e-6) -> float:
    """Marginal coefficient density under the horseshoe, integrating the
    normal scale mixture over lambda and tau.  Diverges at beta = 0."""
    beta = float(beta)
    if beta == 0.0:
        return math.inf

    def over_lam(lams):
        lams = np.atleast_1d(lams)
        out = np.empty_like(lams)
        for i, lam in enumerate(lams):
            lam = float(lam)

            def over_tau(tau):
                return (_normal_density(beta, (lam * tau) ** 2)
                        * np.exp(log_half_cauchy(tau)))

            out[i] = _integrate_positive(over_tau, tol / 10.0) \
                * math.exp(log_half_cauchy(lam))
        return out

    return _integrate_positive(over_lam, tol, soft=False)


def half_cauchy_product_density(r: float, tol: float = 1e-8) -> float:
    """Density of the product of two independent standard half-Cauchy
    variables, by quadrature of the product-density integral."""
    r = float(r)
    if r <= 0:
        raise ValueError("the product of positive scales is positive")

    def over_lam(lam):
        return np.exp(log_half_cauchy(lam) + log_half_cauchy(r / lam)) / lam

    return _integrate_positive(over_lam, tol)


def hsplus_marginal_beta_density(beta: float, tol: float = 1e-4) -> float:
    """Marginal coefficient density under the horseshoe+ (three nested
    half-Cauchy scales).  Diverges at beta = 0.

    The two local scales enter only through their product, so the triple
    integral collapses to the product-scale density integrated against
    the tau mixture.
    """
    beta = float(beta)
    if beta == 0.0:
        return math.inf

    def over_r(r_values):
        r_values = np.atleast_1d(r_values)
        out = np.empty_like(r_values)
        for i, r in enumerate(r_values):
            r = float(r)

            def over_tau(tau):
                return (_normal_density(beta, (r * tau) ** 2)
                        * np.exp(log_half_cauchy(tau)))

            out[i] = _integrate_positive(over_tau, tol / 10.0) \
                * half_cauchy_product_density(r, tol=tol / 10.0)
        return out

    return _integrate_positive(over_r, tol, soft=False)
