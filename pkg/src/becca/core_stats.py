"""Density primitives, covariance factorization, seeded random streams and
adaptive quadrature used by every other module."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg.lapack import dpotrf
from scipy.special import betaln, gammaln

__all__ = [
    "DomainError",
    "FactorizationError",
    "IntegrationError",
    "RngStream",
    "CovarianceSpec",
    "log_half_cauchy",
    "log_beta_pdf",
    "log_inv_gamma_pdf",
    "cholesky",
    "mvn_sample",
    "integrate_1d",
]

LOG_TWO_OVER_PI = math.log(2.0 / math.pi)

_MASK64 = (1 << 64) - 1


class DomainError(ValueError):
    """Argument outside the support of a density or transform."""


class FactorizationError(np.linalg.LinAlgError):
    """Cholesky factorization hit a non-positive pivot."""

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class IntegrationError(RuntimeError):
    """Adaptive quadrature ran out of subdivisions.

    Carries the best estimate reached so far in ``best_estimate`` and the
    corresponding error bound in ``error_estimate``.
    """

    def __init__(self, message, best_estimate, error_estimate):
        super().__init__(message)
        self.best_estimate = best_estimate
        self.error_estimate = error_estimate


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


@dataclass(frozen=True)
class RngStream:
    """Deterministic random stream keyed by ``(seed, stream_id)``.

    The same pair always yields a bit-identical sequence; distinct stream
    ids give statistically independent Philox streams off one master seed,
    so chains, replicates and folds can be generated concurrently without
    coordination.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or not 0 <= value < 2**64:
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {value!r}")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, k: int) -> "RngStream":
        """Derived stream for sub-tasks (e.g. chain ``k`` of replicate ``r``)."""
        return RngStream(self.seed, _splitmix64(_splitmix64(int(self.stream_id)) + int(k)))


def log_half_cauchy(x):
    """Log density of the standard half-Cauchy ``2 / (pi (1 + x^2))`` on x >= 0."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("half-Cauchy support is the non-negative half-line")
    out = LOG_TWO_OVER_PI - np.log1p(x * x)
    return float(out) if out.ndim == 0 else out


def log_beta_pdf(x, u, v):
    """Log Beta(u, v) density at x in (0, 1), normalized via log-gamma."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(x <= 0) or np.any(x >= 1):
        raise DomainError("beta density requires 0 < x < 1")
    if np.any(u <= 0) or np.any(v <= 0):
        raise DomainError("beta shape parameters must be positive")
    out = (u - 1.0) * np.log(x) + (v - 1.0) * np.log1p(-x) - betaln(u, v)
    return float(out) if out.ndim == 0 else out


def log_inv_gamma_pdf(x, a, b):
    """Log inverse-gamma density: a log b - lgamma(a) - (a+1) log x - b/x."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("inverse-gamma support is the positive half-line")
    if a <= 0 or b <= 0:
        raise DomainError("inverse-gamma parameters must be positive")
    out = a * math.log(b) - gammaln(a) - (a + 1.0) * np.log(x) - b / x
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class CovarianceSpec:
    """Predictor covariance: identity, equicorrelated, AR(1) or explicit.

    ``equicorrelated`` requires rho in (-1/(dim-1), 1) so the matrix stays
    positive definite; ``autoregressive`` requires |rho| < 1.
    """

    kind: str
    dim: int
    rho: float = 0.0
    matrix: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")
        if self.kind == "equicorrelated":
            lower = -1.0 / (self.dim - 1) if self.dim > 1 else -np.inf
            if not lower < self.rho < 1.0:
                raise ValueError(
                    f"equicorrelated rho must lie in ({lower:.6g}, 1) for dim {self.dim}, "
                    f"got {self.rho}"
                )
        elif self.kind == "autoregressive":
            if not abs(self.rho) < 1.0:
                raise ValueError(f"autoregressive rho must satisfy |rho| < 1, got {self.rho}")
        elif self.kind == "explicit":
            if self.matrix is None:
                raise ValueError("explicit covariance requires a matrix")
            m = np.asarray(self.matrix, dtype=float)
            if m.shape != (self.dim, self.dim):
                raise ValueError(f"explicit matrix must be {self.dim}x{self.dim}, got {m.shape}")
        elif self.kind != "identity":
            raise ValueError(f"unknown covariance kind {self.kind!r}")

    def build(self) -> np.ndarray:
        if self.kind == "identity":
            return np.eye(self.dim)
        if self.kind == "equicorrelated":
            m = np.full((self.dim, self.dim), self.rho)
            np.fill_diagonal(m, 1.0)
            return m
        if self.kind == "autoregressive":
            idx = np.arange(self.dim)
            return self.rho ** np.abs(idx[:, None] - idx[None, :])
        return np.array(self.matrix, dtype=float)


def cholesky(spec: CovarianceSpec) -> np.ndarray:
    """Lower-triangular L with L @ L.T equal to the covariance of ``spec``.

    Raises FactorizationError naming the failing pivot when the matrix is
    not positive definite.
    """
    sigma = spec.build()
    if not np.allclose(sigma, sigma.T, atol=1e-12):
        raise FactorizationError("covariance matrix is not symmetric")
    c, info = dpotrf(sigma, lower=1, overwrite_a=0)
    if info > 0:
        raise FactorizationError(
            f"covariance is not positive definite: leading minor of order {info} "
            f"has a non-positive pivot",
            pivot=int(info),
        )
    if info < 0:
        raise FactorizationError(f"invalid argument {-info} passed to dpotrf")
    return np.tril(c)


def mvn_sample(L: np.ndarray, n: int, rng: RngStream) -> np.ndarray:
    """n i.i.d. rows from MVN(0, L @ L.T), deterministic given the stream."""
    dim = L.shape[0]
    z = rng.generator().standard_normal((n, dim))
    return z @ L.T


# 15-point Kronrod extension of 7-point Gauss (QUADPACK dqk15 constants).
_XGK = np.array([
    0.9914553711208126, 0.9491079123427585, 0.8648644233597691,
    0.7415311855993945, 0.5860872354676911, 0.4058451513773972,
    0.2077849550078985, 0.0,
])
_WGK = np.array([
    0.02293532201052922, 0.06309209262997855, 0.1047900103222502,
    0.1406532597155259, 0.1690047266392679, 0.1903505780647854,
    0.2044329400752989, 0.2094821410847278,
])
_WG = np.array([
    0.1294849661688697, 0.2797053914892766, 0.3818300505051189,
    0.4179591836734694,
])

_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])          # 15 ascending nodes
_WEIGHTS_K = np.concatenate([_WGK[:-1], _WGK[::-1]])
_WEIGHTS_G = np.zeros(15)
_WEIGHTS_G[1:14:2] = np.concatenate([_WG[:-1], _WG[::-1]])  # Gauss nodes interleave


def _gk15(f, a, b):
    """One Gauss-Kronrod panel: returns (integral, error bound)."""
    c = 0.5 * (a + b)
    h = 0.5 * (b - a)
    fv = np.asarray(f(c + h * _NODES), dtype=float)
    resk = h * float(_WEIGHTS_K @ fv)
    resg = h * float(_WEIGHTS_G @ fv)
    # QUADPACK-style error scaling keeps the bound meaningful for
    # integrands spanning many orders of magnitude.
    reskh = resk / (b - a) if b != a else 0.0
    resasc = h * float(_WEIGHTS_K @ np.abs(fv - reskh))
    err = abs(resk - resg)
    if resasc != 0.0 and err != 0.0:
        err = resasc * min(1.0, (200.0 * err / resasc) ** 1.5)
    return resk, err


def integrate_1d(f, a, b, tol=1e-8, max_intervals=2048, rel_tol=0.0, points=None):
    """Adaptive Gauss-Kronrod estimate of the integral of ``f`` over (a, b).

    ``f`` must accept an ndarray of abscissae and return the values
    elementwise.  Half-infinite domains are mapped to (0, 1) by
    x = t/(1-t) with the corresponding Jacobian; the doubly-infinite
    domain is split at zero.  ``points`` seeds the subdivision with
    interior breakpoints so that narrow features are not missed by the
    first coarse panel.  The result satisfies an absolute error bound of
    ``tol`` (or ``rel_tol`` times the estimate, when that is laxer);
    running out of subdivision budget raises IntegrationError carrying
    the best estimate.
    """
    if a == b:
        return 0.0
    if a > b:
        return -integrate_1d(f, b, a, tol=tol, max_intervals=max_intervals,
                             rel_tol=rel_tol, points=points)
    if math.isinf(a) and math.isinf(b):
        left = integrate_1d(f, a, 0.0, tol=0.5 * tol, max_intervals=max_intervals,
                            rel_tol=rel_tol, points=points)
        right = integrate_1d(f, 0.0, b, tol=0.5 * tol, max_intervals=max_intervals,
                             rel_tol=rel_tol, points=points)
        return left + right
    if math.isinf(b):
        return _adaptive(_mapped_tail(f, a, 1.0), 0.0, 1.0, tol, max_intervals, rel_tol)
    if math.isinf(a):
        return _adaptive(_mapped_tail(f, b, -1.0), 0.0, 1.0, tol, max_intervals, rel_tol)
    edges = [a, b]
    if points:
        edges = [a] + sorted(x for x in points if a < x < b) + [b]
    return _adaptive(f, a, b, tol, max_intervals, rel_tol, edges=edges)


def _mapped_tail(f, origin, sign):
    """Integrand under the rational map x = origin + sign * t/(1-t).

    Abscissae within ~1e-13 of t = 1 are treated as the point at
    infinity, where any integrable f contributes nothing.
    """

    def g(t):
        t = np.asarray(t, dtype=float)
        omt = 1.0 - t
        safe = omt > 1e-13
        # unsafe abscissae get an arbitrary interior placeholder; their
        # contribution is masked to zero below
        x = origin + sign * np.where(safe, t / np.where(safe, omt, 1.0), 1.0)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            vals = np.asarray(f(x), dtype=float) / (omt * omt)
        return np.where(safe, vals, 0.0)

    return g


def _adaptive(f, a, b, tol, max_intervals, rel_tol=0.0, edges=None):
    if edges is None:
        edges = [a, b]
    total_val = total_err = 0.0
    counter = 0
    # heap of (-err, tiebreak, a, b, val, err); worst interval split first
    heap = []
    for left, right in zip(edges[:-1], edges[1:]):
        val, err = _gk15(f, left, right)
        total_val += val
        total_err += err
        heap.append((-err, counter, left, right, val, err))
        counter += 1
    heapq.heapify(heap)
    min_width = abs(b - a) * 1e-14

    def target():
        return max(tol, rel_tol * abs(total_val))

    while total_err > target() and len(heap) < max_intervals:
        neg, _, ia, ib, ival, ierr = heapq.heappop(heap)
        if ierr <= 0.0 or (ib - ia) <= min_width:
            # cannot improve this interval further
            heapq.heappush(heap, (0.0, counter + 1, ia, ib, ival, ierr))
            counter += 1
            if all(item[0] == 0.0 for item in heap):
                break
            continue
        mid = 0.5 * (ia + ib)
        v1, e1 = _gk15(f, ia, mid)
        v2, e2 = _gk15(f, mid, ib)
        total_val += (v1 + v2) - ival
        total_err += (e1 + e2) - ierr
        counter += 1
        heapq.heappush(heap, (-e1, counter, ia, mid, v1, e1))
        counter += 1
        heapq.heappush(heap, (-e2, counter, mid, ib, v2, e2))
    if total_err > target():
        raise IntegrationError(
            f"quadrature did not reach tolerance {target():g} within {max_intervals} "
            f"intervals (error estimate {total_err:g})",
            best_estimate=total_val,
            error_estimate=total_err,
        )
    return total_val
