"""Bijections between constrained parameter blocks and the unconstrained
space the sampler runs in, with log-Jacobian corrections and their
gradients.

Supported block kinds: ``identity``, ``log`` (positive reals), ``logit``
(open unit interval) and ``simplex`` (stick-breaking; a block of
constrained length m uses m-1 unconstrained coordinates).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core_stats import DomainError

__all__ = [
    "Block",
    "BlockLayout",
    "TransformedVector",
    "to_unconstrained",
    "to_constrained",
    "sigmoid",
    "softplus",
]

_TINY = np.finfo(float).tiny          # smallest normal positive double
_ONE_MINUS_EPS = np.nextafter(1.0, 0.0)


def softplus(z):
    """log(1 + exp(z)) without overflow."""
    z = np.asarray(z, dtype=float)
    return np.where(z > 0, z + np.log1p(np.exp(-np.abs(z))), np.log1p(np.exp(z)))


def sigmoid(z):
    """Logistic function, clipped to the open interval (0, 1).

    Saturating inputs map to the nearest representable interior value so
    that downstream densities never see an exact boundary.
    """
    z = np.asarray(z, dtype=float)
    with np.errstate(over="ignore"):
        out = np.where(z >= 0, 1.0 / (1.0 + np.exp(-z)), np.exp(z) / (1.0 + np.exp(z)))
    return np.clip(out, _TINY, _ONE_MINUS_EPS)


@dataclass(frozen=True)
class Block:
    name: str
    kind: str      # identity | log | logit | simplex
    length: int    # constrained length

    def __post_init__(self):
        if self.kind not in ("identity", "log", "logit", "simplex"):
            raise ValueError(f"unknown block kind {self.kind!r}")
        if self.length < 1:
            raise ValueError("block length must be positive")
        if self.kind == "simplex" and self.length < 2:
            raise ValueError("simplex block needs length >= 2")

    @property
    def unconstrained_length(self) -> int:
        return self.length - 1 if self.kind == "simplex" else self.length


class BlockLayout:
    """Ordered list of blocks with precomputed slices into the constrained
    and unconstrained vectors."""

    def __init__(self, blocks):
        self.blocks = tuple(blocks)
        names = [b.name for b in self.blocks]
        if len(set(names)) != len(names):
            raise ValueError("duplicate block names in layout")
        self.constrained_slices = {}
        self.unconstrained_slices = {}
        c = u = 0
        for b in self.blocks:
            self.constrained_slices[b.name] = slice(c, c + b.length)
            self.unconstrained_slices[b.name] = slice(u, u + b.unconstrained_length)
            c += b.length
            u += b.unconstrained_length
        self.constrained_dim = c
        self.unconstrained_dim = u

    def __iter__(self):
        return iter(self.blocks)

    def block(self, name) -> Block:
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(name)

    def names(self):
        """Flat per-coordinate names of the constrained vector."""
        out = []
        for b in self.blocks:
            if b.length == 1 and b.kind != "simplex":
                out.append(b.name)
            else:
                out.extend(f"{b.name}[{i}]" for i in range(b.length))
        return out


@dataclass(frozen=True)
class TransformedVector:
    constrained: np.ndarray
    unconstrained: np.ndarray
    log_jacobian: float
    layout: BlockLayout


def _simplex_forward(w):
    """Stick-breaking map from R^{m-1} to the interior of the m-simplex.

    Returns (x, log_jacobian, v) where v are the stick proportions.
    """
    m = w.shape[0] + 1
    k = np.arange(1, m)
    v = sigmoid(w - np.log(m - k))
    x = np.empty(m)
    stick = 1.0
    logj = 0.0
    for i in range(m - 1):
        if stick <= 0.0:
            # stick length underflowed; the point is effectively on the
            # simplex boundary and must be rejected upstream
            x[i:] = _TINY
            return x, -np.inf, v
        x[i] = max(v[i] * stick, _TINY)
        logj += math.log(v[i]) + math.log1p(-v[i]) + math.log(stick)
        stick *= 1.0 - v[i]
    x[m - 1] = max(stick, _TINY)
    return x, logj, v


def _simplex_backward(x, v, dL_dx, include_jacobian=True):
    """Pull dL/dx (length m) back to dL/dw (length m-1).

    When ``include_jacobian`` is set the gradient of the stick-breaking
    log-Jacobian is added, matching the convention that the log posterior
    contains the Jacobian term.
    """
    m = x.shape[0]
    # suffix[k] = sum_{i > k} dL_dx[i] * x[i]
    gx = dL_dx * x
    suffix = np.concatenate([np.cumsum(gx[::-1])[::-1][1:], [0.0]])
    stick = np.empty(m - 1)
    s = 1.0
    for i in range(m - 1):
        stick[i] = s
        s *= 1.0 - v[i]
    dL_dv = dL_dx[:-1] * stick - suffix[: m - 1] / (1.0 - v)
    dL_dw = dL_dv * v * (1.0 - v)
    if include_jacobian:
        k = np.arange(1, m)
        dL_dw += (1.0 - v) - (m - k) * v
    return dL_dw


def _simplex_inverse(x):
    m = x.shape[0]
    w = np.empty(m - 1)
    stick = 1.0
    for i in range(m - 1):
        v = x[i] / stick
        if not 0.0 < v < 1.0:
            raise DomainError(f"simplex coordinate {i} breaks the stick ordering")
        w[i] = math.log(v / (1.0 - v)) + math.log(m - (i + 1))
        stick -= x[i]
    return w


def to_unconstrained(constrained, layout: BlockLayout) -> TransformedVector:
    """Map a constrained vector into sampler coordinates.

    Every coordinate must lie strictly inside its block's support;
    boundary or out-of-support values raise DomainError naming the block
    and index.  The log-Jacobian reported is that of the inverse map
    (the quantity added to the log posterior).
    """
    x = np.asarray(constrained, dtype=float)
    if x.shape != (layout.constrained_dim,):
        raise ValueError(
            f"expected constrained vector of length {layout.constrained_dim}, got {x.shape}"
        )
    z = np.empty(layout.unconstrained_dim)
    logj = 0.0
    for b in layout:
        xb = x[layout.constrained_slices[b.name]]
        if b.kind == "identity":
            z[layout.unconstrained_slices[b.name]] = xb
        elif b.kind == "log":
            if np.any(xb <= 0):
                idx = int(np.argmax(xb <= 0))
                raise DomainError(f"block {b.name!r} index {idx}: value must be positive")
            zb = np.log(xb)
            z[layout.unconstrained_slices[b.name]] = zb
            logj += float(np.sum(zb))
        elif b.kind == "logit":
            if np.any(xb <= 0) or np.any(xb >= 1):
                bad = (xb <= 0) | (xb >= 1)
                idx = int(np.argmax(bad))
                raise DomainError(f"block {b.name!r} index {idx}: value must lie in (0, 1)")
            z[layout.unconstrained_slices[b.name]] = np.log(xb) - np.log1p(-xb)
            logj += float(np.sum(np.log(xb) + np.log1p(-xb)))
        else:  # simplex
            if np.any(xb <= 0):
                idx = int(np.argmax(xb <= 0))
                raise DomainError(f"block {b.name!r} index {idx}: simplex entries must be positive")
            if abs(float(np.sum(xb)) - 1.0) > 1e-8:
                raise DomainError(f"block {b.name!r}: simplex entries must sum to 1")
            wb = _simplex_inverse(xb)
            z[layout.unconstrained_slices[b.name]] = wb
            _, lj, _ = _simplex_forward(wb)
            logj += lj
    return TransformedVector(x.copy(), z, logj, layout)


def to_constrained(unconstrained, layout: BlockLayout) -> TransformedVector:
    """Inverse of :func:`to_unconstrained`; defined on all of R^n."""
    z = np.asarray(unconstrained, dtype=float)
    if z.shape != (layout.unconstrained_dim,):
        raise ValueError(
            f"expected unconstrained vector of length {layout.unconstrained_dim}, got {z.shape}"
        )
    x = np.empty(layout.constrained_dim)
    logj = 0.0
    for b in layout:
        zb = z[layout.unconstrained_slices[b.name]]
        if b.kind == "identity":
            x[layout.constrained_slices[b.name]] = zb
        elif b.kind == "log":
            with np.errstate(over="ignore"):
                x[layout.constrained_slices[b.name]] = np.maximum(np.exp(zb), _TINY)
            logj += float(np.sum(zb))
        elif b.kind == "logit":
            x[layout.constrained_slices[b.name]] = sigmoid(zb)
            # log sigma(z) + log(1 - sigma(z)), evaluated from z for stability
            logj += float(np.sum(-softplus(-zb) - softplus(zb)))
        else:
            xb, lj, _ = _simplex_forward(zb)
            x[layout.constrained_slices[b.name]] = xb
            logj += lj
    return TransformedVector(x, z.copy(), logj, layout)
