"""Convergence diagnostics: split Gelman-Rubin statistic, rank-normalized
effective sample size and trace export."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

__all__ = [
    "split_rhat",
    "ess_bulk",
    "ParameterSummary",
    "DiagnosticsReport",
    "summarize",
    "export_trace",
]


def _split_halves(chains) -> np.ndarray:
    """Stack the first and second half of every chain as separate rows."""
    chains = np.asarray(chains, dtype=float)
    if chains.ndim == 1:
        chains = chains[None, :]
    if chains.ndim != 2:
        raise ValueError("chains must be a (n_chains, n_draws) array")
    n = chains.shape[1]
    if n < 4:
        raise ValueError("need at least 4 draws per chain to split")
    half = n // 2
    return np.vstack([chains[:, :half], chains[:, n - half:]])


def split_rhat(chains) -> float:
    """Split-chain Gelman-Rubin statistic.

    Each chain is split in half; with W the mean within-half variance and
    B the between-half variance of half means (times the half length),
    returns sqrt(((n-1)/n * W + B/n) / W).  All-constant input is the
    degenerate case and returns 1.0 by convention.
    """
    halves = _split_halves(chains)
    n = halves.shape[1]
    within = np.var(halves, axis=1, ddof=1)
    w = float(np.mean(within))
    if w == 0.0:
        return 1.0
    b = n * float(np.var(np.mean(halves, axis=1), ddof=1)) if halves.shape[0] > 1 else 0.0
    return float(np.sqrt(((n - 1) / n * w + b / n) / w))


def _rank_normalize(halves: np.ndarray) -> np.ndarray:
    flat = halves.reshape(-1)
    order = np.argsort(flat, kind="mergesort")
    ranks = np.empty_like(flat)
    ranks[order] = np.arange(1, flat.size + 1, dtype=float)
    # average ranks over ties
    uniq, inverse = np.unique(flat, return_inverse=True)
    if uniq.size != flat.size:
        sums = np.zeros(uniq.size)
        counts = np.zeros(uniq.size)
        np.add.at(sums, inverse, ranks)
        np.add.at(counts, inverse, 1.0)
        ranks = (sums / counts)[inverse]
    z = ndtri((ranks - 0.375) / (flat.size + 0.25))
    return z.reshape(halves.shape)


def _autocovariance(x: np.ndarray) -> np.ndarray:
    """Biased autocovariance of each row via FFT."""
    n = x.shape[1]
    centered = x - x.mean(axis=1, keepdims=True)
    size = 1
    while size < 2 * n:
        size *= 2
    f = np.fft.rfft(centered, size, axis=1)
    acov = np.fft.irfft(f * np.conj(f), size, axis=1)[:, :n].real
    return acov / n


def ess_bulk(chains) -> float:
    """Rank-normalized effective sample size with Geyer initial-monotone
    truncation of the autocorrelation sum.  Degenerate (constant) chains
    return 0.0."""
    halves = _split_halves(chains)
    if float(np.var(halves)) == 0.0:
        return 0.0
    z = _rank_normalize(halves)
    m, n = z.shape
    acov = _autocovariance(z)
    chain_var = acov[:, 0] * n / (n - 1.0)
    w = float(np.mean(chain_var))
    var_plus = w * (n - 1.0) / n
    if m > 1:
        var_plus += float(np.var(z.mean(axis=1), ddof=1))
    if var_plus == 0.0:
        return 0.0

    mean_acov = acov.mean(axis=0)
    rho = np.zeros(n)
    rho[0] = 1.0
    rho_even = 1.0
    rho[1] = rho_odd = 1.0 - (w - mean_acov[1]) / var_plus
    t = 1
    while t < n - 4 and rho_even + rho_odd > 0.0:
        rho_even = 1.0 - (w - mean_acov[t + 1]) / var_plus
        rho_odd = 1.0 - (w - mean_acov[t + 2]) / var_plus
        if rho_even + rho_odd >= 0.0:
            rho[t + 1] = rho_even
            rho[t + 2] = rho_odd
        t += 2
    max_t = t
    # enforce monotone decrease of successive pair sums
    for k in range(3, max_t + 1, 2):
        pair = rho[k] + rho[k - 1]
        prev = rho[k - 1] + rho[k - 2]
        if pair > prev:
            rho[k - 1] = prev / 2.0
            rho[k] = prev / 2.0
    tau = -1.0 + 2.0 * float(np.sum(rho[: max_t + 1]))
    tau = max(tau, 1.0 / np.log10(m * n + 10.0))
    return float(min(m * n / tau, m * n * np.log10(m * n)))


@dataclass
class ParameterSummary:
    name: str
    rhat: float
    ess_bulk: float
    mean: float
    sd: float
    q2_5: float
    q50: float
    q97_5: float
    degenerate: bool = False


@dataclass
class DiagnosticsReport:
    parameters: list
    divergences: int
    depth_limit_hits: int
    n_chains: int
    n_draws: int

    def max_rhat(self) -> float:
        return max((p.rhat for p in self.parameters), default=1.0)

    def min_ess(self) -> float:
        return min((p.ess_bulk for p in self.parameters), default=0.0)

    def parameter(self, name) -> ParameterSummary:
        for p in self.parameters:
            if p.name == name:
                return p
        raise KeyError(name)

    def to_text(self) -> str:
        lines = [
            f"chains: {self.n_chains}",
            f"draws_per_chain: {self.n_draws}",
            f"divergences: {self.divergences}",
            f"depth_limit_hits: {self.depth_limit_hits}",
            "",
        ]
        for p in self.parameters:
            lines += [
                f"parameter: {p.name}",
                f"rhat: {p.rhat!r}",
                f"ess_bulk: {p.ess_bulk!r}",
                f"mean: {p.mean!r}",
                f"sd: {p.sd!r}",
                f"q2.5: {p.q2_5!r}",
                f"q50: {p.q50!r}",
                f"q97.5: {p.q97_5!r}",
                f"degenerate: {str(p.degenerate).lower()}",
                "",
            ]
        return "\n".join(lines)


def summarize(draws, max_tree_depth=None) -> DiagnosticsReport:
    """Per-parameter convergence summary of a DrawMatrix."""
    params = []
    for name in draws.names:
        col = draws.column(name)
        degenerate = float(np.var(col)) == 0.0
        pooled = col.reshape(-1)
        q = np.quantile(pooled, [0.025, 0.5, 0.975])
        params.append(ParameterSummary(
            name=name,
            rhat=split_rhat(col),
            ess_bulk=ess_bulk(col),
            mean=float(np.mean(pooled)),
            sd=float(np.std(pooled, ddof=1)) if pooled.size > 1 else 0.0,
            q2_5=float(q[0]),
            q50=float(q[1]),
            q97_5=float(q[2]),
            degenerate=degenerate,
        ))
    depth_hits = 0
    if max_tree_depth is not None:
        depth_hits = draws.depth_limit_hits(max_tree_depth)
    return DiagnosticsReport(
        parameters=params,
        divergences=int(np.sum(draws.divergent)),
        depth_limit_hits=depth_hits,
        n_chains=draws.n_chains,
        n_draws=draws.n_draws,
    )


def export_trace(draws, params, path):
    """Write a long-format (chain, iteration, parameter, value) CSV."""
    for name in params:
        if name not in draws.names:
            raise KeyError(
                f"unknown parameter {name!r}; available: {', '.join(draws.names)}"
            )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["chain", "iteration", "parameter", "value"])
        for name in params:
            col = draws.column(name)
            for c in range(col.shape[0]):
                for i in range(col.shape[1]):
                    writer.writerow([c, i, name, repr(float(col[c, i]))])
