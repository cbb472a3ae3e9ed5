"""Self-contained No-U-Turn sampler with dual-averaging step-size
adaptation, windowed diagonal mass-matrix estimation and a deterministic
multi-chain driver.

The implementation follows the multinomial variant: leaves of the
doubling trajectory tree are weighted by exp(H - H0) and proposals are
drawn progressively, with the generalized no-U-turn criterion (momentum
sums against both trajectory ends, plus the cross-subtree checks) deciding
termination.  Chain c draws its randomness from ``RngStream(seed, c)``,
so outputs are bit-identical across runs and independent of whether
chains execute sequentially or concurrently.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core_stats import RngStream
from .priors import REJECTED

__all__ = [
    "NutsConfig",
    "DrawMatrix",
    "InitializationError",
    "leapfrog",
    "nuts_sample",
    "run_chains",
]

# Energy error beyond which a leapfrog step is flagged divergent.
DIVERGENCE_THRESHOLD = 1000.0

DIVERGENCE_WARNING_RATE = 0.20


class InitializationError(RuntimeError):
    """No finite starting point found for a chain."""

    def __init__(self, message, chain=None):
        super().__init__(message)
        self.chain = chain


@dataclass(frozen=True)
class NutsConfig:
    """Sampler configuration; defaults mirror 10,000 iterations with the
    first half discarded as warmup."""

    warmup: int = 5000
    draws: int = 5000
    chains: int = 4
    target_accept: float = 0.8
    max_tree_depth: int = 10
    seed: int = 0
    init_jitter: float = 2.0
    adapt: bool = True

    def __post_init__(self):
        if self.adapt and self.warmup < 100:
            raise ValueError("warmup must be at least 100 when adaptation is enabled")
        if self.warmup < 0 or self.draws < 1 or self.chains < 1:
            raise ValueError("warmup >= 0, draws >= 1 and chains >= 1 required")
        if not 0.0 < self.target_accept < 1.0:
            raise ValueError("target_accept must lie in (0, 1)")
        if self.max_tree_depth < 1:
            raise ValueError("max_tree_depth must be positive")
        if self.init_jitter <= 0:
            raise ValueError("init_jitter must be positive")


@dataclass
class DrawMatrix:
    """Stored constrained draws for one or more chains plus per-draw
    sampler statistics."""

    names: list
    draws: np.ndarray        # (chains, draws, n_params)
    accept_stat: np.ndarray  # (chains, draws)
    tree_depth: np.ndarray   # (chains, draws)
    divergent: np.ndarray    # (chains, draws) bool
    energy: np.ndarray       # (chains, draws)
    _index: dict = field(init=False, repr=False)

    def __post_init__(self):
        self._index = {name: i for i, name in enumerate(self.names)}

    @property
    def n_chains(self) -> int:
        return self.draws.shape[0]

    @property
    def n_draws(self) -> int:
        return self.draws.shape[1]

    def column(self, name) -> np.ndarray:
        """Per-chain draws of one parameter, shaped (chains, draws)."""
        if name not in self._index:
            raise KeyError(f"unknown parameter {name!r}; available: {', '.join(self.names)}")
        return self.draws[:, :, self._index[name]]

    def pooled(self, name) -> np.ndarray:
        return self.column(name).reshape(-1)

    def divergence_rate(self) -> float:
        return float(np.mean(self.divergent))

    def depth_limit_hits(self, max_tree_depth) -> int:
        return int(np.sum(self.tree_depth >= max_tree_depth))

    @classmethod
    def concatenate(cls, parts):
        first = parts[0]
        return cls(
            names=list(first.names),
            draws=np.concatenate([p.draws for p in parts], axis=0),
            accept_stat=np.concatenate([p.accept_stat for p in parts], axis=0),
            tree_depth=np.concatenate([p.tree_depth for p in parts], axis=0),
            divergent=np.concatenate([p.divergent for p in parts], axis=0),
            energy=np.concatenate([p.energy for p in parts], axis=0),
        )


def _kinetic(r, inv_mass):
    return 0.5 * float(r @ (inv_mass * r))


def _logaddexp(a, b):
    if a == -math.inf:
        return b
    if b == -math.inf:
        return a
    m = a if a > b else b
    return m + math.log1p(math.exp(-abs(a - b)))


def leapfrog(z, r, eps, target, inv_mass):
    """One leapfrog step: half-step momentum, full-step position with
    metric scaling, half-step momentum.

    Returns (position, momentum, log-posterior, gradient) at the new
    point.  A non-finite energy shows up as a rejected log posterior.
    """
    z = np.asarray(z, dtype=float)
    r = np.asarray(r, dtype=float)
    inv_mass = np.asarray(inv_mass, dtype=float)
    _, grad = target.logp_and_grad(z)
    r_half = r + 0.5 * eps * grad
    z_new = z + eps * inv_mass * r_half
    logp_new, grad_new = target.logp_and_grad(z_new)
    r_new = r_half + 0.5 * eps * grad_new
    return z_new, r_new, logp_new, grad_new


class _Tree:
    """End points, proposal and statistics of a trajectory subtree.

    ``sharp_minus``/``sharp_plus`` cache the metric-scaled end momenta
    used by the U-turn criterion.
    """

    __slots__ = ("z_minus", "r_minus", "grad_minus", "sharp_minus",
                 "z_plus", "r_plus", "grad_plus", "sharp_plus",
                 "z_prop", "logp_prop", "grad_prop", "r_sum",
                 "log_sum_w", "sum_alpha", "n_alpha", "divergent", "valid")

    def __init__(self, z, r, grad, sharp, logp, log_w, alpha, divergent):
        self.z_minus = self.z_plus = self.z_prop = z
        self.r_minus = self.r_plus = r
        self.grad_minus = self.grad_plus = self.grad_prop = grad
        self.sharp_minus = self.sharp_plus = sharp
        self.logp_prop = logp
        self.r_sum = r
        self.log_sum_w = log_w
        self.sum_alpha = alpha
        self.n_alpha = 1
        self.divergent = divergent
        self.valid = not divergent


def _no_uturn(tree_left, tree_right):
    """Generalized U-turn criterion across two merged subtrees."""
    r_sum = tree_left.r_sum + tree_right.r_sum
    sharp_minus = tree_left.sharp_minus
    sharp_plus = tree_right.sharp_plus
    if float(r_sum @ sharp_minus) <= 0 or float(r_sum @ sharp_plus) <= 0:
        return False
    # cross-subtree checks guard against periodic trajectories
    rho_left = tree_left.r_sum + tree_right.r_minus
    if float(rho_left @ sharp_minus) <= 0 \
            or float(rho_left @ tree_right.sharp_minus) <= 0:
        return False
    rho_right = tree_right.r_sum + tree_left.r_plus
    if float(rho_right @ tree_left.sharp_plus) <= 0 \
            or float(rho_right @ sharp_plus) <= 0:
        return False
    return True


class _NutsChain:
    def __init__(self, target, config: NutsConfig, chain_id: int):
        self.target = target
        self.config = config
        self.chain_id = chain_id
        self.rng = RngStream(config.seed, chain_id).generator()
        self.dim = target.dim
        self.inv_mass = np.ones(self.dim)
        self.sqrt_mass = np.ones(self.dim)

    # -- initialization -------------------------------------------------

    def _initialize(self):
        jitter = self.config.init_jitter
        for _ in range(100):
            z = self.rng.uniform(-jitter, jitter, self.dim)
            logp, grad = self.target.logp_and_grad(z)
            if logp != REJECTED and np.isfinite(logp):
                return z, logp, grad
        raise InitializationError(
            f"chain {self.chain_id}: no finite log posterior found in 100 "
            f"initialization attempts (jitter {jitter})",
            chain=self.chain_id,
        )

    def _find_reasonable_eps(self, z, logp, grad):
        eps = 1.0
        r = self.rng.standard_normal(self.dim) * self.sqrt_mass
        h0 = logp - _kinetic(r, self.inv_mass)

        def delta_for(eps):
            z1, r1, logp1, _ = self._step(z, r, grad, eps)
            if logp1 == REJECTED:
                return -np.inf
            return (logp1 - _kinetic(r1, self.inv_mass)) - h0

        delta = delta_for(eps)
        direction = 1.0 if delta > math.log(0.5) else -1.0
        for _ in range(100):
            if direction * delta <= -direction * math.log(2.0):
                break
            eps *= 2.0**direction
            if not 1e-10 < eps < 1e7:
                break
            delta = delta_for(eps)
        return min(max(eps, 1e-10), 1e7)

    def _step(self, z, r, grad, eps):
        """Leapfrog with the gradient at z already known."""
        r_half = r + 0.5 * eps * grad
        z_new = z + eps * self.inv_mass * r_half
        logp_new, grad_new = self.target.logp_and_grad(z_new)
        r_new = r_half + 0.5 * eps * grad_new
        return z_new, r_new, logp_new, grad_new

    # -- tree construction ----------------------------------------------

    def _leaf(self, z, r, grad, direction, eps, h0):
        z1, r1, logp1, grad1 = self._step(z, r, grad, direction * eps)
        sharp1 = self.inv_mass * r1
        if logp1 == REJECTED:
            delta = -np.inf
        else:
            delta = (logp1 - 0.5 * float(r1 @ sharp1)) - h0
            if not np.isfinite(delta):
                delta = -np.inf
        divergent = delta < -DIVERGENCE_THRESHOLD
        alpha = math.exp(min(0.0, delta)) if np.isfinite(delta) else 0.0
        return _Tree(z1, r1, grad1, sharp1, logp1, delta, alpha, divergent)

    def _build_tree(self, depth, direction, z, r, grad, eps, h0):
        if depth == 0:
            return self._leaf(z, r, grad, direction, eps, h0)
        first = self._build_tree(depth - 1, direction, z, r, grad, eps, h0)
        if not first.valid:
            return first
        if direction == 1:
            z_e, r_e, g_e = first.z_plus, first.r_plus, first.grad_plus
        else:
            z_e, r_e, g_e = first.z_minus, first.r_minus, first.grad_minus
        second = self._build_tree(depth - 1, direction, z_e, r_e, g_e, eps, h0)
        self._merge(first, second, direction, biased=False)
        return first

    def _merge(self, tree, sub, direction, biased):
        """Fold ``sub`` into ``tree`` on the side given by ``direction``."""
        tree.sum_alpha += sub.sum_alpha
        tree.n_alpha += sub.n_alpha
        tree.divergent |= sub.divergent
        if not sub.valid:
            tree.valid = False
            return
        if biased:
            # progressive sampling across doublings favours the new subtree
            log_accept = min(0.0, sub.log_sum_w - tree.log_sum_w)
        else:
            log_accept = sub.log_sum_w - _logaddexp(tree.log_sum_w, sub.log_sum_w)
        # -Exp(1) is distributed as log(Uniform(0,1)) and cannot overflow
        if -self.rng.exponential() < log_accept:
            tree.z_prop = sub.z_prop
            tree.logp_prop = sub.logp_prop
            tree.grad_prop = sub.grad_prop
        if direction == 1:
            left, right = tree, sub
        else:
            left, right = sub, tree
        no_uturn = _no_uturn(left, right)
        tree.log_sum_w = _logaddexp(tree.log_sum_w, sub.log_sum_w)
        tree.r_sum = tree.r_sum + sub.r_sum
        if direction == 1:
            tree.z_plus, tree.r_plus, tree.grad_plus = sub.z_plus, sub.r_plus, sub.grad_plus
            tree.sharp_plus = sub.sharp_plus
        else:
            tree.z_minus, tree.r_minus, tree.grad_minus = sub.z_minus, sub.r_minus, sub.grad_minus
            tree.sharp_minus = sub.sharp_minus
        tree.valid = no_uturn

    def _transition(self, z, logp, grad, eps):
        r0 = self.rng.standard_normal(self.dim) * self.sqrt_mass
        sharp0 = self.inv_mass * r0
        h0 = logp - 0.5 * float(r0 @ sharp0)
        tree = _Tree(z, r0, grad, sharp0, logp, 0.0, 1.0, False)
        tree.n_alpha = 0
        tree.sum_alpha = 0.0
        depth = 0
        divergent = False
        while depth < self.config.max_tree_depth:
            direction = 1 if self.rng.integers(2) else -1
            if direction == 1:
                sub = self._build_tree(depth, 1, tree.z_plus, tree.r_plus,
                                       tree.grad_plus, eps, h0)
            else:
                sub = self._build_tree(depth, -1, tree.z_minus, tree.r_minus,
                                       tree.grad_minus, eps, h0)
            divergent |= sub.divergent
            if not sub.valid:
                # leaves of the rejected subtree still count toward the
                # step-size adaptation statistic
                tree.sum_alpha += sub.sum_alpha
                tree.n_alpha += sub.n_alpha
                break
            self._merge(tree, sub, direction, biased=True)
            depth += 1
            if not tree.valid:
                break
        accept = tree.sum_alpha / max(tree.n_alpha, 1)
        energy = -h0
        return tree.z_prop, tree.logp_prop, tree.grad_prop, accept, depth, divergent, energy

    # -- warmup schedule --------------------------------------------------

    def _slow_window_ends(self):
        w = self.config.warmup
        if not self.config.adapt or w < 100:
            return 0, [], w
        fast_init = int(0.15 * w)
        fast_term = int(0.10 * w)
        slow_end = w - fast_term
        ends = []
        size = 25
        cur = fast_init
        if slow_end - fast_init >= 20:
            while True:
                if cur + size + 2 * size > slow_end:
                    ends.append(slow_end)
                    break
                ends.append(cur + size)
                cur += size
                size *= 2
        return fast_init, ends, slow_end

    # -- main loop ---------------------------------------------------------

    def run(self) -> DrawMatrix:
        cfg = self.config
        z, logp, grad = self._initialize()
        eps = self._find_reasonable_eps(z, logp, grad)
        da = _DualAveraging(eps, cfg.target_accept)

        fast_init, window_ends, slow_end = self._slow_window_ends()
        window_buffer = []
        window_iter = iter(window_ends)
        next_window_end = next(window_iter, None)

        names = self.target.constrained_names()
        n_params = len(names)
        draws = np.empty((cfg.draws, n_params))
        accept_stat = np.empty(cfg.draws)
        tree_depth = np.empty(cfg.draws, dtype=np.int64)
        divergent = np.empty(cfg.draws, dtype=bool)
        energy = np.empty(cfg.draws)

        total = cfg.warmup + cfg.draws
        for it in range(total):
            in_warmup = it < cfg.warmup
            z, logp, grad, accept, depth, div, ham = self._transition(z, logp, grad, eps)
            if in_warmup and cfg.adapt:
                da.update(accept)
                eps = math.exp(da.log_eps)
                if next_window_end is not None and it >= fast_init:
                    window_buffer.append(z)
                    if it + 1 == next_window_end:
                        self._update_mass(window_buffer)
                        window_buffer = []
                        next_window_end = next(window_iter, None)
                        eps = self._find_reasonable_eps(z, logp, grad)
                        da = _DualAveraging(eps, cfg.target_accept)
                if it + 1 == cfg.warmup:
                    eps = math.exp(da.log_eps_bar)
            elif not in_warmup:
                k = it - cfg.warmup
                draws[k] = self.target.constrain(z)
                accept_stat[k] = accept
                tree_depth[k] = depth
                divergent[k] = div
                energy[k] = ham
        return DrawMatrix(
            names=names,
            draws=draws[None, :, :],
            accept_stat=accept_stat[None, :],
            tree_depth=tree_depth[None, :],
            divergent=divergent[None, :],
            energy=energy[None, :],
        )

    def _update_mass(self, buffer):
        if len(buffer) < 10:
            return
        sample = np.asarray(buffer)
        n = sample.shape[0]
        var = np.var(sample, axis=0, ddof=1)
        # Stan-style regularization toward a small diagonal
        reg = (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))
        reg = np.maximum(reg, 1e-10)
        self.inv_mass = reg
        self.sqrt_mass = 1.0 / np.sqrt(reg)


class _DualAveraging:
    """Nesterov dual averaging of log step size toward a target
    acceptance statistic."""

    def __init__(self, eps0, delta, gamma=0.05, t0=10.0, kappa=0.75):
        self.mu = math.log(10.0 * eps0)
        self.delta = delta
        self.gamma = gamma
        self.t0 = t0
        self.kappa = kappa
        self.log_eps = math.log(eps0)
        self.log_eps_bar = math.log(eps0)
        self.hbar = 0.0
        self.count = 0

    def update(self, alpha):
        self.count += 1
        m = self.count
        eta = 1.0 / (m + self.t0)
        self.hbar = (1.0 - eta) * self.hbar + eta * (self.delta - alpha)
        self.log_eps = self.mu - math.sqrt(m) / self.gamma * self.hbar
        w = m ** (-self.kappa)
        self.log_eps_bar = w * self.log_eps + (1.0 - w) * self.log_eps_bar


def nuts_sample(target, config: NutsConfig, chain_id: int = 0) -> DrawMatrix:
    """Run one NUTS chain; the chain's randomness comes from
    ``RngStream(config.seed, chain_id)``."""
    return _NutsChain(target, config, chain_id).run()


def _chain_task(payload):
    target, config, chain_id = payload
    return nuts_sample(target, config, chain_id)


def run_chains(target, config: NutsConfig, workers: int = 1) -> DrawMatrix:
    """Run all configured chains and stack them in chain order.

    Outputs are identical whether chains run sequentially or on a worker
    pool, because each chain owns an independent random stream.
    """
    ids = list(range(config.chains))
    if workers > 1 and config.chains > 1:
        with ProcessPoolExecutor(max_workers=min(workers, config.chains)) as pool:
            parts = list(pool.map(_chain_task, [(target, config, c) for c in ids]))
    else:
        parts = [nuts_sample(target, config, c) for c in ids]
    return DrawMatrix.concatenate(parts)
