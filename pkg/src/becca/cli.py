"""Command-line application: configuration, data ingestion, experiment
orchestration and result emission.

Subcommands: simulate | fit | replicate | cv | select | marginal.
Configuration precedence is defaults < config file (JSON) < environment
variables (prefix ``BECCA_``) < command-line flags.  Every run writes its
fully resolved configuration next to its outputs, and re-running from
that file reproduces the run byte for byte.

Exit codes: 0 success, 2 configuration or validation error, 3 data error,
4 sampler failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .core_stats import CovarianceSpec, RngStream, _splitmix64
from .datagen import (
    CoefLaw,
    DataError,
    SimSpec,
    gen_linear,
    gen_logistic,
    read_dataset_csv,
    standardize,
    write_dataset_csv,
    write_truth_csv,
)
from .diagnostics import export_trace, summarize
from .evaluation import (
    UnsupportedSelectionError,
    classification_metrics,
    kfold_cv,
    model_posterior,
    mse,
    mspe_linear,
    mspe_logistic,
    posterior_mean_beta,
    select,
    sens_spec,
    top_k_models,
)
from .core_stats import IntegrationError, log_beta_pdf
from .models import MODELS, PRIORS, Dataset, PosteriorTarget
from .priors import (
    becca_marginal_beta_density,
    becca_marginal_gamma_density,
    hs_marginal_beta_density,
    hsplus_marginal_beta_density,
)
from .transforms import sigmoid
from .sampler import (
    DIVERGENCE_WARNING_RATE,
    DrawMatrix,
    InitializationError,
    NutsConfig,
    run_chains,
)

__all__ = ["RunConfig", "ConfigError", "main",
           "cmd_simulate", "cmd_fit", "cmd_replicate", "cmd_cv",
           "cmd_select", "cmd_marginal"]

ENV_PREFIX = "BECCA_"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_SAMPLER = 4


class ConfigError(ValueError):
    """Invalid configuration; reported with a nonzero exit before any
    computation starts."""


class SamplerFailure(RuntimeError):
    pass


def _derive_seed(master: int, *parts: int) -> int:
    acc = _splitmix64(int(master))
    for part in parts:
        acc = _splitmix64(acc + int(part))
    return acc


@dataclass
class RunConfig:
    """Resolved configuration for one command invocation."""

    command: str = ""
    model: str = "linear"
    priors: tuple = ("becca",)
    # simulation scenario
    n: int = 100
    p: int = 50
    q: int = 10
    covariance: str = "default"
    coef_law: str = "normal_scaled"
    permute_active: bool = False
    # sampler
    seed: int = 0
    chains: int = 4
    warmup: int = 5000
    draws: int = 5000
    target_accept: float = 0.8
    max_tree_depth: int = 10
    init_jitter: float = 2.0
    parameterization: str = "default"
    intercept: str = "auto"
    a: float = 0.5
    b: float = 0.5
    a_dl: float = 0.0            # 0 means the 1/p default
    # experiment harness
    replicates: int = 50
    folds: int = 5
    cv_mspe: bool = False
    threads: int = 0             # 0 means available parallelism
    # data input
    data: str = ""
    response: str = "y"
    draws_dir: str = ""
    standardize_fit: bool = False
    # selection / reporting
    threshold: float = 0.5
    top_k: int = 100
    trace_params: tuple = ()
    # marginal-density grids
    gamma_points: int = 41
    beta_min: float = -6.0
    beta_max: float = 6.0
    beta_points: int = 41
    marginal_gamma_tol: float = 1e-6
    marginal_beta_tol: float = 1e-4
    out: str = "becca-out"

    def validate(self):
        problems = []
        if self.command not in ("simulate", "fit", "replicate", "cv", "select", "marginal"):
            problems.append(f"command: unknown command {self.command!r}")
        if self.model not in MODELS:
            problems.append(f"model: must be one of {MODELS}, got {self.model!r}")
        bad = [pr for pr in self.priors if pr not in PRIORS]
        if bad:
            problems.append(f"priors: unknown prior(s) {bad}; valid: {PRIORS}")
        if not self.priors:
            problems.append("priors: at least one prior is required")
        if self.command in ("simulate", "replicate"):
            if self.n < 1 or self.p < 1:
                problems.append("n, p: must be positive")
            if not 0 <= self.q <= self.p:
                problems.append(f"q: must satisfy 0 <= q <= p, got {self.q}")
        if not 0 <= self.seed < 2**64:
            problems.append("seed: must be an unsigned 64-bit integer")
        if self.chains < 1 or self.draws < 1 or self.warmup < 0:
            problems.append("chains/draws/warmup: chains >= 1, draws >= 1, warmup >= 0")
        if self.warmup < 100:
            problems.append("warmup: at least 100 iterations are needed for adaptation")
        if not 0.0 < self.target_accept < 1.0:
            problems.append("target_accept: must lie in (0, 1)")
        if self.max_tree_depth < 1:
            problems.append("max_tree_depth: must be positive")
        if self.parameterization not in ("default", "centered", "noncentered"):
            problems.append(f"parameterization: unknown value {self.parameterization!r}")
        if self.intercept not in ("auto", "on", "off"):
            problems.append("intercept: must be auto, on or off")
        if self.a <= 0 or self.b <= 0:
            problems.append("a, b: inverse-gamma hyperparameters must be positive")
        if self.a_dl < 0:
            problems.append("a_dl: must be positive (or 0 for the 1/p default)")
        if self.replicates < 1:
            problems.append("replicates: must be at least 1")
        if self.command in ("cv",) and self.folds < 2:
            problems.append("folds: k-fold cross-validation requires k >= 2")
        if self.threads < 0:
            problems.append("threads: must be non-negative")
        if not 0.0 < self.threshold < 1.0:
            problems.append("threshold: must lie in (0, 1)")
        if self.top_k < 1:
            problems.append("top_k: must be at least 1")
        if self.command == "simulate" or (self.command == "replicate"):
            try:
                self.covariance_spec()
            except (ValueError, ConfigError) as exc:
                problems.append(f"covariance: {exc}")
            try:
                self.coef_law_spec()
            except (ValueError, ConfigError) as exc:
                problems.append(f"coef_law: {exc}")
        if self.command in ("fit", "cv") and not self.data:
            problems.append("data: input CSV path is required")
        if self.command == "select" and not (self.draws_dir or self.data):
            problems.append("select: either draws_dir (previous fit output) or data is required")
        if self.command == "select" and "dl" in self.priors:
            problems.append(
                "priors: the Dirichlet-Laplace prior is excluded from selection "
                "(no inclusion criterion)"
            )
        if self.command == "marginal":
            if self.gamma_points < 3 or self.beta_points < 3:
                problems.append("gamma_points/beta_points: need at least 3 grid points")
            if "dl" in self.priors:
                problems.append("priors: marginal curves are available for becca, hs and hsplus only")
        if problems:
            raise ConfigError("; ".join(problems))

    # -- derived objects -------------------------------------------------

    def covariance_spec(self) -> CovarianceSpec:
        text = self.covariance
        if text == "default":
            kind = "equicorrelated" if self.model == "linear" else "autoregressive"
            rho = 0.75 if self.model == "linear" else 0.65
            return CovarianceSpec(kind, self.p, rho=rho)
        parts = text.split(":")
        kind = parts[0]
        if kind == "identity":
            return CovarianceSpec("identity", self.p)
        if kind in ("equicorrelated", "ar", "autoregressive"):
            if len(parts) != 2:
                raise ConfigError(f"covariance {text!r} needs a correlation, e.g. {kind}:0.75")
            kind = "autoregressive" if kind == "ar" else kind
            return CovarianceSpec(kind, self.p, rho=float(parts[1]))
        raise ConfigError(f"unknown covariance {text!r}")

    def coef_law_spec(self) -> CoefLaw:
        text = self.coef_law
        parts = text.split(":")
        if parts[0] == "normal_scaled":
            return CoefLaw(kind="normal_scaled")
        if parts[0] == "uniform":
            if len(parts) == 3:
                return CoefLaw(kind="uniform", lo=float(parts[1]), hi=float(parts[2]))
            if len(parts) == 1:
                return CoefLaw(kind="uniform")
            raise ConfigError(f"coefficient law {text!r} needs uniform:LO:HI")
        if parts[0] == "fixed":
            if len(parts) != 2:
                raise ConfigError(f"coefficient law {text!r} needs fixed:VALUE")
            return CoefLaw(kind="fixed", value=float(parts[1]))
        raise ConfigError(f"unknown coefficient law {text!r}")

    def sim_spec(self) -> SimSpec:
        law = self.coef_law_spec()
        if self.model == "logistic" and self.coef_law == "normal_scaled":
            law = CoefLaw(kind="uniform")        # Unif(2, 7.5) active coefficients
        return SimSpec(
            n=self.n, p=self.p, q=self.q, model=self.model,
            covariance=self.covariance_spec(), coef_law=law,
            seed=self.seed, permute_active=self.permute_active,
        )

    def nuts_config(self, seed) -> NutsConfig:
        return NutsConfig(
            warmup=self.warmup, draws=self.draws, chains=self.chains,
            target_accept=self.target_accept, max_tree_depth=self.max_tree_depth,
            seed=seed, init_jitter=self.init_jitter,
        )

    def resolve_intercept(self) -> bool:
        if self.intercept == "auto":
            return self.model == "logistic" and self.command == "cv"
        return self.intercept == "on"

    def resolve_parameterization(self):
        return None if self.parameterization == "default" else self.parameterization

    def worker_count(self) -> int:
        return self.threads if self.threads > 0 else (os.cpu_count() or 1)

    def resolved_dict(self) -> dict:
        out = asdict(self)
        out["priors"] = list(self.priors)
        out["trace_params"] = list(self.trace_params)
        return out


_BOOL_KEYS = {"permute_active", "cv_mspe", "standardize_fit"}
_TUPLE_KEYS = {"priors", "trace_params"}


def _coerce(key, raw, target_type):
    if key in _TUPLE_KEYS:
        if isinstance(raw, (list, tuple)):
            return tuple(str(x) for x in raw)
        return tuple(x for x in str(raw).split(",") if x)
    if key in _BOOL_KEYS or target_type is bool:
        if isinstance(raw, bool):
            return raw
        text = str(raw).strip().lower()
        if text in ("1", "true", "yes", "on"):
            return True
        if text in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    try:
        return target_type(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot interpret {raw!r} as {target_type.__name__}") from None


def build_config(command, config_path=None, env=None, overrides=None) -> RunConfig:
    """Merge defaults, config file, environment and flag overrides."""
    env = os.environ if env is None else env
    values = {}
    types = {f.name: type(getattr(RunConfig(), f.name)) for f in fields(RunConfig)}
    if config_path:
        try:
            with open(config_path) as fh:
                loaded = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {config_path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {config_path}: invalid JSON ({exc})") from None
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file {config_path}: expected a JSON object")
        for key, raw in loaded.items():
            if key == "command":
                continue
            if key not in types:
                raise ConfigError(f"config file {config_path}: unknown key {key!r}")
            values[key] = _coerce(key, raw, types[key])
    for key, target_type in types.items():
        env_key = ENV_PREFIX + key.upper()
        if env_key in env:
            values[key] = _coerce(key, env[env_key], target_type)
    for key, raw in (overrides or {}).items():
        if raw is None:
            continue
        if key not in types:
            raise ConfigError(f"unknown option {key!r}")
        values[key] = _coerce(key, raw, types[key])
    cfg = RunConfig(command=command, **values)
    cfg.validate()
    return cfg


# -- output helpers --------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _atomic_write_text(path, text):
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_csv(path, header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    _atomic_write_text(path, buf.getvalue())


def _write_resolved_config(cfg: RunConfig, out_dir):
    payload = json.dumps(cfg.resolved_dict(), indent=2, sort_keys=True) + "\n"
    _atomic_write_text(os.path.join(out_dir, "resolved_config.json"), payload)


def _ensure_out(cfg) -> str:
    os.makedirs(cfg.out, exist_ok=True)
    return cfg.out


def _draws_to_csv(draws: DrawMatrix, path):
    header = ["chain", "iteration"] + list(draws.names)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for c in range(draws.n_chains):
        for i in range(draws.n_draws):
            writer.writerow([c, i] + [repr(float(v)) for v in draws.draws[c, i]])
    _atomic_write_text(path, buf.getvalue())


def load_draws_csv(path) -> DrawMatrix:
    """Rebuild a DrawMatrix from a draws CSV written by the fit command."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["chain", "iteration"]:
            raise DataError(f"{path}: not a draws file (header {header[:2]})")
        names = header[2:]
        chains = {}
        for row in reader:
            if not row:
                continue
            chains.setdefault(int(row[0]), []).append([float(v) for v in row[2:]])
    if not chains:
        raise DataError(f"{path}: no draws")
    ordered = [np.asarray(chains[c]) for c in sorted(chains)]
    n_draws = min(arr.shape[0] for arr in ordered)
    stack = np.stack([arr[:n_draws] for arr in ordered])
    zeros = np.zeros(stack.shape[:2])
    return DrawMatrix(names=names, draws=stack, accept_stat=zeros,
                      tree_depth=zeros.astype(np.int64),
                      divergent=zeros.astype(bool), energy=zeros)


# -- shared fitting machinery ----------------------------------------------


def _fit_target(data, model, prior, cfg: RunConfig, sampler_seed, workers=1):
    target = PosteriorTarget(
        model, prior, data, a=cfg.a, b=cfg.b,
        a_dl=cfg.a_dl if cfg.a_dl > 0 else None,
        parameterization=cfg.resolve_parameterization(),
        intercept=cfg.resolve_intercept(),
    )
    return target, run_chains(target, cfg.nuts_config(sampler_seed), workers=workers)


@dataclass
class _PointFit:
    beta: np.ndarray
    beta0: float = 0.0


def _point_fit(data, model, prior, cfg, sampler_seed, intercept=False) -> _PointFit:
    target = PosteriorTarget(
        model, prior, data, a=cfg.a, b=cfg.b,
        a_dl=cfg.a_dl if cfg.a_dl > 0 else None,
        parameterization=cfg.resolve_parameterization(),
        intercept=intercept,
    )
    draws = run_chains(target, cfg.nuts_config(sampler_seed))
    beta = posterior_mean_beta(draws, data.p)
    beta0 = float(np.mean(draws.pooled("beta0"))) if intercept else 0.0
    return _PointFit(beta=beta, beta0=beta0)


# -- commands ---------------------------------------------------------------


def cmd_simulate(cfg: RunConfig) -> int:
    out = _ensure_out(cfg)
    spec = cfg.sim_spec()
    rng = RngStream(cfg.seed, 0)
    data = gen_linear(spec, rng) if cfg.model == "linear" else gen_logistic(spec, rng)
    write_dataset_csv(data, os.path.join(out, "data.csv"))
    write_truth_csv(data, os.path.join(out, "truth.csv"))
    _write_resolved_config(cfg, out)
    print(f"simulate: wrote {data.n}x{data.p} {cfg.model} dataset to {out}/data.csv "
          f"(truth sidecar truth.csv, manifest resolved_config.json)")
    return EXIT_OK


def _fit_one_prior(cfg, data, prior, out):
    prior_dir = os.path.join(out, prior)
    os.makedirs(prior_dir, exist_ok=True)
    sampler_seed = _derive_seed(cfg.seed, 1, PRIORS.index(prior))
    workers = min(cfg.worker_count(), cfg.chains)
    target, draws = _fit_target(data, cfg.model, prior, cfg, sampler_seed, workers=workers)
    _draws_to_csv(draws, os.path.join(prior_dir, "draws.csv"))
    report = summarize(draws, max_tree_depth=cfg.max_tree_depth)
    _atomic_write_text(os.path.join(prior_dir, "diagnostics.txt"), report.to_text())
    if cfg.trace_params:
        export_trace(draws, list(cfg.trace_params), os.path.join(prior_dir, "trace.csv"))
    div_rate = draws.divergence_rate()
    max_rhat = report.max_rhat()
    line = (f"fit[{prior}]: max_rhat={max_rhat:.4f} min_ess={report.min_ess():.0f} "
            f"divergences={report.divergences} ({100 * div_rate:.1f}%)")
    print(line)
    if max_rhat > 1.05:
        print(f"fit[{prior}]: warning: max R-hat {max_rhat:.3f} exceeds 1.05; "
              f"chains may not have converged")
    if div_rate > DIVERGENCE_WARNING_RATE:
        print(f"fit[{prior}]: warning: {100 * div_rate:.0f}% divergent transitions")
    return draws


def cmd_fit(cfg: RunConfig) -> int:
    out = _ensure_out(cfg)
    data = read_dataset_csv(cfg.data, cfg.response)
    if cfg.standardize_fit:
        data = standardize(data, model=cfg.model)
    for prior in cfg.priors:
        _fit_one_prior(cfg, data, prior, out)
    _write_resolved_config(cfg, out)
    return EXIT_OK


def _replicate_worker(args):
    """One replicate: simulate with stream r, fit every prior, score."""
    cfg_dict, r = args
    cfg = RunConfig(**cfg_dict)
    spec = cfg.sim_spec()
    rng = RngStream(cfg.seed, r)
    data = gen_linear(spec, rng) if cfg.model == "linear" else gen_logistic(spec, rng)
    record = {}
    for pi, prior in enumerate(cfg.priors):
        sampler_seed = _derive_seed(cfg.seed, 2, r, pi)
        target, draws = _fit_target(data, cfg.model, prior, cfg, sampler_seed)
        beta_hat = posterior_mean_beta(draws, data.p)
        metrics = {"mse": mse(data.true_beta, beta_hat)}
        if prior != "dl":
            sel = select(draws, prior, threshold=cfg.threshold)
            sens, spec_v = sens_spec(sel.indicator, data.true_inclusion)
            metrics["sens"] = sens
            metrics["spec"] = spec_v
        if cfg.cv_mspe:
            metrics["mspe"] = _replicate_mspe(cfg, data, prior, r, pi)
        record[prior] = metrics
    return r, record


def _replicate_mspe(cfg, data, prior, r, pi):
    mspe_metric = mspe_linear if cfg.model == "linear" else mspe_logistic

    def fit(train, fold_rng):
        sampler_seed = _derive_seed(fold_rng.seed, 5, fold_rng.stream_id % 2**31)
        return _point_fit(train, cfg.model, prior, cfg, sampler_seed)

    def metric(test, fitted, scaling):
        return mspe_metric(test.X, test.true_beta, fitted.beta)

    mean, _ = kfold_cv(
        data, k=cfg.folds, fit=fit, metric=metric,
        rng=RngStream(_derive_seed(cfg.seed, 3, r, pi), 0),
        model=cfg.model, standardize=False,
    )
    return mean


def cmd_replicate(cfg: RunConfig) -> int:
    out = _ensure_out(cfg)
    tasks = [(cfg.resolved_dict(), r) for r in range(cfg.replicates)]
    workers = min(cfg.worker_count(), cfg.replicates)
    results = {}
    failures = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {r: pool.submit(_replicate_worker, task)
                       for task, r in zip(tasks, range(cfg.replicates))}
            for r in range(cfg.replicates):
                try:
                    idx, record = futures[r].result()
                    results[idx] = record
                except (InitializationError, SamplerFailure, RuntimeError) as exc:
                    failures.append({"replicate": r, "error": str(exc)})
    else:
        for task in tasks:
            try:
                idx, record = _replicate_worker(task)
                results[idx] = record
            except (InitializationError, SamplerFailure, RuntimeError) as exc:
                failures.append({"replicate": task[1], "error": str(exc)})
    if len(failures) > 0.2 * cfg.replicates:
        print(f"replicate: aborting, {len(failures)}/{cfg.replicates} replicates failed",
              file=sys.stderr)
        for failure in failures:
            print(f"  replicate {failure['replicate']}: {failure['error']}", file=sys.stderr)
        return EXIT_SAMPLER

    metric_rows = []
    for r in sorted(results):
        for prior in cfg.priors:
            for metric, value in results[r][prior].items():
                metric_rows.append((r, prior, metric, value))
    _write_csv(
        os.path.join(out, "replicate_metrics.csv"),
        ["replicate", "prior", "metric", "value"],
        [(r, prior, metric, _fmt(v)) for r, prior, metric, v in metric_rows],
    )

    summary_rows = []
    report_records = []
    metric_names = sorted({m for _, _, m, _ in metric_rows})
    for metric in metric_names:
        per_prior = {}
        for prior in cfg.priors:
            vals = [v for r, pr, m, v in metric_rows if pr == prior and m == metric]
            vals = [v for v in vals if not np.isnan(v)]
            per_prior[prior] = np.asarray(vals)
        becca_vals = per_prior.get("becca")
        for prior in cfg.priors:
            vals = per_prior[prior]
            if vals.size == 0:
                continue
            mean_v = float(np.mean(vals))
            diff = se = ""
            if (prior != "becca" and becca_vals is not None
                    and becca_vals.size == vals.size and vals.size > 1):
                deltas = vals - becca_vals
                diff = float(np.mean(deltas))
                se = float(np.std(deltas, ddof=1) / np.sqrt(deltas.size))
            summary_rows.append((
                metric, prior, _fmt(mean_v),
                _fmt(diff) if diff != "" else "",
                _fmt(se) if se != "" else "",
            ))
            report_records.append({
                "metric": metric, "prior": prior, "mean": mean_v,
                "diff_vs_becca": diff if diff != "" else None,
                "se_diff": se if se != "" else None,
                "replicates": int(vals.size),
            })
    _write_csv(
        os.path.join(out, "summary.csv"),
        ["metric", "prior", "mean", "diff_vs_becca", "se_diff"],
        summary_rows,
    )
    report = {
        "setting": {"model": cfg.model, "n": cfg.n, "p": cfg.p, "q": cfg.q,
                    "covariance": cfg.covariance, "coef_law": cfg.coef_law,
                    "replicates": cfg.replicates, "seed": cfg.seed},
        "records": report_records,
        "failures": failures,
    }
    _atomic_write_text(os.path.join(out, "report.json"),
                       json.dumps(report, indent=2, sort_keys=True) + "\n")
    _write_resolved_config(cfg, out)
    print(f"replicate: {len(results)}/{cfg.replicates} replicates done, "
          f"{len(failures)} failed; report in {out}/summary.csv")
    return EXIT_OK


def cmd_cv(cfg: RunConfig) -> int:
    out = _ensure_out(cfg)
    data = read_dataset_csv(cfg.data, cfg.response)
    intercept = cfg.resolve_intercept()
    fold_rows = []
    report_records = []
    for pi, prior in enumerate(cfg.priors):
        def fit(train, fold_rng, _prior=prior):
            sampler_seed = _derive_seed(fold_rng.seed, 7, fold_rng.stream_id % 2**31)
            return _point_fit(train, cfg.model, _prior, cfg, sampler_seed,
                              intercept=intercept)

        def metric(test, fitted, scaling):
            X = test.X
            if scaling is not None:
                X = (X - scaling.x_mean) / scaling.x_sd
            eta = X @ fitted.beta + fitted.beta0
            if cfg.model == "linear":
                pred = eta + (scaling.y_mean if scaling is not None else 0.0)
                resid = test.y - pred
                return {"mspe": float(np.mean(resid * resid))}
            probs = sigmoid(eta)
            return classification_metrics(test.y, probs, threshold=cfg.threshold).as_dict()

        mean, per_fold = kfold_cv(
            data, k=cfg.folds, fit=fit, metric=metric,
            rng=RngStream(_derive_seed(cfg.seed, 6, pi), 0),
            model=cfg.model, standardize=True,
        )
        for f, values in enumerate(per_fold):
            for key, value in values.items():
                fold_rows.append((prior, f, key, _fmt(value)))
        report_records.append({"prior": prior, "folds": cfg.folds, "means": mean})
        pretty = ", ".join(f"{k}={v:.4f}" for k, v in mean.items())
        print(f"cv[{prior}]: {pretty}")
    _write_csv(os.path.join(out, "cv_metrics.csv"),
               ["prior", "fold", "metric", "value"], fold_rows)
    _atomic_write_text(os.path.join(out, "cv_report.json"),
                       json.dumps({"records": report_records}, indent=2, sort_keys=True) + "\n")
    _write_resolved_config(cfg, out)
    return EXIT_OK


def cmd_select(cfg: RunConfig) -> int:
    out = _ensure_out(cfg)
    for pi, prior in enumerate(cfg.priors):
        if cfg.draws_dir:
            draws_path = os.path.join(cfg.draws_dir, prior, "draws.csv")
            if not os.path.exists(draws_path):
                raise DataError(f"no draws found at {draws_path}; run fit first")
            draws = load_draws_csv(draws_path)
        else:
            data = read_dataset_csv(cfg.data, cfg.response)
            sampler_seed = _derive_seed(cfg.seed, 1, PRIORS.index(prior))
            _, draws = _fit_target(data, cfg.model, prior, cfg, sampler_seed,
                                   workers=min(cfg.worker_count(), cfg.chains))
        result = select(draws, prior, threshold=cfg.threshold)
        p = result.indicator.shape[0]
        prior_dir = os.path.join(out, prior)
        os.makedirs(prior_dir, exist_ok=True)
        _write_csv(
            os.path.join(prior_dir, "selection.csv"),
            ["predictor", "criterion", "indicator"],
            [(f"x{j + 1}", repr(float(result.criterion[j])), int(result.indicator[j]))
             for j in range(p)],
        )
        mp = model_posterior(draws, prior, RngStream(_derive_seed(cfg.seed, 8, pi), 0))
        top = top_k_models(mp, cfg.top_k)
        _write_csv(
            os.path.join(prior_dir, "top_models.csv"),
            [f"x{j + 1}" for j in range(p)] + ["probability"],
            [list(bits) + [repr(float(prob))] for bits, prob in top],
        )
        print(f"select[{prior}]: {int(result.indicator.sum())}/{p} predictors selected; "
              f"top model probability {top[0][1]:.4f}")
    _write_resolved_config(cfg, out)
    return EXIT_OK


def cmd_marginal(cfg: RunConfig) -> int:
    out = _ensure_out(cfg)
    failures = []

    eps = 1.0 / (2.0 * cfg.gamma_points)
    gamma_grid = np.linspace(eps, 1.0 - eps, cfg.gamma_points)
    gamma_rows = []
    if "becca" in cfg.priors:
        for x in gamma_grid:
            try:
                dens = becca_marginal_gamma_density(float(x), tol=cfg.marginal_gamma_tol)
            except IntegrationError as exc:
                failures.append(("gamma", "becca", float(x), str(exc)))
                dens = float("nan")
            gamma_rows.append((repr(float(x)), repr(dens), "becca"))
    for x in gamma_grid:
        ref = float(np.exp(log_beta_pdf(float(x), 0.5, 0.5)))
        gamma_rows.append((repr(float(x)), repr(ref), "beta(0.5,0.5)"))
    _write_csv(os.path.join(out, "marginal_gamma.csv"),
               ["x", "density", "prior"], gamma_rows)

    beta_grid = np.linspace(cfg.beta_min, cfg.beta_max, cfg.beta_points)
    evaluators = {
        "becca": becca_marginal_beta_density,
        "hs": hs_marginal_beta_density,
        "hsplus": hsplus_marginal_beta_density,
    }
    beta_rows = []
    for prior in cfg.priors:
        evaluator = evaluators[prior]
        for x in beta_grid:
            try:
                dens = evaluator(float(x), tol=cfg.marginal_beta_tol)
            except IntegrationError as exc:
                failures.append(("beta", prior, float(x), str(exc)))
                dens = float("nan")
            beta_rows.append((repr(float(x)), repr(dens), prior))
    _write_csv(os.path.join(out, "marginal_beta.csv"),
               ["x", "density", "prior"], beta_rows)
    _write_csv(os.path.join(out, "marginal_failures.csv"),
               ["curve", "prior", "x", "error"],
               [(c, pr, repr(x), err) for c, pr, x, err in failures])
    _write_resolved_config(cfg, out)
    print(f"marginal: wrote {len(gamma_rows)} gamma-curve and {len(beta_rows)} "
          f"beta-curve points to {out} ({len(failures)} integration failures)")
    return EXIT_OK


# -- argument parsing --------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="becca",
        description="Bayesian sparse regression with continuous spike-slab "
                    "and horseshoe-family shrinkage priors",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("simulate", "generate a simulation dataset (CSV + truth sidecar + manifest)"),
        ("fit", "sample the posterior for a dataset and emit draws + diagnostics"),
        ("replicate", "run a replicated simulation benchmark and aggregate metrics"),
        ("cv", "k-fold cross-validation on a dataset"),
        ("select", "variable selection and top-model heatmap from posterior draws"),
        ("marginal", "evaluate marginal prior density curves on a grid"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", help="JSON config file")
        cmd.add_argument("--seed", type=int)
        cmd.add_argument("--out")
        cmd.add_argument("--prior", action="append", dest="priors",
                         help="prior to run (repeatable): becca, hs, hsplus, dl")
        cmd.add_argument("--model", choices=MODELS)
        cmd.add_argument("--chains", type=int)
        cmd.add_argument("--warmup", type=int)
        cmd.add_argument("--draws", type=int)
        cmd.add_argument("--threads", type=int)
        cmd.add_argument("--target-accept", type=float, dest="target_accept")
        cmd.add_argument("--max-tree-depth", type=int, dest="max_tree_depth")
        cmd.add_argument("--parameterization", choices=("default", "centered", "noncentered"))
        cmd.add_argument("--intercept", choices=("auto", "on", "off"))
        cmd.add_argument("--n", type=int)
        cmd.add_argument("--p", type=int)
        cmd.add_argument("--q", type=int)
        cmd.add_argument("--covariance")
        cmd.add_argument("--coef-law", dest="coef_law")
        cmd.add_argument("--replicates", type=int)
        cmd.add_argument("--folds", type=int)
        cmd.add_argument("--cv-mspe", dest="cv_mspe", action="store_const", const=True)
        cmd.add_argument("--data")
        cmd.add_argument("--response")
        cmd.add_argument("--draws-dir", dest="draws_dir")
        cmd.add_argument("--standardize", dest="standardize_fit",
                         action="store_const", const=True)
        cmd.add_argument("--threshold", type=float)
        cmd.add_argument("--top-k", type=int, dest="top_k")
        cmd.add_argument("--trace-params", dest="trace_params")
        cmd.add_argument("--gamma-points", type=int, dest="gamma_points")
        cmd.add_argument("--beta-points", type=int, dest="beta_points")
        cmd.add_argument("--beta-min", type=float, dest="beta_min")
        cmd.add_argument("--beta-max", type=float, dest="beta_max")
    return parser


_COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "replicate": cmd_replicate,
    "cv": cmd_cv,
    "select": cmd_select,
    "marginal": cmd_marginal,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = vars(parser.parse_args(argv))
    command = args.pop("command")
    config_path = args.pop("config", None)
    try:
        cfg = build_config(command, config_path=config_path, overrides=args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return _COMMANDS[command](cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except UnsupportedSelectionError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InitializationError, SamplerFailure) as exc:
        print(f"sampler failure: {exc}", file=sys.stderr)
        return EXIT_SAMPLER


if __name__ == "__main__":
    raise SystemExit(main())
