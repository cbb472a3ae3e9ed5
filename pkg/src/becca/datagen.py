"""Simulation-study data generators and dataset plumbing.

``gen_linear`` draws predictors from MVN(0, Sigma), sets the first q
coefficients active and the rest to zero, and adds N(0, sigma2) noise;
``gen_logistic`` does the same with Bernoulli responses through the
logistic link.  Datasets serialize to CSV with the response column named
``y`` and predictors ``x1..xp``; the truth goes in a sidecar CSV.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .core_stats import CovarianceSpec, RngStream, cholesky
from .models import Dataset
from .transforms import sigmoid

__all__ = [
    "CoefLaw",
    "SimSpec",
    "Standardization",
    "DataError",
    "gen_linear",
    "gen_logistic",
    "standardize",
    "apply_standardization",
    "write_dataset_csv",
    "write_truth_csv",
    "read_dataset_csv",
    "read_truth_csv",
]


class DataError(ValueError):
    """Malformed input data (missing or non-numeric cells, bad shapes)."""


@dataclass(frozen=True)
class CoefLaw:
    """How active coefficients are drawn.

    ``normal_scaled``: beta_j ~ N(0, g * sigma2) with g defaulting to the
    sample size; ``uniform``: beta_j ~ Unif(lo, hi); ``fixed``: all active
    coefficients equal ``value``.
    """

    kind: str = "normal_scaled"
    lo: float = 2.0
    hi: float = 7.5
    value: float = 2.5
    g: float | None = None
    sigma2: float = 1.0

    def __post_init__(self):
        if self.kind not in ("normal_scaled", "uniform", "fixed"):
            raise ValueError(f"unknown coefficient law {self.kind!r}")
        if self.kind == "uniform" and not self.lo < self.hi:
            raise ValueError("uniform law requires lo < hi")
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")


@dataclass(frozen=True)
class SimSpec:
    """One simulation scenario."""

    n: int
    p: int
    q: int
    model: str = "linear"
    covariance: CovarianceSpec | None = None
    coef_law: CoefLaw = field(default_factory=CoefLaw)
    seed: int = 0
    permute_active: bool = False

    def __post_init__(self):
        if self.n < 1 or self.p < 1:
            raise ValueError("n and p must be positive")
        if not 0 <= self.q <= self.p:
            raise ValueError("q must satisfy 0 <= q <= p")
        if self.model not in ("linear", "logistic"):
            raise ValueError(f"model must be linear or logistic, got {self.model!r}")
        if self.covariance is not None and self.covariance.dim != self.p:
            raise ValueError("covariance dimension must equal p")

    def resolved_covariance(self) -> CovarianceSpec:
        if self.covariance is not None:
            return self.covariance
        if self.model == "linear":
            return CovarianceSpec("equicorrelated", self.p, rho=0.75)
        return CovarianceSpec("autoregressive", self.p, rho=0.65)


def _draw_design_and_beta(spec: SimSpec, rng: RngStream):
    gen = rng.generator()
    L = cholesky(spec.resolved_covariance())
    X = gen.standard_normal((spec.n, spec.p)) @ L.T
    if spec.permute_active:
        active = np.sort(gen.permutation(spec.p)[: spec.q])
    else:
        active = np.arange(spec.q)
    law = spec.coef_law
    beta = np.zeros(spec.p)
    if spec.q > 0:
        if law.kind == "normal_scaled":
            g = law.g if law.g is not None else float(spec.n)
            beta[active] = gen.standard_normal(spec.q) * np.sqrt(g * law.sigma2)
        elif law.kind == "uniform":
            beta[active] = gen.uniform(law.lo, law.hi, spec.q)
        else:
            beta[active] = law.value
    inclusion = np.zeros(spec.p, dtype=int)
    inclusion[active] = 1
    return gen, X, beta, inclusion


def gen_linear(spec: SimSpec, rng: RngStream | None = None) -> Dataset:
    """Simulate a linear-regression dataset with the spec's coefficient law."""
    if spec.model != "linear":
        raise ValueError("gen_linear requires a linear SimSpec")
    rng = rng if rng is not None else RngStream(spec.seed)
    gen, X, beta, inclusion = _draw_design_and_beta(spec, rng)
    sigma = np.sqrt(spec.coef_law.sigma2)
    y = X @ beta + gen.standard_normal(spec.n) * sigma
    return Dataset(y=y, X=X, true_beta=beta, true_inclusion=inclusion)


def gen_logistic(spec: SimSpec, rng: RngStream | None = None) -> Dataset:
    """Simulate a logistic-regression dataset; responses are Bernoulli
    draws through the logistic link."""
    if spec.model != "logistic":
        raise ValueError("gen_logistic requires a logistic SimSpec")
    rng = rng if rng is not None else RngStream(spec.seed)
    gen, X, beta, inclusion = _draw_design_and_beta(spec, rng)
    pi = sigmoid(X @ beta)
    y = (gen.random(spec.n) < pi).astype(float)
    return Dataset(y=y, X=X, true_beta=beta, true_inclusion=inclusion)


@dataclass(frozen=True)
class Standardization:
    """Column statistics retained for back-transforming coefficients and
    for applying training-set scaling to held-out data."""

    x_mean: np.ndarray
    x_sd: np.ndarray
    y_mean: float = 0.0


def standardize(data: Dataset, model: str = "linear") -> Dataset:
    """Center and scale predictor columns by their sample statistics
    (ddof=1); for the linear model the response is centered as well.

    Constant columns are an error.  Idempotent on already-standardized
    data up to floating-point noise.
    """
    x_mean = data.X.mean(axis=0)
    x_sd = data.X.std(axis=0, ddof=1)
    for j, sd in enumerate(x_sd):
        if sd == 0.0 or not np.isfinite(sd):
            raise DataError(f"column x{j + 1} is constant; cannot standardize")
    X = (data.X - x_mean) / x_sd
    if model == "linear":
        y_mean = float(data.y.mean())
        y = data.y - y_mean
    else:
        y_mean = 0.0
        y = data.y.copy()
    scaling = Standardization(x_mean=x_mean, x_sd=x_sd, y_mean=y_mean)
    return Dataset(
        y=y,
        X=X,
        true_beta=data.true_beta,
        true_inclusion=data.true_inclusion,
        standardized=True,
        scaling=scaling,
    )


def apply_standardization(X: np.ndarray, scaling: Standardization) -> np.ndarray:
    return (np.asarray(X, dtype=float) - scaling.x_mean) / scaling.x_sd


def write_dataset_csv(data: Dataset, path) -> None:
    header = ["y"] + [f"x{j + 1}" for j in range(data.p)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(data.n):
            writer.writerow([repr(float(data.y[i]))] + [repr(float(v)) for v in data.X[i]])


def write_truth_csv(data: Dataset, path) -> None:
    if data.true_beta is None or data.true_inclusion is None:
        raise ValueError("dataset carries no truth to write")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["predictor", "beta_true", "inclusion"])
        for j in range(data.p):
            writer.writerow([f"x{j + 1}", repr(float(data.true_beta[j])), int(data.true_inclusion[j])])


def _parse_cell(raw, row, name):
    raw = raw.strip()
    if raw == "":
        raise DataError(f"row {row}, column {name!r}: missing value")
    try:
        return float(raw)
    except ValueError:
        raise DataError(f"row {row}, column {name!r}: non-numeric value {raw!r}") from None


def read_dataset_csv(path, response: str = "y") -> Dataset:
    """Parse a dataset CSV with a header row; all non-response columns are
    treated as predictors, in file order."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if response not in header:
            raise DataError(f"{path}: response column {response!r} not found in header")
        y_idx = header.index(response)
        pred_names = [h for i, h in enumerate(header) if i != y_idx]
        ys, rows = [], []
        for r, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: row {r} has {len(row)} cells, expected {len(header)}")
            ys.append(_parse_cell(row[y_idx], r, response))
            rows.append([
                _parse_cell(cell, r, header[i])
                for i, cell in enumerate(row) if i != y_idx
            ])
    if not rows:
        raise DataError(f"{path}: no data rows")
    data = Dataset(y=np.array(ys), X=np.array(rows))
    data.predictor_names = pred_names
    return data


def read_truth_csv(path):
    """Parse a truth sidecar; returns (beta_true, inclusion) arrays."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:3] != ["predictor", "beta_true", "inclusion"]:
            raise DataError(f"{path}: unexpected truth header {header}")
        beta, inc = [], []
        for r, row in enumerate(reader, start=1):
            if not row:
                continue
            beta.append(_parse_cell(row[1], r, "beta_true"))
            inc.append(int(_parse_cell(row[2], r, "inclusion")))
    return np.array(beta), np.array(inc, dtype=int)
