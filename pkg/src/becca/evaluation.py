"""Inference and prediction metrics, selection rules, joint model-posterior
estimation and cross-validation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .core_stats import RngStream
from .datagen import standardize as _standardize
from .priors import kappa
from .transforms import sigmoid

__all__ = [
    "SelectionResult",
    "ModelPosterior",
    "ClassificationMetrics",
    "UnsupportedSelectionError",
    "mse",
    "sens_spec",
    "select",
    "inclusion_criterion_draws",
    "model_posterior",
    "prob_true_model",
    "top_k_models",
    "mspe_linear",
    "mspe_logistic",
    "classification_metrics",
    "posterior_mean_beta",
    "kfold_cv",
]


class UnsupportedSelectionError(ValueError):
    """Raised for priors without an inclusion-probability analogue."""


def mse(beta_true, beta_hat) -> float:
    """Mean squared coordinate error between two coefficient vectors."""
    beta_true = np.asarray(beta_true, dtype=float)
    beta_hat = np.asarray(beta_hat, dtype=float)
    if beta_true.shape != beta_hat.shape:
        raise ValueError("coefficient vectors must have equal length")
    d = beta_true - beta_hat
    return float(np.mean(d * d))


def sens_spec(indicator, true_inclusion):
    """(sensitivity, specificity) of a 0/1 selection against the truth.

    An empty positive (or negative) class makes the corresponding ratio
    undefined; it is reported as NaN.
    """
    indicator = np.asarray(indicator)
    truth = np.asarray(true_inclusion)
    if indicator.shape != truth.shape:
        raise ValueError("indicator and truth must have equal length")
    for name, vec in (("indicator", indicator), ("true_inclusion", truth)):
        if not np.all(np.isin(vec, (0, 1))):
            raise ValueError(f"{name} must contain only 0/1 entries")
    tp = int(np.sum((indicator == 1) & (truth == 1)))
    fn = int(np.sum((indicator == 0) & (truth == 1)))
    tn = int(np.sum((indicator == 0) & (truth == 0)))
    fp = int(np.sum((indicator == 1) & (truth == 0)))
    sens = tp / (tp + fn) if (tp + fn) > 0 else math.nan
    spec = tn / (tn + fp) if (tn + fp) > 0 else math.nan
    return sens, spec


@dataclass
class SelectionResult:
    """Thresholded variable selection; indicator_j = 1 iff criterion_j
    exceeds the threshold strictly."""

    indicator: np.ndarray
    criterion: np.ndarray
    threshold: float = 0.5


def inclusion_criterion_draws(draws, prior: str) -> np.ndarray:
    """Pooled per-iterate inclusion criterion, shaped (iterates, p).

    The BECCA criterion is gamma_j itself; for the horseshoe family it is
    1 - kappa_j with the horseshoe+ local scale lambda_j * eta_j.  The
    Dirichlet-Laplace prior has no analogous quantity.
    """
    if prior == "becca":
        p = sum(1 for n in draws.names if n.startswith("gamma["))
        if p == 0:
            raise ValueError("draws contain no gamma parameters")
        return np.column_stack([draws.pooled(f"gamma[{j}]") for j in range(p)])
    if prior in ("hs", "hsplus"):
        p = sum(1 for n in draws.names if n.startswith("lambda["))
        if p == 0:
            raise ValueError("draws contain no lambda parameters")
        tau = draws.pooled("tau")
        cols = []
        for j in range(p):
            lam = draws.pooled(f"lambda[{j}]")
            if prior == "hsplus":
                lam = lam * draws.pooled(f"eta[{j}]")
            cols.append(1.0 - kappa(lam, tau))
        return np.column_stack(cols)
    if prior == "dl":
        raise UnsupportedSelectionError(
            "the Dirichlet-Laplace prior lacks a straightforward inclusion "
            "criterion and is excluded from selection"
        )
    raise ValueError(f"unknown prior {prior!r}")


def select(draws, prior: str, threshold: float = 0.5) -> SelectionResult:
    """Select variables by thresholding the posterior median criterion."""
    crit = np.median(inclusion_criterion_draws(draws, prior), axis=0)
    return SelectionResult(
        indicator=(crit > threshold).astype(int),
        criterion=crit,
        threshold=threshold,
    )


@dataclass
class ModelPosterior:
    """Estimated posterior over inclusion bit-vectors."""

    probs: dict
    total_iterates: int

    def probability(self, bits) -> float:
        return self.probs.get(tuple(int(b) for b in bits), 0.0)


def model_posterior(draws, prior: str, rng: RngStream) -> ModelPosterior:
    """Sample one inclusion vector per stored iterate (Bernoulli with the
    iterate's criterion as success probability) and tabulate frequencies."""
    crit = inclusion_criterion_draws(draws, prior)
    k, p = crit.shape
    u = rng.generator().random((k, p))
    indicators = (u < crit).astype(np.uint8)
    uniq, counts = np.unique(indicators, axis=0, return_counts=True)
    probs = {
        tuple(int(b) for b in uniq[i]): counts[i] / k
        for i in range(uniq.shape[0])
    }
    return ModelPosterior(probs=probs, total_iterates=k)


def prob_true_model(mp: ModelPosterior, true_inclusion) -> float:
    """Estimated posterior probability of the generating model."""
    return mp.probability(np.asarray(true_inclusion, dtype=int))


def top_k_models(mp: ModelPosterior, k: int):
    """The k highest-probability models as (bits, probability) pairs,
    sorted by descending probability with lexicographic tie-break."""
    if k < 1:
        raise ValueError("k must be at least 1")
    ranked = sorted(mp.probs.items(), key=lambda item: (-item[1], item[0]))
    return ranked[:k]


def mspe_linear(X_test, beta_true, beta_hat) -> float:
    """Mean squared discrepancy of linear predictors over the test rows."""
    X_test = np.asarray(X_test, dtype=float)
    beta_true = np.asarray(beta_true, dtype=float)
    beta_hat = np.asarray(beta_hat, dtype=float)
    if X_test.shape[1] != beta_true.shape[0] or beta_true.shape != beta_hat.shape:
        raise ValueError("test matrix and coefficient vectors disagree in dimension")
    d = X_test @ (beta_true - beta_hat)
    return float(np.mean(d * d))


def mspe_logistic(X_test, beta_true, beta_hat) -> float:
    """Mean squared discrepancy of success probabilities over the test rows."""
    X_test = np.asarray(X_test, dtype=float)
    beta_true = np.asarray(beta_true, dtype=float)
    beta_hat = np.asarray(beta_hat, dtype=float)
    if X_test.shape[1] != beta_true.shape[0] or beta_true.shape != beta_hat.shape:
        raise ValueError("test matrix and coefficient vectors disagree in dimension")
    d = sigmoid(X_test @ beta_true) - sigmoid(X_test @ beta_hat)
    return float(np.mean(d * d))


@dataclass
class ClassificationMetrics:
    """Threshold-based confusion metrics plus ranking AUC.

    ``acc`` is a percentage; the others live in [0, 1].  AUC is NaN when
    only one class is present.
    """

    acc: float
    spec: float
    sens: float
    auc: float
    f1: float

    def as_dict(self):
        return {"acc": self.acc, "spec": self.spec, "sens": self.sens,
                "auc": self.auc, "f1": self.f1}


def classification_metrics(y_true, prob_hat, threshold: float = 0.5) -> ClassificationMetrics:
    """ACC (percent), specificity, sensitivity, rank-sum AUC with tie
    correction and F1, predicting positive when prob > threshold."""
    y = np.asarray(y_true)
    prob = np.asarray(prob_hat, dtype=float)
    if y.shape != prob.shape:
        raise ValueError("y_true and prob_hat must have equal length")
    if not np.all(np.isin(y, (0, 1))):
        raise ValueError("y_true must be binary")
    pred = (prob > threshold).astype(int)
    tp = int(np.sum((pred == 1) & (y == 1)))
    tn = int(np.sum((pred == 0) & (y == 0)))
    fp = int(np.sum((pred == 1) & (y == 0)))
    fn = int(np.sum((pred == 0) & (y == 1)))
    n = y.size
    acc = 100.0 * (tp + tn) / n
    sens = tp / (tp + fn) if (tp + fn) > 0 else math.nan
    spec = tn / (tn + fp) if (tn + fp) > 0 else math.nan
    f1 = 2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) > 0 else math.nan
    n1 = int(np.sum(y == 1))
    n0 = n - n1
    if n1 == 0 or n0 == 0:
        auc = math.nan
    else:
        ranks = rankdata(prob)  # average ranks give the tie correction
        auc = (float(np.sum(ranks[y == 1])) - n1 * (n1 + 1) / 2.0) / (n1 * n0)
    return ClassificationMetrics(acc=acc, spec=spec, sens=sens, auc=auc, f1=f1)


def posterior_mean_beta(draws, p: int, use_median: bool = False) -> np.ndarray:
    """Coefficient point estimate from stored draws (posterior mean by
    default, median via flag)."""
    cols = np.column_stack([draws.pooled(f"beta[{j}]") for j in range(p)])
    return np.median(cols, axis=0) if use_median else cols.mean(axis=0)


def _fold_assignment(n, k, gen):
    perm = gen.permutation(n)
    return np.array_split(perm, k)


def kfold_cv(data, k=5, fit=None, metric=None, rng=None, model="linear",
             standardize=True):
    """Seeded k-fold cross-validation.

    Folds are a random partition with sizes differing by at most one.
    ``fit(train, fold_rng)`` returns a fitted object (typically a
    coefficient estimate); ``metric(test_raw, fitted, scaling)`` scores it
    on the raw held-out split, with ``scaling`` the training-split
    standardization (None when ``standardize`` is off).  Metrics may
    return a float or a dict of named floats.

    For logistic data, folds whose training or test split contains a
    single class are resampled up to 10 times before giving up.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    if data.n < k:
        raise ValueError("need at least k observations")
    if fit is None or metric is None:
        raise ValueError("fit and metric procedures are required")
    rng = rng if rng is not None else RngStream(0)

    folds = None
    for attempt in range(10):
        candidate = _fold_assignment(data.n, k, rng.child(attempt).generator())
        if model != "logistic":
            folds = candidate
            break
        ok = True
        for test_idx in candidate:
            train_idx = np.setdiff1d(np.arange(data.n), test_idx)
            if len(np.unique(data.y[test_idx])) < 2 or len(np.unique(data.y[train_idx])) < 2:
                ok = False
                break
        if ok:
            folds = candidate
            break
    if folds is None:
        raise ValueError(
            "could not find a fold assignment with both classes in every "
            "split after 10 attempts"
        )

    from .models import Dataset  # local import to avoid a cycle at module load

    values = []
    for f, test_idx in enumerate(folds):
        train_idx = np.setdiff1d(np.arange(data.n), test_idx)
        train = Dataset(y=data.y[train_idx], X=data.X[train_idx],
                        true_beta=data.true_beta, true_inclusion=data.true_inclusion)
        test = Dataset(y=data.y[test_idx], X=data.X[test_idx],
                       true_beta=data.true_beta, true_inclusion=data.true_inclusion)
        scaling = None
        if standardize:
            train = _standardize(train, model=model)
            scaling = train.scaling
        fitted = fit(train, rng.child(1000 + f))
        values.append(metric(test, fitted, scaling))

    if values and isinstance(values[0], dict):
        keys = values[0].keys()
        mean = {key: float(np.mean([v[key] for v in values])) for key in keys}
    else:
        mean = float(np.mean(values))
    return mean, values
