"""Bayesian sparse regression with the Beta-Cauchy-Cauchy (BECCA) prior
and horseshoe, horseshoe+ and Dirichlet-Laplace baselines, sampled with a
self-contained No-U-Turn sampler."""

from .core_stats import (
    CovarianceSpec,
    DomainError,
    FactorizationError,
    IntegrationError,
    RngStream,
    cholesky,
    integrate_1d,
    log_beta_pdf,
    log_half_cauchy,
    log_inv_gamma_pdf,
    mvn_sample,
)
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
from .diagnostics import DiagnosticsReport, ess_bulk, export_trace, split_rhat, summarize
from .evaluation import (
    ClassificationMetrics,
    ModelPosterior,
    SelectionResult,
    UnsupportedSelectionError,
    classification_metrics,
    kfold_cv,
    model_posterior,
    mse,
    mspe_linear,
    mspe_logistic,
    posterior_mean_beta,
    prob_true_model,
    select,
    sens_spec,
    top_k_models,
)
from .models import (
    Dataset,
    PosteriorTarget,
    linear_conditional_beta,
    linear_log_likelihood,
    log_posterior_and_grad,
    logistic_log_likelihood,
    logistic_prob,
)
from .priors import (
    BeccaState,
    DirichletLaplaceState,
    HorseshoeState,
    becca_log_prior,
    becca_marginal_beta_density,
    becca_marginal_gamma_density,
    dl_log_prior,
    hs_log_prior,
    hs_marginal_beta_density,
    hsplus_marginal_beta_density,
    kappa,
)
from .sampler import DrawMatrix, InitializationError, NutsConfig, leapfrog, nuts_sample, run_chains
from .transforms import Block, BlockLayout, TransformedVector, to_constrained, to_unconstrained

__version__ = "0.1.0"
