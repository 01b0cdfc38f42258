"""Heteroscedastic double Bayesian elastic net.

Joint Bayesian estimation of mean coefficients ``beta`` and log-variance
coefficients ``gamma`` under elastic-net shrinkage priors, with homoscedastic
baselines, MCMC diagnostics and a simulation harness.
"""
from .baselines import (
    EnetConfig,
    HomoBayesConfig,
    cv_select_enet,
    fit_ben,
    fit_blasso,
    fit_enet,
    fit_ols,
)
from .diagnostics import (
    FitSummary,
    SupportRule,
    contraction_ratio,
    effective_sample_size,
    gelman_rubin,
    l2_error,
    select_support,
    summarize,
    support_metrics,
)
from .model import (
    ChainState,
    ContractViolation,
    Dataset,
    GroundTruth,
    Hyperparameters,
    fisher_information_active,
    gaussian_kl,
    log_likelihood,
    log_posterior_unnorm,
    log_prior,
)
from .samplers import (
    ChainFailure,
    MhStats,
    PosteriorDraws,
    SamplerConfig,
    SingularMatrixError,
    fit_hdben,
    run_chain,
)
from .simulation import ScenarioSpec, generate_dataset, run_grid, run_replicate

__version__ = "0.1.0"

__all__ = [
    "ChainFailure",
    "ChainState",
    "ContractViolation",
    "Dataset",
    "EnetConfig",
    "FitSummary",
    "GroundTruth",
    "HomoBayesConfig",
    "Hyperparameters",
    "MhStats",
    "PosteriorDraws",
    "SamplerConfig",
    "ScenarioSpec",
    "SingularMatrixError",
    "SupportRule",
    "contraction_ratio",
    "cv_select_enet",
    "effective_sample_size",
    "fisher_information_active",
    "fit_ben",
    "fit_blasso",
    "fit_enet",
    "fit_hdben",
    "fit_ols",
    "gaussian_kl",
    "gelman_rubin",
    "generate_dataset",
    "l2_error",
    "log_likelihood",
    "log_posterior_unnorm",
    "log_prior",
    "run_chain",
    "run_grid",
    "run_replicate",
    "select_support",
    "summarize",
    "support_metrics",
]
