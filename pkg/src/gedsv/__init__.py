"""Bayesian stochastic volatility with GED returns and Gamma precision beliefs.

Closed-form forward filtering, backward smoothing draws, posterior-mode
and Metropolis-Hastings inference, volatility forecasting, and a
simulation-study harness.  Hot kernels run in a compiled extension when
available, with a pure numpy fallback selected at import time (set
GEDSV_DISABLE_EXT=1 to force the fallback).
"""

__version__ = "0.1.0"

from ._kernels import BACKEND
from .bench import (
    BenchError,
    CellResult,
    cell_table,
    constant_variance_forecast,
    mae,
    model_forecast_fn,
    out_of_sample_eval,
    run_design_cell,
    srmse,
)
from .filtering import (
    FilterDivergedError,
    FilterOutput,
    VolatilityForecast,
    forecast_volatility,
    log_predictive_one_step,
    predict_state,
    run_filter,
    update_state,
)
from .inference import (
    GammaPrior,
    HessianNotPDError,
    InverseGammaPrior,
    laplace_log_evidence,
    latent_predictive_mixture,
    marginal_loglik_laplace,
    McmcConfig,
    McmcStuckError,
    metropolis_accept,
    NormalPrior,
    OptimizerOptions,
    posterior_mode,
    PosteriorSamples,
    PrecisionMixture,
    PriorSpec,
    quasi_newton_maximize,
    run_mcmc,
    split_chain_psrf,
    TransformedBetaPrior,
    tune_proposals,
    TuningFailedError,
    UniformPrior,
    default_start,
    log_posterior,
)
from .model import (
    DIFFUSE_INIT,
    GammaBelief,
    LatentPath,
    PARAM_NAMES,
    ReturnSeries,
    SimulationDesign,
    StaticParams,
    from_unconstrained,
    ged_log_constant,
    ged_log_density,
    params_from_design,
    simulate,
    to_unconstrained,
)
from .smoothing import (
    SmoothedDraws,
    backward_conditional,
    log_gamma_moments,
    sample_smoothed_path,
    sample_smoothed_paths,
    smooth_over_posterior,
    smoothed_volatility_summary,
)
from .special import (
    RngStream,
    digamma,
    log_gamma,
    psi_r,
    sample_gamma,
    sample_ged,
    sample_truncated_normal,
    trigamma,
    truncated_normal_logpdf,
)

__all__ = [
    "BACKEND",
    "BenchError",
    "CellResult",
    "DIFFUSE_INIT",
    "FilterDivergedError",
    "FilterOutput",
    "GammaBelief",
    "GammaPrior",
    "HessianNotPDError",
    "InverseGammaPrior",
    "LatentPath",
    "McmcConfig",
    "McmcStuckError",
    "NormalPrior",
    "OptimizerOptions",
    "PARAM_NAMES",
    "PosteriorSamples",
    "PrecisionMixture",
    "PriorSpec",
    "ReturnSeries",
    "RngStream",
    "SimulationDesign",
    "SmoothedDraws",
    "StaticParams",
    "TransformedBetaPrior",
    "TuningFailedError",
    "UniformPrior",
    "VolatilityForecast",
    "backward_conditional",
    "cell_table",
    "constant_variance_forecast",
    "default_start",
    "digamma",
    "forecast_volatility",
    "from_unconstrained",
    "ged_log_constant",
    "ged_log_density",
    "laplace_log_evidence",
    "latent_predictive_mixture",
    "log_gamma",
    "log_gamma_moments",
    "log_posterior",
    "log_predictive_one_step",
    "mae",
    "marginal_loglik_laplace",
    "metropolis_accept",
    "model_forecast_fn",
    "out_of_sample_eval",
    "params_from_design",
    "posterior_mode",
    "predict_state",
    "psi_r",
    "quasi_newton_maximize",
    "run_design_cell",
    "run_filter",
    "run_mcmc",
    "sample_gamma",
    "sample_ged",
    "sample_smoothed_path",
    "sample_smoothed_paths",
    "sample_truncated_normal",
    "simulate",
    "smooth_over_posterior",
    "smoothed_volatility_summary",
    "split_chain_psrf",
    "srmse",
    "to_unconstrained",
    "trigamma",
    "truncated_normal_logpdf",
    "tune_proposals",
    "update_state",
]
