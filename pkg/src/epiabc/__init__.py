"""Stochastic SIR epidemics with contact tracing, fitted by ABC."""

from .abc import (
    AllWeightsZeroError,
    WeightedPosterior,
    kde_bandwidth,
    posterior_density,
    posterior_mean,
    posterior_mode,
    posterior_quantile,
    tolerance_from_rate,
)
from .adjust import NCHConfig, locl_adjust, nch_adjust, nch_fit
from .io import DetectionDataset, detections_from_path, ingest_detections
from .mcmc import run_mcmc
from .model import (
    FREQUENCY_DEPENDENT,
    MASS_ACTION,
    THETA_NAMES,
    Parameters,
    PopulationState,
    ct_pressure,
    ct_rate,
    event_rates,
    initial_state,
)
from .ode import solve_ode
from .priors import (
    GammaPrior,
    HalfLifeUniform,
    Log10Uniform,
    hiv_priors,
    priors_from_spec,
    sir_gamma_priors,
)
from .simulate import EpidemicPath, simulate, spawn_seeds
from .study import (
    SimTemplate,
    StudyConfig,
    abc_rejection,
    posterior_predictive,
    prediction_error,
    run_synthetic_study,
    standard_sir_dataset,
    tune_tolerance,
)
from .summaries import detection_paths, l1_distance, vector_summary

__all__ = [
    "AllWeightsZeroError",
    "DetectionDataset",
    "EpidemicPath",
    "FREQUENCY_DEPENDENT",
    "GammaPrior",
    "HalfLifeUniform",
    "Log10Uniform",
    "MASS_ACTION",
    "NCHConfig",
    "Parameters",
    "PopulationState",
    "SimTemplate",
    "StudyConfig",
    "THETA_NAMES",
    "WeightedPosterior",
    "abc_rejection",
    "ct_pressure",
    "ct_rate",
    "detection_paths",
    "detections_from_path",
    "event_rates",
    "hiv_priors",
    "ingest_detections",
    "initial_state",
    "kde_bandwidth",
    "l1_distance",
    "locl_adjust",
    "nch_adjust",
    "nch_fit",
    "posterior_density",
    "posterior_mean",
    "posterior_mode",
    "posterior_predictive",
    "posterior_quantile",
    "prediction_error",
    "priors_from_spec",
    "run_mcmc",
    "run_synthetic_study",
    "simulate",
    "sir_gamma_priors",
    "solve_ode",
    "spawn_seeds",
    "standard_sir_dataset",
    "tolerance_from_rate",
    "tune_tolerance",
    "vector_summary",
]
