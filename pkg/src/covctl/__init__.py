"""Exact covariance propagation and gain synthesis for linear systems with
stochastic parametric and additive uncertainty."""

__version__ = "0.1.0"

from .covariance import (CovarianceTrajectory, build_m, propagate, stability_report,
                         steady_state, step_matrix_form, step_vec_form)
from .model import SystemModel, evaluate_abar, example_model, load_model, save_model
from .moments import CpMatrix, compute_cp_analytic, estimate_cp_empirical, gaussian_moment
from .montecarlo import SimConfig, compare, simulate
from .synthesis import SynthesisResult, min_spectral_norm_gain, synthesize_gain, verify_lmi

__all__ = [
    "CovarianceTrajectory", "CpMatrix", "SimConfig", "SynthesisResult", "SystemModel",
    "build_m", "compare", "compute_cp_analytic", "estimate_cp_empirical", "evaluate_abar",
    "example_model", "gaussian_moment", "load_model", "min_spectral_norm_gain", "propagate",
    "save_model", "simulate", "stability_report", "steady_state", "step_matrix_form",
    "step_vec_form", "synthesize_gain", "verify_lmi",
]
