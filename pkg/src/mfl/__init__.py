"""Particle-based optimization of entropy-regularized mean-field objectives.

Core pieces: an exponential-integrator update for the underdamped particle
system (exact per-step Gaussian kernel for a frozen gradient), two baseline
integrators, three mean-field objectives (two-layer network risk, MMD, KSD),
independent verification oracles, and a CLI experiment harness.
"""

from .diagnostics import RunRecord, SeedBand, aggregate_seeds, fit_decay_rate, plateau_level
from .errors import ConfigError, DivergenceError, MflError, NumericalError, OracleError
from .integrators import (EmNulaSpec, NlaSpec, NulaSpec, StepParams,
                          derive_step_params, em_nula_step, nla_step, nula_step,
                          run_chain, sample_correlated_noise, tuned_step_params)
from .objectives import (KsdObjective, MeanFieldObjective, MmdObjective,
                         NeuralNetObjective, RidgeObjective,
                         gaussian_mixture_score, gaussian_score,
                         load_regression_csv, make_gaussian_regression_data)
from .particles import ParticleCloud, init_cloud, second_moments
from .rng import RngStreams

__all__ = [
    "ConfigError", "DivergenceError", "MflError", "NumericalError", "OracleError",
    "RngStreams", "ParticleCloud", "init_cloud", "second_moments",
    "StepParams", "derive_step_params", "tuned_step_params",
    "sample_correlated_noise", "nula_step", "em_nula_step", "nla_step",
    "NulaSpec", "EmNulaSpec", "NlaSpec", "run_chain",
    "MeanFieldObjective", "RidgeObjective", "NeuralNetObjective", "MmdObjective",
    "KsdObjective", "gaussian_score", "gaussian_mixture_score",
    "make_gaussian_regression_data", "load_regression_csv",
    "RunRecord", "SeedBand", "aggregate_seeds", "fit_decay_rate", "plateau_level",
]

__version__ = "0.1.0"
