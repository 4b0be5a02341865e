"""Persistence probabilities of weighted sums of stationary Gaussian sequences.

Submodules
----------
kernels     correlation kernels, weight sequences, scale functions
special     f_{p,H}, the Selberg value, C_{p,H} and D_{alpha,rho}
covariance  exact Gram matrices and scaling-limit ratios
simulate    exact stationary sampling and first-passage times
estimate    probability estimators, exponent fits, inequality checks
harness     experiment configs, reproduction suites and the CLI
"""
__version__ = "0.1.0"

from ._accel import BACKEND
from .covariance import F_rho_sigma, GramMatrix, gram_S, gram_stationary
from .estimate import (
    ExponentFit,
    ProbabilityEstimate,
    exponent_fit_linear,
    exponent_fit_loglog,
    orthant_qmc,
    persistence_mc,
)
from .kernels import (
    CorrelationKernel,
    StationaryCorrelation,
    WeightSequence,
    parse_correlation,
    parse_kernel,
    parse_weights,
)
from .simulate import PathBatch, circulant_embed, sample_stationary, weighted_partial_sums
from .special import PHParams, c_ph, f_ph, selberg_f11

__all__ = [
    "__version__",
    "BACKEND",
    "CorrelationKernel",
    "WeightSequence",
    "StationaryCorrelation",
    "parse_kernel",
    "parse_weights",
    "parse_correlation",
    "PHParams",
    "f_ph",
    "c_ph",
    "selberg_f11",
    "GramMatrix",
    "F_rho_sigma",
    "gram_S",
    "gram_stationary",
    "PathBatch",
    "circulant_embed",
    "sample_stationary",
    "weighted_partial_sums",
    "ProbabilityEstimate",
    "ExponentFit",
    "persistence_mc",
    "orthant_qmc",
    "exponent_fit_loglog",
    "exponent_fit_linear",
]
