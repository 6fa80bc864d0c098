"""Numerical laboratory for the inhomogeneous Curie-Weiss model and its Stein bounds."""

__version__ = "0.1.0"

from .errors import (DegeneracyError, DimensionError, ICWError, QuadratureError, RegimeError,
                     RepresentationError, SizeError, SolverError)
from .exactdist import JointDistribution, MarginalSummary, dp_joint, enumerate_law, standardize
from .landau import Observables, g, g_deriv, observables, solve_fixed_point
from .model import ModelParams, hamiltonian, in_uniqueness_regime, log_gibbs_weight
from .normal import kolmogorov_distance, norm_cdf
from .quadrature import cgf, cgf_general, hs_density, log_laplace_integral
from .sampler import glauber_conditional_mean, glauber_step, sample_exact
from .stein import bound_terms, decomposition_terms, errorterm_bounds, stein_f, verify_regression
from .weights import WeightLaw, WeightSequence, critical_beta, moments, replicate

__all__ = [
    "DegeneracyError", "DimensionError", "ICWError", "QuadratureError", "RegimeError",
    "RepresentationError", "SizeError", "SolverError",
    "JointDistribution", "MarginalSummary", "dp_joint", "enumerate_law", "standardize",
    "Observables", "g", "g_deriv", "observables", "solve_fixed_point",
    "ModelParams", "hamiltonian", "in_uniqueness_regime", "log_gibbs_weight",
    "kolmogorov_distance", "norm_cdf",
    "cgf", "cgf_general", "hs_density", "log_laplace_integral",
    "glauber_conditional_mean", "glauber_step", "sample_exact",
    "bound_terms", "decomposition_terms", "errorterm_bounds", "stein_f", "verify_regression",
    "WeightLaw", "WeightSequence", "critical_beta", "moments", "replicate",
]
