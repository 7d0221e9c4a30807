"""Optimal trading under delayed information in Gaussian markets.

The package discretizes and solves the integral-equation system that
characterizes the optimal strategy and optimal expected exponential utility
when a trader observes a Gaussian price process through a deterministic
information delay.  See the README for the pipeline overview and the
``demos/`` scripts for worked examples.
"""

from .closedform import (
    ReferenceCase,
    closed_form_value,
    constant_market_solution,
    delay_penalty,
    gap_kernel_value,
    gauss_markov_covariance,
)
from .errors import ConditioningError, InvalidPerturbation, SpectrumViolation
from .kernels import Kernel, compose, eigenvalues_sym, l2_norm, solve_shifted
from .market import (
    MarketSpec,
    PreparedMarket,
    covariance_matrix,
    example_market,
    log_density_ratio,
    log_normalizer,
    mean_vector,
    prepare,
    significant_eigenvalues,
    solve_resolvent,
    transform_drift,
)
from .montecarlo import (
    PathEnsemble,
    StrategyPerturbation,
    UtilityEstimate,
    density_normalization_check,
    estimate_utility,
    ito_integral,
    perturbation_sweep,
    perturbation_test,
    random_perturbations,
    sample_paths,
)
from .solver import (
    OptimalSolution,
    corrected_gap_kernel,
    evaluate_strategy,
    optimal_value,
    scale_strategy,
    solve,
    solve_gap_kernel,
    solve_strategy_kernel,
)
from .timegrid import DelayMap, TimeGrid

__version__ = "0.1.0"

__all__ = [
    "ConditioningError",
    "DelayMap",
    "InvalidPerturbation",
    "Kernel",
    "MarketSpec",
    "OptimalSolution",
    "PathEnsemble",
    "PreparedMarket",
    "ReferenceCase",
    "SpectrumViolation",
    "StrategyPerturbation",
    "TimeGrid",
    "UtilityEstimate",
    "closed_form_value",
    "compose",
    "constant_market_solution",
    "corrected_gap_kernel",
    "covariance_matrix",
    "delay_penalty",
    "density_normalization_check",
    "eigenvalues_sym",
    "estimate_utility",
    "evaluate_strategy",
    "example_market",
    "gap_kernel_value",
    "gauss_markov_covariance",
    "ito_integral",
    "l2_norm",
    "log_density_ratio",
    "log_normalizer",
    "mean_vector",
    "optimal_value",
    "perturbation_sweep",
    "perturbation_test",
    "prepare",
    "random_perturbations",
    "sample_paths",
    "scale_strategy",
    "significant_eigenvalues",
    "solve",
    "solve_gap_kernel",
    "solve_resolvent",
    "solve_shifted",
    "solve_strategy_kernel",
    "transform_drift",
]
