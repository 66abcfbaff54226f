"""Optimal ergodic harvesting of a one-dimensional stochastic population.

The controlled diffusion dX = X(mu(X) - h) dt + sigma X dB is harvested at
a rate h <= M to maximize the long-run average yield.  The package
computes the optimal bang-bang threshold from the stationary density,
verifies its optimality through the HJB crossing structure, constructs
optimal controls for concave and convex yield functions, and cross-checks
everything against Monte Carlo simulation.
"""
from .errors import (ContractError, DomainError, ExtinctionRegimeError,
                     HarvestError)
from .model import (AssumptionCheck, AssumptionReport, ModelParams, YieldSpec,
                    concave_log_yield, convex_power_yield, custom_drift_params,
                    drift_mu, identity_yield, logistic_params,
                    peak_of_x_mu, persistence_margin, phi_prime_inverse,
                    validate_assumptions, validate_yield,
                    yield_spec_from_config)
from .strategy import (Strategy, make_bang_bang, make_constant,
                       make_tabulated, strategy_eval)
from .density import (DensityProfile, asymptotic_yield,
                      fokker_planck_residual, stationary_density,
                      threshold_yield, yield_H)
from .optimize import (SweepRow, ThresholdResult, golden_max,
                       optimal_constant, optimal_threshold,
                       optimal_threshold_general, parameter_sweep,
                       parameter_sweep_detailed, yield_bounds)
from .hjb import (CrossingReport, HjbProfile, barrier_crossing_roots,
                  barrier_functions, concave_control,
                  convex_G, convex_G_unique_min, convex_control_rule,
                  crossing_report, g_roots,
                  hjb_residual, integrate_phi,
                  phi_rhs)
from .sim import (PathSummary, SimConfig, monte_carlo_yield,
                  occupancy_vs_density, simulate_path)

__version__ = "0.1.0"

__all__ = [
    "HarvestError", "ContractError", "DomainError", "ExtinctionRegimeError",
    "ModelParams", "YieldSpec", "AssumptionCheck", "AssumptionReport",
    "logistic_params", "custom_drift_params", "drift_mu",
    "persistence_margin", "peak_of_x_mu", "identity_yield",
    "concave_log_yield", "convex_power_yield", "phi_prime_inverse",
    "validate_assumptions", "validate_yield", "yield_spec_from_config",
    "Strategy", "make_constant", "make_bang_bang", "make_tabulated",
    "strategy_eval",
    "DensityProfile", "stationary_density", "asymptotic_yield", "yield_H",
    "threshold_yield", "fokker_planck_residual",
    "ThresholdResult", "SweepRow", "optimal_constant", "yield_bounds",
    "golden_max", "optimal_threshold", "optimal_threshold_general",
    "parameter_sweep", "parameter_sweep_detailed",
    "HjbProfile", "CrossingReport", "g_roots", "barrier_crossing_roots",
    "barrier_functions", "phi_rhs", "integrate_phi",
    "crossing_report", "hjb_residual", "concave_control", "convex_G",
    "convex_G_unique_min", "convex_control_rule",
    "SimConfig", "PathSummary", "simulate_path", "monte_carlo_yield",
    "occupancy_vs_density",
    "__version__",
]
