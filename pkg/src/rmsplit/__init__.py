"""Recurrent multilevel splitting for small steady-state probabilities.

The steady-state probability gamma = P(X in B) of an ergodic Markov chain
factors as alpha_A * T_B: the per-step frequency of inward crossings of a
recurrency set A times the expected time spent in B per recurrency cycle.
alpha_A is frequent and estimated by plain simulation; T_B is rare and
estimated by multilevel splitting started from stored cycle origins.
"""

from .alpha import AlphaEstimate, alpha_batch_means, alpha_exact_mc
from .driver import McResult, RmsConfig, RmsReport, compare, run_mc_gamma, run_rms
from .errors import (BudgetExceededError, DegenerateFitError, InsufficientSamplesError,
                     ModelInstabilityError, RmsError, UnstableSystemError, ZeroCrossingsError)
from .models import ModelSpec, sample_path, simulate_path, step
from .oracle import gamma_oracle, invert_gamma, solve_stationary_covariance, stationary_sampler
from .planner import (OptimalPlanInputs, OptimalPlanOutputs, efficiency_ratio, mc_workload,
                      optimal_plan, predicted_sre, rounded_plan, solve_c)
from .recurrency import (CycleRecord, ImportanceFunction, OriginStore, RecurrencySet,
                         collect_cycles, detect_inward_crossing, optimize_recurrency_level,
                         quantile_validation)
from .rng import RngStream
from .splitting import (MlsResult, PilotResult, SplittingPlan, mls_estimates, place_thresholds,
                        run_mls, run_pilot_fns)

__version__ = "0.1.0"

__all__ = [
    "AlphaEstimate", "BudgetExceededError", "CycleRecord", "DegenerateFitError",
    "ImportanceFunction", "InsufficientSamplesError", "McResult", "MlsResult",
    "ModelInstabilityError", "ModelSpec", "OptimalPlanInputs", "OptimalPlanOutputs",
    "OriginStore", "PilotResult", "RecurrencySet", "RmsConfig", "RmsError", "RmsReport",
    "RngStream", "SplittingPlan", "UnstableSystemError", "ZeroCrossingsError",
    "alpha_batch_means", "alpha_exact_mc", "collect_cycles", "compare",
    "detect_inward_crossing", "efficiency_ratio", "gamma_oracle", "invert_gamma",
    "mc_workload", "mls_estimates", "optimal_plan", "optimize_recurrency_level",
    "place_thresholds", "predicted_sre", "quantile_validation", "rounded_plan",
    "run_mc_gamma", "run_mls", "run_pilot_fns", "run_rms", "sample_path", "simulate_path",
    "solve_c", "solve_stationary_covariance", "stationary_sampler", "step",
]
