"""formopt: QUBO-surrogate experiment design for combinatorial formulations.

Fit a quadratic surrogate to scarce observations, anneal it to suggest the
next experiment, record the measurement, repeat. See README for the CLI and
the HTTP service.
"""

from .annealer import (
    DepthBudget,
    SaConfig,
    SolveResult,
    estimate_depth,
    exhaustive_solve,
    failure_rate,
    required_iterations,
    solve,
)
from .augmentation import AugmentConfig, augment, eliminate
from .campaign import (
    Campaign,
    LogEntry,
    init_campaign,
    load,
    record_result,
    run_simulated,
    save,
    suggest_next,
)
from .dataset import Dataset, Observation
from .encoding import FactorSchema, FactorSpec, decode, encode, hamming, neighbors
from .fitting import (
    FitConfig,
    FitReport,
    QuboRegressor,
    coarse_fine_fit,
    cost_contour_aware,
    cost_mse,
    error_report,
    fit,
)
from .oracles import Oracle, make_oracle
from .qubo import QuboModel

__version__ = "0.1.0"

__all__ = [
    "AugmentConfig",
    "Campaign",
    "Dataset",
    "DepthBudget",
    "FactorSchema",
    "FactorSpec",
    "FitConfig",
    "FitReport",
    "LogEntry",
    "Observation",
    "Oracle",
    "QuboModel",
    "QuboRegressor",
    "SaConfig",
    "SolveResult",
    "augment",
    "coarse_fine_fit",
    "cost_contour_aware",
    "cost_mse",
    "decode",
    "eliminate",
    "encode",
    "error_report",
    "estimate_depth",
    "exhaustive_solve",
    "failure_rate",
    "fit",
    "hamming",
    "init_campaign",
    "load",
    "make_oracle",
    "neighbors",
    "record_result",
    "required_iterations",
    "run_simulated",
    "save",
    "solve",
    "suggest_next",
]
