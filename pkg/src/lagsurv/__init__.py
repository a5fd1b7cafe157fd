"""Lagged cumulative-exposure effects in survival data.

A numpy library for fitting a constrained pointwise exposure curve plus a
unit-norm causal lag kernel to time-dependent survival data under a Cox
partial likelihood with Efron tie handling, together with scenario
simulation, evaluation metrics, and resampling-based uncertainty bands.
"""

__version__ = "0.1.0"

from .data import ExposurePanel, SurvivalOutcomes, ingest
from .errors import ConfigError, DataError, DegenerateKernelError, LagsurvError, NumericError
from .evaluation import (
    ContributionGrid,
    Metrics,
    c_index,
    contribution_grid,
    default_x_grid,
    evaluate,
    fitted_curves,
    gmse,
)
from .gradients import GradReport, finite_diff_grad, grad_check, loss_and_grads
from .loss import (
    LossValue,
    RiskMasks,
    build_masks,
    efron_loss,
    smoothness_penalty,
    total_loss,
)
from .model import cumulative_effect, exposure_forward, lag_convolve, project_kernel
from .params import EvalMode, NetConfig, ParamSet, init_params, load_params, save_params
from .simulate import (
    Scenario,
    SimulatedDataset,
    gen_exposures,
    perm_algo,
    scenario_functions,
    simulate_dataset,
    true_hazard,
)
from .training import (
    CiBands,
    CvResult,
    FitResult,
    SplitPlan,
    SweepResult,
    TrainConfig,
    bootstrap_bands,
    cross_validate,
    fit,
    smoothness_sweep,
    stratified_split,
)

__all__ = [
    "CiBands",
    "ConfigError",
    "ContributionGrid",
    "CvResult",
    "DataError",
    "DegenerateKernelError",
    "EvalMode",
    "ExposurePanel",
    "FitResult",
    "GradReport",
    "LagsurvError",
    "LossValue",
    "Metrics",
    "NetConfig",
    "NumericError",
    "ParamSet",
    "RiskMasks",
    "Scenario",
    "SimulatedDataset",
    "SplitPlan",
    "SurvivalOutcomes",
    "SweepResult",
    "TrainConfig",
    "bootstrap_bands",
    "build_masks",
    "c_index",
    "contribution_grid",
    "cross_validate",
    "cumulative_effect",
    "default_x_grid",
    "efron_loss",
    "evaluate",
    "exposure_forward",
    "finite_diff_grad",
    "fit",
    "fitted_curves",
    "gen_exposures",
    "gmse",
    "grad_check",
    "ingest",
    "init_params",
    "lag_convolve",
    "load_params",
    "loss_and_grads",
    "perm_algo",
    "project_kernel",
    "save_params",
    "scenario_functions",
    "simulate_dataset",
    "smoothness_penalty",
    "smoothness_sweep",
    "stratified_split",
    "total_loss",
    "true_hazard",
]
