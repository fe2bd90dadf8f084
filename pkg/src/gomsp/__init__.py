"""Online convex optimization under time-varying constraints: a mirror
saddle-point method with a regularized dual, comparison baselines, the
economic-dispatch testbed, and a reproducible experiment harness.
"""

from .baselines import (MospState, SdgState, init_mosp_state, init_sdg_state,
                        inner_solve_convex, mosp_step, sdg_step,
                        solve_dispatch_lagrangian)
from .core import (DualBoundTracker, FirstOrderFeedback, GomspConfig,
                   GomspState, PenaltyTransform, dual_update, gomsp_step,
                   init_state, penalty_apply, penalty_chain_gradient,
                   penalty_deriv_factor, score_update,
                   validate_step_condition)
from .errors import (ConfigError, DomainError, EmptyRecordError, GomspError,
                     InfeasibleSlotError, InvalidInputError, NumericalError,
                     VerificationFailure)
from .experiment import (ComparisonResult, ExperimentConfig, ExperimentResult,
                         benchmark_table, load_config, run_comparison,
                         run_experiment)
from .geometry import (GeometryConstants, Regularizer, conjugate_value,
                       coupling_modulus, dual_norm, euclidean,
                       fenchel_coupling, geometry_constants, in_feasible_set,
                       mirror_map, primal_norm, project_capped_simplex,
                       regularizer_gradient, regularizer_value,
                       smoothed_entropy)
from .kernels import BACKEND
from .metrics import (MetricsRecord, aggregate_percentiles, init_metrics,
                      per_slot_optimum, queue_update, time_averages,
                      update_metrics)
from .problems import (ConstantEstimates, DispatchParams, RoundRealization,
                       TrackingParams, dispatch_constraint_gradients,
                       dispatch_constraints, dispatch_generate_round,
                       dispatch_loss, dispatch_loss_gradient,
                       estimate_constants, make_dispatch_params,
                       sample_feasible, tracking_loss, tracking_loss_gradient)
from .rng import RngStreams
from .verification import CheckResult, SuiteReport, run_verification

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CheckResult",
    "ComparisonResult",
    "ConfigError",
    "ConstantEstimates",
    "DispatchParams",
    "DomainError",
    "DualBoundTracker",
    "EmptyRecordError",
    "ExperimentConfig",
    "ExperimentResult",
    "FirstOrderFeedback",
    "GeometryConstants",
    "GomspConfig",
    "GomspError",
    "GomspState",
    "InfeasibleSlotError",
    "InvalidInputError",
    "MetricsRecord",
    "MospState",
    "NumericalError",
    "PenaltyTransform",
    "Regularizer",
    "RngStreams",
    "RoundRealization",
    "SdgState",
    "SuiteReport",
    "TrackingParams",
    "VerificationFailure",
    "aggregate_percentiles",
    "benchmark_table",
    "conjugate_value",
    "coupling_modulus",
    "dispatch_constraint_gradients",
    "dispatch_constraints",
    "dispatch_generate_round",
    "dispatch_loss",
    "dispatch_loss_gradient",
    "dual_norm",
    "dual_update",
    "estimate_constants",
    "euclidean",
    "fenchel_coupling",
    "geometry_constants",
    "gomsp_step",
    "in_feasible_set",
    "init_metrics",
    "init_mosp_state",
    "init_sdg_state",
    "init_state",
    "inner_solve_convex",
    "load_config",
    "make_dispatch_params",
    "mirror_map",
    "mosp_step",
    "penalty_apply",
    "penalty_chain_gradient",
    "penalty_deriv_factor",
    "per_slot_optimum",
    "primal_norm",
    "project_capped_simplex",
    "queue_update",
    "regularizer_gradient",
    "regularizer_value",
    "run_comparison",
    "run_experiment",
    "run_verification",
    "sample_feasible",
    "score_update",
    "sdg_step",
    "smoothed_entropy",
    "solve_dispatch_lagrangian",
    "time_averages",
    "tracking_loss",
    "tracking_loss_gradient",
    "update_metrics",
    "validate_step_condition",
]
