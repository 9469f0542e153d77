"""Off-policy policy optimization via iterated concave surrogate bounds."""

from ._core import (
    BranchRule,
    CartpolePhysics,
    CartpoleState,
    EstimatorConfig,
    IPowerError,
    IterPowerConfig,
    IterationRecord,
    LoggedBatch,
    LogisticPolicy,
    MultiplierConfig,
    NewtonConfig,
    OptimizationReport,
    PolicyFamily,
    RandomStream,
    Rollout,
    StepObservation,
    SurrogateEval,
    cartpole_step,
    constrained_iterative_power,
    effective_sample_size,
    importance_weight,
    iterative_power,
    j_hat,
    lower_bound_eval,
    mixed_bound_eval,
    optimal_control_variate,
    power_bound_eval,
    read_batch,
    run_bandit_oracle,
    run_cartpole_rollout,
    shift_for_positivity,
    shift_gap,
    upper_bound_factor,
    write_batch,
)
from ._core import __version__

__all__ = [
    "BranchRule",
    "CartpolePhysics",
    "CartpoleState",
    "EstimatorConfig",
    "IPowerError",
    "IterPowerConfig",
    "IterationRecord",
    "LoggedBatch",
    "LogisticPolicy",
    "MultiplierConfig",
    "NewtonConfig",
    "OptimizationReport",
    "PolicyFamily",
    "RandomStream",
    "Rollout",
    "StepObservation",
    "SurrogateEval",
    "cartpole_step",
    "constrained_iterative_power",
    "effective_sample_size",
    "importance_weight",
    "iterative_power",
    "j_hat",
    "lower_bound_eval",
    "mixed_bound_eval",
    "optimal_control_variate",
    "power_bound_eval",
    "read_batch",
    "run_bandit_oracle",
    "run_cartpole_rollout",
    "shift_for_positivity",
    "shift_gap",
    "upper_bound_factor",
    "write_batch",
    "__version__",
]
