"""Two-point bandit convex optimization: estimators, mirror descent, diagnostics."""

__version__ = "0.1.0"

from twopoint.geometry import (
    L2Ball,
    MirrorSetup,
    Shrunk,
    Simplex,
    entropic_setup,
    euclidean_setup,
    mirror_step,
    sample_unit_sphere,
    shrink_domain,
)
from twopoint.estimators import (
    GradientEstimate,
    OracleError,
    TwoPointOracle,
    anchored_gradient,
    smoothed_gradient_mc,
    smoothed_value,
    two_point_gradient,
)
from twopoint.optimizer import (
    RunAborted,
    RunRecord,
    ScheduleParams,
    average_iterate,
    default_parameters,
    run_bandit,
)
from twopoint.objectives import LossStream, RegretReport, builtin_objective, online_to_batch_check, regret

__all__ = [
    "GradientEstimate",
    "L2Ball",
    "LossStream",
    "MirrorSetup",
    "OracleError",
    "RegretReport",
    "RunAborted",
    "RunRecord",
    "ScheduleParams",
    "Shrunk",
    "Simplex",
    "TwoPointOracle",
    "anchored_gradient",
    "average_iterate",
    "builtin_objective",
    "default_parameters",
    "entropic_setup",
    "euclidean_setup",
    "mirror_step",
    "online_to_batch_check",
    "regret",
    "run_bandit",
    "sample_unit_sphere",
    "shrink_domain",
    "smoothed_gradient_mc",
    "smoothed_value",
    "two_point_gradient",
]
