"""Filtering, smoothing and optimal state estimation for a monitored qubit."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    DriftError,
    EstimationError,
    InvalidStateError,
    PropagationError,
    QSmoothError,
)
from .dynamics import ModelParams, build_step_operators  # noqa: E402
from .records import ObservedRecord, TimeGrid, UnobservedRecord  # noqa: E402
from .stats import EnsembleStats  # noqa: E402
from .engine import (  # noqa: E402
    PropagationPlan,
    WeightedEnsemble,
    assemble_conditioned,
    build_ensemble,
    generate_observed_record,
    propagate_filtered,
    propagate_retrofiltered,
    propagate_true,
    run_ensemble,
)
from .estimation import (  # noqa: E402
    RiskSeries,
    check_bounds,
    closed_form_risk,
    optimal_estimator,
    risk,
)
from .kernel import BACKEND  # noqa: E402

__all__ = [
    "BACKEND",
    "ConfigError",
    "DriftError",
    "EnsembleStats",
    "EstimationError",
    "InvalidStateError",
    "ModelParams",
    "ObservedRecord",
    "PropagationError",
    "PropagationPlan",
    "QSmoothError",
    "RiskSeries",
    "TimeGrid",
    "UnobservedRecord",
    "WeightedEnsemble",
    "assemble_conditioned",
    "build_ensemble",
    "build_step_operators",
    "check_bounds",
    "closed_form_risk",
    "generate_observed_record",
    "optimal_estimator",
    "propagate_filtered",
    "propagate_retrofiltered",
    "propagate_true",
    "risk",
    "run_ensemble",
]
