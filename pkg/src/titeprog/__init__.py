"""Time-to-event CRM dose finding with progression-dropout handling."""

__version__ = "0.1.0"

from .core import (
    DesignConfig,
    Observation,
    Skeleton,
    build_skeleton,
    log_weighted_likelihood,
    posterior_beta_mean,
    prob_tox,
    recommend_dose,
    weight_of,
)
from .engine import (
    EventKind,
    PatientRecord,
    PatientStatus,
    Strategy,
    TrialEvent,
    TrialState,
    assign_next_patient,
    enrollment_gate,
    evaluability,
    finalize_trial,
    likelihood_snapshot,
    new_trial,
    process_event,
)

__all__ = [
    "DesignConfig",
    "Observation",
    "Skeleton",
    "build_skeleton",
    "log_weighted_likelihood",
    "posterior_beta_mean",
    "prob_tox",
    "recommend_dose",
    "weight_of",
    "EventKind",
    "PatientRecord",
    "PatientStatus",
    "Strategy",
    "TrialEvent",
    "TrialState",
    "assign_next_patient",
    "enrollment_gate",
    "evaluability",
    "finalize_trial",
    "likelihood_snapshot",
    "new_trial",
    "process_event",
]
