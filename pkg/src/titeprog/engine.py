"""Sequential trial state machine.

A trial is a value (``TrialState``) transformed by pure transition functions:
``process_event`` folds one event into a new state, so replaying an event log
reproduces the state exactly. The same fold drives both the simulator and the
live conduct service.

Strategy semantics for progression dropouts:

* A - the evaluability threshold is forced to zero: every progressor counts
  toward the sample size and keeps contributing its partial follow-up.
* B - progressors below the threshold are unevaluable and replaced, but all
  their partial follow-up stays in the likelihood.
* C - unevaluable progressors keep only the follow-up that earlier dose
  assignments actually used (frozen at the last assignment before the
  progression); if no assignment used them, they drop out entirely.
"""

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .core import DesignConfig, Observation, Skeleton, _recommend_grouped


class Strategy(str, Enum):
    A = "A"
    B = "B"
    C = "C"


class PatientStatus(str, Enum):
    PENDING = "pending"
    COMPLETED = "completed_no_event"
    DLT = "dlt"
    PROGRESSED_EVALUABLE = "progressed_evaluable"
    PROGRESSED_UNEVALUABLE = "progressed_unevaluable"


EVALUABLE_TERMINAL = frozenset(
    {PatientStatus.COMPLETED, PatientStatus.DLT, PatientStatus.PROGRESSED_EVALUABLE}
)


class Evaluability(str, Enum):
    EVALUABLE = "evaluable"
    UNEVALUABLE = "unevaluable"
    PENDING = "pending"


class EventKind(str, Enum):
    ENROLLED = "enrolled"
    DLT = "dlt"
    PROGRESSION = "progression"
    WINDOW_COMPLETE = "window_complete"


TERMINAL_KINDS = frozenset({EventKind.DLT, EventKind.PROGRESSION, EventKind.WINDOW_COMPLETE})


class TrialError(Exception):
    """Contract violation in the trial fold (bad event, bad call order)."""


@dataclass(frozen=True)
class TrialEvent:
    time: float
    patient_id: int
    kind: EventKind
    dose: int | None = None


@dataclass(frozen=True)
class PatientRecord:
    patient_id: int
    enroll_time: float
    dose: int
    tox_time: float | None = None
    prog_time: float | None = None
    status: PatientStatus = PatientStatus.PENDING
    frozen_weight: float | None = None
    resolved_time: float | None = None


@dataclass(frozen=True)
class AssignmentRecord:
    """One dose-assignment computation: when, who, what, and the weights used."""

    time: float
    patient_id: int
    dose: int
    weights: tuple  # ((patient_id, weight), ...) for every included observation


@dataclass(frozen=True)
class TrialState:
    design: DesignConfig
    skeleton: Skeleton
    strategy: Strategy
    clock: float = 0.0
    patients: tuple = ()
    assignment_log: tuple = ()
    enrollment_open: bool = True


def new_trial(design: DesignConfig, skeleton: Skeleton, strategy: Strategy) -> TrialState:
    if len(skeleton.probs) != design.num_doses:
        raise TrialError("skeleton length does not match the design")
    return TrialState(design=design, skeleton=skeleton, strategy=Strategy(strategy))


def effective_phi(design: DesignConfig, strategy: Strategy) -> float:
    """Strategy A treats every progressor as evaluable regardless of design.phi."""
    return 0.0 if strategy is Strategy.A else design.phi


def evaluability(patient: PatientRecord, phi: float, window: float) -> Evaluability:
    """Classify a patient's contribution to the evaluable sample size."""
    if patient.status in (PatientStatus.DLT, PatientStatus.COMPLETED):
        return Evaluability.EVALUABLE
    if patient.status is PatientStatus.PENDING:
        return Evaluability.PENDING
    if phi == 0.0 or patient.prog_time >= phi * window:
        return Evaluability.EVALUABLE
    return Evaluability.UNEVALUABLE


def enrollment_gate(state: TrialState) -> bool:
    """Open while evaluable-terminal plus pending patients fall short of N.

    Pending patients count optimistically; a pending patient that later
    progresses below the threshold reopens the gate (replacement).
    """
    quota = 0
    for p in state.patients:
        if p.status in EVALUABLE_TERMINAL or p.status is PatientStatus.PENDING:
            quota += 1
    return quota < state.design.sample_size


def _snapshot_rows(state: TrialState, now: float):
    """Included likelihood rows (patient_id, dose, tox, weight) at time ``now``.

    Follow-up is min(now - enrollment, progression time, window). Unevaluable
    progressors contribute per strategy: full partial follow-up under A/B,
    the frozen weight under C (omitted when never used).
    """
    window = state.design.window
    frozen_strategy = state.strategy is Strategy.C
    rows = []
    for p in state.patients:
        if p.status is PatientStatus.DLT:
            rows.append((p.patient_id, p.dose, True, 1.0))
            continue
        if frozen_strategy and p.status is PatientStatus.PROGRESSED_UNEVALUABLE:
            if p.frozen_weight is None:
                continue
            rows.append((p.patient_id, p.dose, False, p.frozen_weight))
            continue
        followup = now - p.enroll_time
        if p.prog_time is not None and p.prog_time < followup:
            followup = p.prog_time
        if followup >= window:
            w = 1.0
        elif followup <= 0.0:
            w = 0.0
        else:
            w = followup / window
        rows.append((p.patient_id, p.dose, False, w))
    return rows


def likelihood_snapshot(state: TrialState, now: float):
    """Observations fed to the weighted likelihood at time ``now``."""
    if now < state.clock:
        raise TrialError("snapshot time precedes already-processed events")
    return [Observation(dose, tox, w) for _, dose, tox, w in _snapshot_rows(state, now)]


def _group_rows(rows, num_doses: int):
    tox_counts = np.zeros(num_doses)
    cens_counts = np.zeros(num_doses)
    part_dose = []
    part_w = []
    for _, dose, tox, w in rows:
        if tox:
            tox_counts[dose - 1] += 1.0
        elif w >= 1.0:
            cens_counts[dose - 1] += 1.0
        elif w > 0.0:
            part_dose.append(dose - 1)
            part_w.append(w)
    return (
        tox_counts,
        cens_counts,
        np.asarray(part_dose, dtype=np.int64),
        np.asarray(part_w, dtype=np.float64),
    )


def _freeze_weight(state: TrialState, patient: PatientRecord, recorded_at: float):
    """Follow-up already used by assignments strictly before the progression.

    Returns None when no assignment after the patient's enrollment and before
    the progression record used the patient (never-used observations drop).
    """
    last_use = None
    for entry in reversed(state.assignment_log):
        if entry.time >= recorded_at:
            continue
        if entry.time > patient.enroll_time:
            last_use = entry.time
        break
    if last_use is None:
        return None
    window = state.design.window
    used = min(last_use - patient.enroll_time, recorded_at - patient.enroll_time, window)
    return used / window


def process_event(state: TrialState, event: TrialEvent, _rows=None) -> TrialState:
    """Fold one event into the state; pure, validates ordering and duplicates."""
    if event.time < state.clock:
        raise TrialError(
            f"out-of-order event at t={event.time} (clock already at {state.clock})"
        )
    if event.kind is EventKind.ENROLLED:
        return _apply_enrolled(state, event, _rows)
    idx = event.patient_id - 1
    if not 0 <= idx < len(state.patients) or state.patients[idx].patient_id != event.patient_id:
        raise TrialError(f"unknown patient {event.patient_id}")
    patient = state.patients[idx]
    if patient.status is not PatientStatus.PENDING:
        raise TrialError(f"patient {event.patient_id} already has a terminal event")
    window = state.design.window
    onset = event.time - patient.enroll_time
    if event.kind is EventKind.DLT:
        if onset < 0.0 or onset > window:
            raise TrialError("DLT outside the toxicity window")
        updated = replace(
            patient, tox_time=onset, status=PatientStatus.DLT, resolved_time=event.time
        )
    elif event.kind is EventKind.PROGRESSION:
        if onset <= 0.0 or onset >= window:
            raise TrialError("progression must fall strictly inside the window")
        phi = effective_phi(state.design, state.strategy)
        if phi > 0.0 and onset < phi * window:
            status = PatientStatus.PROGRESSED_UNEVALUABLE
            frozen = (
                _freeze_weight(state, patient, event.time)
                if state.strategy is Strategy.C
                else None
            )
        else:
            status = PatientStatus.PROGRESSED_EVALUABLE
            frozen = None
        updated = replace(
            patient,
            prog_time=onset,
            status=status,
            frozen_weight=frozen,
            resolved_time=event.time,
        )
    elif event.kind is EventKind.WINDOW_COMPLETE:
        if onset + 1e-9 < window:
            raise TrialError("window completion before the window elapsed")
        updated = replace(patient, status=PatientStatus.COMPLETED, resolved_time=event.time)
    else:
        raise TrialError(f"unhandled event kind {event.kind}")
    patients = state.patients[:idx] + (updated,) + state.patients[idx + 1 :]
    next_state = replace(state, clock=event.time, patients=patients)
    return replace(next_state, enrollment_open=enrollment_gate(next_state))


def _apply_enrolled(state: TrialState, event: TrialEvent, rows) -> TrialState:
    if event.dose is None or not 1 <= event.dose <= state.design.num_doses:
        raise TrialError("enrollment requires a valid dose")
    if event.patient_id != len(state.patients) + 1:
        raise TrialError("patient ids must be assigned sequentially")
    if rows is None:
        rows = _snapshot_rows(state, event.time)
    entry = AssignmentRecord(
        time=event.time,
        patient_id=event.patient_id,
        dose=event.dose,
        weights=tuple((pid, w) for pid, _, _, w in rows),
    )
    record = PatientRecord(
        patient_id=event.patient_id, enroll_time=event.time, dose=event.dose
    )
    next_state = replace(
        state,
        clock=event.time,
        patients=state.patients + (record,),
        assignment_log=state.assignment_log + (entry,),
    )
    return replace(next_state, enrollment_open=enrollment_gate(next_state))


def highest_tried_dose(state: TrialState) -> int:
    return max((p.dose for p in state.patients), default=0)


def assign_next_patient(state: TrialState, now: float, dose_override: int | None = None):
    """Enroll the next patient at ``now`` and return (new state, dose).

    Builds the likelihood snapshot, asks the model for the next dose (no
    skipping over untried levels), and records the enrollment plus the
    assignment-log entry carrying the weights that the computation used.
    """
    if not enrollment_gate(state):
        raise TrialError("enrollment gate is closed")
    if now < state.clock:
        raise TrialError("assignment time precedes already-processed events")
    rows = _snapshot_rows(state, now)
    if dose_override is not None:
        dose = dose_override
    else:
        highest = highest_tried_dose(state)
        if highest == 0:
            dose = state.design.start_dose
        else:
            groups = _group_rows(rows, state.design.num_doses)
            dose = _recommend_grouped(groups, state.skeleton, state.design, highest, True)
    event = TrialEvent(now, len(state.patients) + 1, EventKind.ENROLLED, dose)
    return process_event(state, event, _rows=rows), dose


@dataclass(frozen=True)
class TrialMetrics:
    mtd: int
    enrolled: int
    added_patients: int
    duration: float
    dose_assignments: tuple
    dlt_count: int


def finalize_trial(state: TrialState):
    """Final MTD and per-trial summary once every patient has resolved."""
    if any(p.status is PatientStatus.PENDING for p in state.patients):
        raise TrialError("cannot finalize with pending patients")
    evaluable = sum(p.status in EVALUABLE_TERMINAL for p in state.patients)
    if evaluable != state.design.sample_size:
        raise TrialError(
            f"evaluable count {evaluable} != sample size {state.design.sample_size}"
        )
    resolution = max(p.resolved_time for p in state.patients)
    rows = _snapshot_rows(state, resolution)
    groups = _group_rows(rows, state.design.num_doses)
    mtd = _recommend_grouped(
        groups, state.skeleton, state.design, highest_tried_dose(state), False
    )
    counts = [0] * state.design.num_doses
    for p in state.patients:
        counts[p.dose - 1] += 1
    metrics = TrialMetrics(
        mtd=mtd,
        enrolled=len(state.patients),
        added_patients=len(state.patients) - state.design.sample_size,
        duration=resolution - min(p.enroll_time for p in state.patients),
        dose_assignments=tuple(counts),
        dlt_count=sum(p.status is PatientStatus.DLT for p in state.patients),
    )
    return mtd, metrics
