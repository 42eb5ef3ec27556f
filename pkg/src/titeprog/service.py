"""HTTP conduct service for running a live trial.

Each trial is persisted as an append-only line-delimited event log plus a
small meta file; derived state is always the fold of the log, so killing and
restarting the service reproduces the exact trial state. Writes to one trial
are serialized behind a per-trial lock; reads see a consistent immutable
state snapshot. Event times are trial weeks supplied by the client; the
service never consults the wall clock for statistics.
"""

import json
import threading
import uuid
from dataclasses import asdict, dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from .core import DesignConfig, Skeleton, build_skeleton, posterior_summary
from .engine import (
    EVALUABLE_TERMINAL,
    EventKind,
    PatientStatus,
    Strategy,
    TrialError,
    TrialState,
    _snapshot_rows,
    assign_next_patient,
    evaluability,
    highest_tried_dose,
    likelihood_snapshot,
    new_trial,
    process_event,
)
from .eventlog import EventLogError, event_from_record, event_to_line, read_log


@dataclass
class TrialResource:
    trial_id: str
    design: DesignConfig
    skeleton: Skeleton
    strategy: Strategy
    events: list = field(default_factory=list)
    state: TrialState = None
    lock: threading.Lock = field(default_factory=threading.Lock)


class TrialStore:
    """In-memory registry of trials, optionally backed by a directory."""

    def __init__(self, root=None):
        self.root = Path(root) if root is not None else None
        self._trials: dict[str, TrialResource] = {}
        self._registry_lock = threading.Lock()
        if self.root is not None:
            self.root.mkdir(parents=True, exist_ok=True)
            self._load_existing()

    @property
    def persistent(self) -> bool:
        return self.root is not None

    def _meta_path(self, trial_id: str) -> Path:
        return self.root / f"{trial_id}.meta.json"

    def _log_path(self, trial_id: str) -> Path:
        return self.root / f"{trial_id}.events.jsonl"

    def _load_existing(self) -> None:
        for meta_path in sorted(self.root.glob("*.meta.json")):
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
            design = DesignConfig(**meta["design"])
            skeleton = Skeleton(
                tuple(meta["skeleton"]), design.target, design.halfwidth,
                design.prior_mtd,
            )
            resource = TrialResource(
                trial_id=meta["trial_id"],
                design=design,
                skeleton=skeleton,
                strategy=Strategy(meta["strategy"]),
                state=new_trial(design, skeleton, Strategy(meta["strategy"])),
            )
            log_path = self._log_path(resource.trial_id)
            if log_path.exists():
                for event in read_log(log_path):
                    resource.state = process_event(resource.state, event)
                    resource.events.append(event)
            self._trials[resource.trial_id] = resource

    def create(self, design: DesignConfig, strategy: Strategy, skeleton: Skeleton) -> TrialResource:
        trial_id = uuid.uuid4().hex[:12]
        resource = TrialResource(
            trial_id=trial_id,
            design=design,
            skeleton=skeleton,
            strategy=strategy,
            state=new_trial(design, skeleton, strategy),
        )
        with self._registry_lock:
            self._trials[trial_id] = resource
        if self.persistent:
            meta = {
                "trial_id": trial_id,
                "design": asdict(design),
                "strategy": strategy.value,
                "skeleton": list(skeleton.probs),
            }
            self._meta_path(trial_id).write_text(
                json.dumps(meta, indent=2) + "\n", encoding="utf-8"
            )
            self._log_path(trial_id).touch()
        return resource

    def get(self, trial_id: str) -> TrialResource:
        try:
            return self._trials[trial_id]
        except KeyError:
            raise HTTPException(404, f"no trial {trial_id!r}") from None

    def commit(self, resource: TrialResource, event, new_state: TrialState) -> None:
        """Persist one applied event; caller holds the trial lock."""
        if self.persistent:
            with open(self._log_path(resource.trial_id), "a", encoding="utf-8") as fh:
                fh.write(event_to_line(event) + "\n")
                fh.flush()
        resource.events.append(event)
        resource.state = new_state


class DesignModel(BaseModel):
    num_doses: int = 5
    target: float = 0.25
    window: float = 8.0
    sample_size: int = 24
    phi: float = 0.5
    start_dose: int = 1
    prior_sd: float = DesignConfig.__dataclass_fields__["prior_sd"].default
    halfwidth: float = 0.10
    prior_mtd: int = 3
    accrual_interval: float = 4.0


class CreateTrialRequest(BaseModel):
    design: DesignModel = Field(default_factory=DesignModel)
    strategy: str = "C"
    skeleton: list[float] | None = None


class EnrollRequest(BaseModel):
    time: float
    dose: int | None = None


class EventRequest(BaseModel):
    time: float
    patient_id: int
    kind: str
    dose: int | None = None


class PreviewRequest(BaseModel):
    event: EventRequest | None = None


def _status_summary(state: TrialState) -> dict:
    evaluable = sum(p.status in EVALUABLE_TERMINAL for p in state.patients)
    pending = sum(p.status is PatientStatus.PENDING for p in state.patients)
    unevaluable = sum(
        p.status is PatientStatus.PROGRESSED_UNEVALUABLE for p in state.patients
    )
    return {
        "clock": state.clock,
        "enrolled": len(state.patients),
        "evaluable": evaluable,
        "pending": pending,
        "unevaluable": unevaluable,
        "enrollment_open": state.enrollment_open,
    }


def _state_at(resource: TrialResource, at_time: float | None) -> TrialState:
    state = resource.state
    if at_time is None or state is None or at_time >= state.clock:
        return state
    truncated = new_trial(resource.design, resource.skeleton, resource.strategy)
    for event in resource.events:
        if event.time > at_time:
            break
        truncated = process_event(truncated, event)
    return truncated


def _recommendation_payload(resource: TrialResource, at_time: float | None) -> dict:
    state = _state_at(resource, at_time)
    now = state.clock if at_time is None else max(at_time, state.clock)
    observations = likelihood_snapshot(state, now)
    summary = posterior_summary(
        observations, resource.skeleton, resource.design,
        highest_tried_dose(state), escalating=True,
    )
    included = {
        pid: (dose, tox, weight)
        for pid, dose, tox, weight in _snapshot_rows(state, now)
    }
    weights = []
    for p in state.patients:
        row = included.get(p.patient_id)
        weights.append({
            "patient_id": p.patient_id,
            "dose": p.dose,
            "tox": bool(row and row[1]),
            "weight": row[2] if row else 0.0,
            "included": row is not None,
        })
    return {
        "at_time": now,
        "dose": summary.recommended,
        "beta_hat": summary.beta_hat,
        "prob_curve": list(summary.prob_curve),
        "weights": weights,
    }


def _patient_payload(state: TrialState, design: DesignConfig, strategy: Strategy) -> list:
    window = design.window
    rows = {pid: w for pid, _, _, w in _snapshot_rows(state, state.clock)}
    payload = []
    for p in state.patients:
        if p.status is PatientStatus.PENDING:
            end = min(state.clock, p.enroll_time + window)
        else:
            end = p.resolved_time
        weight = rows.get(p.patient_id, 0.0)
        if p.status is PatientStatus.DLT:
            included_until = p.resolved_time
        else:
            included_until = p.enroll_time + weight * window
        payload.append({
            "patient_id": p.patient_id,
            "dose": p.dose,
            "enroll_time": p.enroll_time,
            "status": p.status.value,
            "evaluability": evaluability(
                p, 0.0 if strategy is Strategy.A else design.phi, window
            ).value,
            "tox_time": p.tox_time,
            "prog_time": p.prog_time,
            "resolved_time": p.resolved_time,
            "end_time": end,
            "weight": weight,
            "included": p.patient_id in rows,
            "included_until": included_until,
            "frozen_weight": p.frozen_weight,
        })
    return payload


def create_app(store: TrialStore) -> FastAPI:
    app = FastAPI(title="titeprog conduct service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.store = store

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "trials": len(store._trials)}

    @app.post("/trials", status_code=201)
    def create_trial(req: CreateTrialRequest):
        try:
            design = DesignConfig(**req.design.model_dump())
            strategy = Strategy(req.strategy)
        except ValueError as exc:
            raise HTTPException(400, str(exc)) from None
        try:
            if req.skeleton is not None:
                skeleton = Skeleton(
                    tuple(req.skeleton), design.target, design.halfwidth,
                    design.prior_mtd,
                )
            else:
                skeleton = build_skeleton(
                    design.target, design.halfwidth, design.prior_mtd,
                    design.num_doses,
                )
        except ValueError as exc:
            raise HTTPException(400, f"bad skeleton: {exc}") from None
        resource = store.create(design, strategy, skeleton)
        return {
            "trial_id": resource.trial_id,
            "strategy": strategy.value,
            "skeleton": list(skeleton.probs),
            "recommendation": _recommendation_payload(resource, None),
        }

    @app.post("/trials/{trial_id}/patients", status_code=201)
    def enroll_patient(trial_id: str, req: EnrollRequest):
        resource = store.get(trial_id)
        with resource.lock:
            try:
                new_state, dose = assign_next_patient(
                    resource.state, req.time, dose_override=req.dose
                )
            except TrialError as exc:
                raise HTTPException(409, str(exc)) from None
            patient_id = len(new_state.patients)
            event_record = {
                "time": req.time, "patient_id": patient_id,
                "kind": EventKind.ENROLLED.value, "dose": dose,
            }
            store.commit(resource, event_from_record(event_record), new_state)
        return {
            "patient_id": patient_id,
            "dose": dose,
            "time": req.time,
            "weights_used": [
                {"patient_id": pid, "weight": w}
                for pid, w in new_state.assignment_log[-1].weights
            ],
            **_status_summary(new_state),
        }

    @app.post("/trials/{trial_id}/events")
    def post_event(trial_id: str, req: EventRequest):
        resource = store.get(trial_id)
        try:
            event = event_from_record(req.model_dump())
        except EventLogError as exc:
            raise HTTPException(422, str(exc)) from None
        if event.kind is EventKind.ENROLLED:
            raise HTTPException(422, "use POST /trials/{id}/patients to enroll")
        with resource.lock:
            known = any(
                p.patient_id == event.patient_id for p in resource.state.patients
            )
            if not known:
                raise HTTPException(404, f"no patient {event.patient_id}")
            try:
                new_state = process_event(resource.state, event)
            except TrialError as exc:
                raise HTTPException(409, str(exc)) from None
            store.commit(resource, event, new_state)
            patient = new_state.patients[event.patient_id - 1]
        return {
            "patient_id": patient.patient_id,
            "status": patient.status.value,
            "frozen_weight": patient.frozen_weight,
            **_status_summary(new_state),
        }

    @app.get("/trials/{trial_id}/recommendation")
    def get_recommendation(trial_id: str, at_time: float | None = None):
        resource = store.get(trial_id)
        with resource.lock:
            return _recommendation_payload(resource, at_time)

    @app.post("/trials/{trial_id}/recommendation/preview")
    def preview_recommendation(trial_id: str, req: PreviewRequest):
        resource = store.get(trial_id)
        with resource.lock:
            current = _recommendation_payload(resource, None)
            state = resource.state
            if req.event is not None:
                try:
                    event = event_from_record(req.event.model_dump())
                    state = process_event(state, event)
                except (EventLogError, TrialError) as exc:
                    raise HTTPException(409, str(exc)) from None
            observations = likelihood_snapshot(state, state.clock)
            summary = posterior_summary(
                observations, resource.skeleton, resource.design,
                highest_tried_dose(state), escalating=True,
            )
        return {
            "current": current,
            "preview": {
                "at_time": state.clock,
                "dose": summary.recommended,
                "beta_hat": summary.beta_hat,
                "prob_curve": list(summary.prob_curve),
            },
        }

    @app.get("/trials/{trial_id}/state")
    def get_state(trial_id: str):
        resource = store.get(trial_id)
        with resource.lock:
            state = resource.state
            return {
                "trial_id": resource.trial_id,
                "strategy": resource.strategy.value,
                "design": asdict(resource.design),
                "skeleton": list(resource.skeleton.probs),
                "phi_window": resource.design.phi * resource.design.window,
                **_status_summary(state),
                "patients": _patient_payload(state, resource.design, resource.strategy),
                "recommendation": _recommendation_payload(resource, None),
            }

    return app
