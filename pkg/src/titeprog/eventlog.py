"""Append-only event-log serialization.

One JSON record per line with stable field names (time, patient_id, kind,
dose). The same format is emitted by the simulator as trial traces and used
by the conduct service as its persistence layer, so a service can replay a
simulator trace and vice versa.
"""

import json
from pathlib import Path

from .core import DesignConfig, Skeleton
from .engine import EventKind, Strategy, TrialEvent, TrialState, new_trial, process_event


class EventLogError(Exception):
    """Malformed event-log content; carries the offending line number."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        super().__init__(message if lineno is None else f"line {lineno}: {message}")


def event_to_record(event: TrialEvent) -> dict:
    record = {"time": event.time, "patient_id": event.patient_id, "kind": event.kind.value}
    if event.dose is not None:
        record["dose"] = event.dose
    return record


def event_to_line(event: TrialEvent) -> str:
    return json.dumps(event_to_record(event), separators=(",", ":"))


def event_from_record(record: dict, lineno: int | None = None) -> TrialEvent:
    try:
        kind = EventKind(record["kind"])
        time = float(record["time"])
        patient_id = int(record["patient_id"])
    except (KeyError, ValueError, TypeError) as exc:
        raise EventLogError(f"bad event record: {exc}", lineno) from None
    dose = record.get("dose")
    if kind is EventKind.ENROLLED and dose is None:
        raise EventLogError("enrollment record lacks a dose", lineno)
    return TrialEvent(time, patient_id, kind, int(dose) if dose is not None else None)


def parse_line(line: str, lineno: int) -> TrialEvent:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise EventLogError(f"invalid JSON: {exc.msg}", lineno) from None
    if not isinstance(record, dict):
        raise EventLogError("event record must be a JSON object", lineno)
    return event_from_record(record, lineno)


def write_log(path, events, append: bool = False) -> None:
    mode = "a" if append else "w"
    with open(path, mode, encoding="utf-8") as fh:
        for event in events:
            fh.write(event_to_line(event) + "\n")


def read_log(path) -> list:
    events = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            events.append(parse_line(line, lineno))
    return events


def replay(
    design: DesignConfig, skeleton: Skeleton, strategy: Strategy, events
) -> TrialState:
    """Fold an event sequence into the trial state it denotes."""
    state = new_trial(design, skeleton, strategy)
    for event in events:
        state = process_event(state, event)
    return state


def replay_file(design, skeleton, strategy, path: Path) -> TrialState:
    return replay(design, skeleton, strategy, read_log(path))
