/** View-model construction: one lane per patient, grouped by dose level.
 *
 * Lanes render follow-up that the estimator uses as solid up to
 * `includedUntil`, and the remaining observed-but-excluded span dotted.
 * The model is a pure translation of the GET /state payload; every number
 * shown in the UI originates from the service.
 */

import type { PatientPayload, StatePayload } from "./types.js";

export class ModelError extends Error {}

export interface Lane {
  patientId: number;
  dose: number;
  start: number;
  end: number;
  includedUntil: number;
  status: string;
  evaluability: string;
  dlt: boolean;
  pending: boolean;
  excluded: boolean;
  frozenWeight: number | null;
  phiMark: number;
}

export interface DoseBand {
  dose: number;
  lanes: Lane[];
}

export interface TimelineViewModel {
  trialId: string;
  strategy: string;
  clock: number;
  weeks: number;
  window: number;
  phiWindow: number;
  bands: DoseBand[];
  banner: {
    dose: number;
    betaHat: number;
    probCurve: number[];
    enrollmentOpen: boolean;
    evaluable: number;
    pending: number;
    unevaluable: number;
    sampleSize: number;
  };
}

function laneOf(p: PatientPayload, phiWindow: number): Lane {
  if (
    typeof p.patient_id !== "number" ||
    typeof p.enroll_time !== "number" ||
    typeof p.dose !== "number" ||
    typeof p.end_time !== "number"
  ) {
    throw new ModelError(`malformed patient record ${JSON.stringify(p)}`);
  }
  return {
    patientId: p.patient_id,
    dose: p.dose,
    start: p.enroll_time,
    end: p.end_time,
    includedUntil: Math.min(p.included_until, p.end_time),
    status: p.status,
    evaluability: p.evaluability,
    dlt: p.status === "dlt",
    pending: p.status === "pending",
    excluded: !p.included,
    frozenWeight: p.frozen_weight,
    phiMark: p.enroll_time + phiWindow,
  };
}

export function buildTimeline(state: StatePayload): TimelineViewModel {
  if (!state || !Array.isArray(state.patients) || !state.design) {
    throw new ModelError("state payload missing patients or design");
  }
  if (!state.recommendation || typeof state.recommendation.dose !== "number") {
    throw new ModelError("state payload missing recommendation");
  }
  const lanes = state.patients.map((p) => laneOf(p, state.phi_window));
  const bands: DoseBand[] = [];
  for (let dose = 1; dose <= state.design.num_doses; dose++) {
    bands.push({ dose, lanes: lanes.filter((l) => l.dose === dose) });
  }
  const horizon = Math.max(
    state.clock,
    ...lanes.map((l) => l.end),
    state.design.window
  );
  return {
    trialId: state.trial_id,
    strategy: state.strategy,
    clock: state.clock,
    weeks: Math.ceil(horizon),
    window: state.design.window,
    phiWindow: state.phi_window,
    bands,
    banner: {
      dose: state.recommendation.dose,
      betaHat: state.recommendation.beta_hat,
      probCurve: state.recommendation.prob_curve,
      enrollmentOpen: state.enrollment_open,
      evaluable: state.evaluable,
      pending: state.pending,
      unevaluable: state.unevaluable,
      sampleSize: state.design.sample_size,
    },
  };
}

/** Client-side validation mirroring the engine's event preconditions. */
export function validateEventForm(
  state: StatePayload,
  form: { time: number; patient_id: number; kind: string }
): string | null {
  const patient = state.patients.find((p) => p.patient_id === form.patient_id);
  if (!patient) return `no patient ${form.patient_id}`;
  if (patient.status !== "pending") {
    return `patient ${form.patient_id} already has a terminal event`;
  }
  if (!Number.isFinite(form.time)) return "event time must be a number";
  if (form.time < patient.enroll_time) {
    return "event time precedes the patient's enrollment";
  }
  if (form.time < state.clock) {
    return `event time precedes already-recorded events (clock at ${state.clock})`;
  }
  return null;
}
