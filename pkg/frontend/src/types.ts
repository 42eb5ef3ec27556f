/** Wire types mirroring the conduct-service JSON payloads. */

export interface DesignPayload {
  num_doses: number;
  target: number;
  window: number;
  sample_size: number;
  phi: number;
  start_dose: number;
  prior_sd: number;
  halfwidth: number;
  prior_mtd: number;
  accrual_interval: number;
}

export interface PatientPayload {
  patient_id: number;
  dose: number;
  enroll_time: number;
  status: string;
  evaluability: string;
  tox_time: number | null;
  prog_time: number | null;
  resolved_time: number | null;
  end_time: number;
  weight: number;
  included: boolean;
  included_until: number;
  frozen_weight: number | null;
}

export interface RecommendationPayload {
  at_time: number;
  dose: number;
  beta_hat: number;
  prob_curve: number[];
  weights?: Array<{
    patient_id: number;
    dose: number;
    tox: boolean;
    weight: number;
    included: boolean;
  }>;
}

export interface StatePayload {
  trial_id: string;
  strategy: string;
  design: DesignPayload;
  skeleton: number[];
  phi_window: number;
  clock: number;
  enrolled: number;
  evaluable: number;
  pending: number;
  unevaluable: number;
  enrollment_open: boolean;
  patients: PatientPayload[];
  recommendation: RecommendationPayload;
}

export interface PreviewPayload {
  current: RecommendationPayload;
  preview: RecommendationPayload;
}

export interface EventForm {
  time: number;
  patient_id: number;
  kind: "dlt" | "progression" | "window_complete";
}
