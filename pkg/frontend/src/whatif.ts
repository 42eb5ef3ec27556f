/** What-if panel logic: side-by-side comparison of the current and the
 * hypothetical recommendation. Pure; the numbers come from the service's
 * preview endpoint, which never mutates the trial log. */

import type { PreviewPayload } from "./types.js";

export interface WhatIfComparison {
  currentDose: number;
  previewDose: number;
  delta: number;
  direction: "unchanged" | "deescalates" | "escalates";
  text: string;
}

export function comparePreview(payload: PreviewPayload): WhatIfComparison {
  const currentDose = payload.current.dose;
  const previewDose = payload.preview.dose;
  const delta = previewDose - currentDose;
  const direction =
    delta === 0 ? "unchanged" : delta < 0 ? "deescalates" : "escalates";
  const text =
    direction === "unchanged"
      ? `recommendation stays at dose ${currentDose}`
      : `recommendation moves from dose ${currentDose} to ${previewDose}`;
  return { currentDose, previewDose, delta, direction, text };
}

/** A hypothetical full-weight toxicity must never raise the recommendation. */
export function violatesToxicityMonotonicity(
  payload: PreviewPayload,
  hypotheticalKind: string
): boolean {
  return hypotheticalKind === "dlt" && payload.preview.dose > payload.current.dose;
}
