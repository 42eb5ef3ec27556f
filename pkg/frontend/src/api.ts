/** Thin fetch client for the conduct-service HTTP API. */

import type { EventForm, PreviewPayload, StatePayload } from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(detail);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(url, {
    headers: { "content-type": "application/json" },
    ...init,
  });
  const body = await resp.text();
  if (!resp.ok) {
    let detail = body;
    try {
      detail = JSON.parse(body).detail ?? body;
    } catch {
      // keep raw body
    }
    throw new ApiError(resp.status, String(detail));
  }
  return JSON.parse(body) as T;
}

export class ConductApi {
  constructor(public baseUrl: string) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  createTrial(design: Record<string, unknown>, strategy: string) {
    return request<{ trial_id: string }>(this.url("/trials"), {
      method: "POST",
      body: JSON.stringify({ design, strategy }),
    });
  }

  getState(trialId: string) {
    return request<StatePayload>(this.url(`/trials/${trialId}/state`));
  }

  enrollPatient(trialId: string, time: number) {
    return request<{ patient_id: number; dose: number }>(
      this.url(`/trials/${trialId}/patients`),
      { method: "POST", body: JSON.stringify({ time }) }
    );
  }

  postEvent(trialId: string, form: EventForm) {
    return request<Record<string, unknown>>(
      this.url(`/trials/${trialId}/events`),
      { method: "POST", body: JSON.stringify(form) }
    );
  }

  previewEvent(trialId: string, form: EventForm | null) {
    return request<PreviewPayload>(
      this.url(`/trials/${trialId}/recommendation/preview`),
      { method: "POST", body: JSON.stringify(form ? { event: form } : {}) }
    );
  }
}
