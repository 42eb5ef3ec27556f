/** DOM wiring: connect forms and panels to the service.
 *
 * The page is stateless beyond the server: every refresh re-renders from
 * GET /state, and a reload with the same trial id in the URL hash rebuilds
 * the exact same view.
 */

import { ApiError, ConductApi } from "./api.js";
import { buildTimeline, ModelError, validateEventForm } from "./model.js";
import { renderErrorPanel, renderTimeline } from "./timeline.js";
import { comparePreview } from "./whatif.js";
import type { EventForm, StatePayload } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function fmtPct(p: number): string {
  return (100 * p).toFixed(1) + "%";
}

export class App {
  api: ConductApi;
  trialId: string | null = null;
  state: StatePayload | null = null;

  constructor(baseUrl: string) {
    this.api = new ConductApi(baseUrl);
  }

  async init(): Promise<void> {
    el<HTMLFormElement>("create-form").addEventListener("submit", (e) => {
      e.preventDefault();
      void this.createTrial();
    });
    el<HTMLFormElement>("open-form").addEventListener("submit", (e) => {
      e.preventDefault();
      const id = el<HTMLInputElement>("open-id").value.trim();
      if (id) void this.openTrial(id);
    });
    el<HTMLFormElement>("enroll-form").addEventListener("submit", (e) => {
      e.preventDefault();
      void this.enroll();
    });
    el<HTMLFormElement>("event-form").addEventListener("submit", (e) => {
      e.preventDefault();
      void this.submitEvent();
    });
    el<HTMLFormElement>("whatif-form").addEventListener("submit", (e) => {
      e.preventDefault();
      void this.whatIf();
    });
    const fromHash = window.location.hash.replace(/^#/, "");
    if (fromHash) await this.openTrial(fromHash);
  }

  flash(message: string, isError = false): void {
    const node = el<HTMLDivElement>("flash");
    node.textContent = message;
    node.className = isError ? "flash error" : "flash";
  }

  async createTrial(): Promise<void> {
    const strategy = el<HTMLSelectElement>("create-strategy").value;
    const design = {
      sample_size: Number(el<HTMLInputElement>("create-n").value),
      phi: Number(el<HTMLInputElement>("create-phi").value),
      target: Number(el<HTMLInputElement>("create-target").value),
      halfwidth: Number(el<HTMLInputElement>("create-halfwidth").value),
    };
    try {
      const created = await this.api.createTrial(design, strategy);
      await this.openTrial(created.trial_id);
      this.flash(`created trial ${created.trial_id}`);
    } catch (err) {
      this.flash(String(err), true);
    }
  }

  async openTrial(trialId: string): Promise<void> {
    this.trialId = trialId;
    window.location.hash = trialId;
    await this.refresh();
  }

  async refresh(): Promise<void> {
    if (!this.trialId) return;
    try {
      this.state = await this.api.getState(this.trialId);
    } catch (err) {
      el("timeline-panel").innerHTML = renderErrorPanel(String(err));
      return;
    }
    this.renderAll();
  }

  renderAll(): void {
    if (!this.state) return;
    try {
      const model = buildTimeline(this.state);
      el("timeline-panel").innerHTML = renderTimeline(model);
      const banner = model.banner;
      el("banner").innerHTML =
        `<strong>next dose: level ${banner.dose}</strong>` +
        ` &middot; slope ${banner.betaHat.toFixed(3)}` +
        ` &middot; evaluable ${banner.evaluable}/${banner.sampleSize}` +
        ` &middot; pending ${banner.pending}, unevaluable ${banner.unevaluable}` +
        ` &middot; enrollment ${banner.enrollmentOpen ? "open" : "closed"}`;
      el("curve").innerHTML = banner.probCurve
        .map((p, i) => `<span>d${i + 1}: ${fmtPct(p)}</span>`)
        .join(" ");
      el("trial-label").textContent =
        `${this.state.trial_id} (strategy ${this.state.strategy})`;
    } catch (err) {
      if (err instanceof ModelError) {
        el("timeline-panel").innerHTML = renderErrorPanel(err.message);
      } else {
        throw err;
      }
    }
  }

  async enroll(): Promise<void> {
    if (!this.trialId) return;
    const time = Number(el<HTMLInputElement>("enroll-time").value);
    try {
      const result = await this.api.enrollPatient(this.trialId, time);
      this.flash(`patient ${result.patient_id} assigned dose ${result.dose}`);
      await this.refresh();
    } catch (err) {
      this.flash(String(err), true);
    }
  }

  private readEventForm(): EventForm {
    return {
      time: Number(el<HTMLInputElement>("event-time").value),
      patient_id: Number(el<HTMLInputElement>("event-patient").value),
      kind: el<HTMLSelectElement>("event-kind").value as EventForm["kind"],
    };
  }

  async submitEvent(): Promise<void> {
    if (!this.trialId || !this.state) return;
    const form = this.readEventForm();
    const problem = validateEventForm(this.state, form);
    if (problem) {
      this.flash(problem, true);
      return;
    }
    try {
      const wasOpen = this.state.enrollment_open;
      const result = (await this.api.postEvent(this.trialId, form)) as {
        enrollment_open: boolean;
        status: string;
      };
      let note = `patient ${form.patient_id}: ${result.status.replace(/_/g, " ")}`;
      if (!wasOpen && result.enrollment_open) note += " — enrollment reopened";
      this.flash(note);
      await this.refresh();
    } catch (err) {
      // surface server rejection verbatim
      this.flash(err instanceof ApiError ? err.message : String(err), true);
    }
  }

  async whatIf(): Promise<void> {
    if (!this.trialId) return;
    const form: EventForm = {
      time: Number(el<HTMLInputElement>("whatif-time").value),
      patient_id: Number(el<HTMLInputElement>("whatif-patient").value),
      kind: el<HTMLSelectElement>("whatif-kind").value as EventForm["kind"],
    };
    try {
      const payload = await this.api.previewEvent(this.trialId, form);
      const cmp = comparePreview(payload);
      el("whatif-result").innerHTML =
        `<span class="${cmp.direction}">${cmp.text}</span>` +
        ` (current ${cmp.currentDose}, hypothetical ${cmp.previewDose})`;
    } catch (err) {
      el("whatif-result").textContent = String(err);
    }
  }
}

const baseUrl =
  new URLSearchParams(window.location.search).get("api") ?? "http://127.0.0.1:8000";
const app = new App(baseUrl);
void app.init();
