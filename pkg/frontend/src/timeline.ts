/** SVG swimlane renderer.
 *
 * Pure string generation so it is testable without a DOM: lanes sit in
 * horizontal dose bands (dose level on the y-axis), follow-up included in
 * the estimation is drawn solid, excluded follow-up dotted, DLTs annotated,
 * and each lane carries a tick at its evaluability threshold.
 */

import type { Lane, TimelineViewModel } from "./model.js";

const PX_PER_WEEK = 48;
const LANE_H = 22;
const BAND_PAD = 14;
const LEFT = 70;
const TOP = 26;

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function x(week: number): number {
  return LEFT + week * PX_PER_WEEK;
}

function laneSvg(lane: Lane, y: number): string {
  const parts: string[] = [];
  const solidEnd = Math.max(lane.start, Math.min(lane.includedUntil, lane.end));
  if (solidEnd > lane.start) {
    parts.push(
      `<line class="seg solid" data-patient="${lane.patientId}" ` +
        `x1="${x(lane.start)}" y1="${y}" x2="${x(solidEnd)}" y2="${y}" />`
    );
  }
  if (lane.end > solidEnd) {
    parts.push(
      `<line class="seg dotted" data-patient="${lane.patientId}" ` +
        `stroke-dasharray="2 4" ` +
        `x1="${x(solidEnd)}" y1="${y}" x2="${x(lane.end)}" y2="${y}" />`
    );
  }
  if (lane.phiMark <= lane.end) {
    parts.push(
      `<line class="phi-mark" x1="${x(lane.phiMark)}" y1="${y - 4}" ` +
        `x2="${x(lane.phiMark)}" y2="${y + 4}" />`
    );
  }
  if (lane.dlt) {
    parts.push(
      `<circle class="dlt-mark" cx="${x(lane.end)}" cy="${y}" r="4" />`,
      `<text class="dlt-label" x="${x(lane.end) + 6}" y="${y + 4}">DLT</text>`
    );
  }
  if (lane.pending) {
    parts.push(
      `<text class="pending-label" x="${x(lane.end) + 6}" y="${y + 4}">…</text>`
    );
  }
  const label = `#${lane.patientId}` + (lane.excluded ? " (excluded)" : "");
  parts.push(
    `<text class="lane-label" x="${x(lane.start)}" y="${y - 6}">${esc(label)}</text>`
  );
  return parts.join("\n");
}

export function renderTimeline(model: TimelineViewModel): string {
  const rows: string[] = [];
  let y = TOP;
  const bandLines: string[] = [];
  const laneParts: string[] = [];
  // highest dose on top, like a dose-level axis
  for (const band of [...model.bands].reverse()) {
    const bandTop = y;
    const height = Math.max(band.lanes.length, 1) * LANE_H + BAND_PAD;
    bandLines.push(
      `<text class="dose-label" x="8" y="${bandTop + height / 2}">dose ${band.dose}</text>`,
      `<line class="band-sep" stroke-dasharray="6 4" x1="${LEFT}" ` +
        `y1="${bandTop + height}" x2="${x(model.weeks)}" y2="${bandTop + height}" />`
    );
    band.lanes.forEach((lane, i) => {
      laneParts.push(laneSvg(lane, bandTop + BAND_PAD / 2 + (i + 0.5) * LANE_H));
    });
    y = bandTop + height;
  }
  const grid: string[] = [];
  for (let week = 0; week <= model.weeks; week++) {
    grid.push(
      `<line class="grid" x1="${x(week)}" y1="${TOP - 10}" x2="${x(week)}" y2="${y}" />`,
      `<text class="grid-label" x="${x(week)}" y="${y + 14}">${week}</text>`
    );
  }
  const width = x(model.weeks) + 60;
  const height = y + 30;
  return (
    `<svg class="timeline" viewBox="0 0 ${width} ${height}" ` +
    `width="${width}" height="${height}" xmlns="http://www.w3.org/2000/svg">\n` +
    grid.join("\n") +
    "\n" +
    bandLines.join("\n") +
    "\n" +
    laneParts.join("\n") +
    "\n</svg>"
  );
}

export function renderErrorPanel(message: string): string {
  return `<div class="error-panel">Cannot render trial state: ${esc(message)}</div>`;
}
