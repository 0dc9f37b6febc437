// Pure HTML renderers over the view model; main.ts assigns the results to
// fixed mount points. Keeping these as string builders makes snapshotting
// and DOM-free testing trivial.

import { isBusy } from "./reducer.js";
import type { SessionView, ToolLogRow } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

export function renderConnection(view: SessionView): string {
  return `<span class="conn conn-${view.connection}">${view.connection}</span>`;
}

export function renderChat(view: SessionView): string {
  const rows = view.chat.map(
    (m) =>
      `<div class="msg msg-${m.speaker}" data-seq="${m.seq}">` +
      `<span class="who">${m.speaker === "trainer" ? "Trainer" : "You"}</span>` +
      `<span class="text">${escapeHtml(m.text)}</span></div>`,
  );
  for (const pending of view.pendingEcho) {
    rows.push(
      `<div class="msg msg-trainee msg-pending"><span class="who">You</span>` +
        `<span class="text">${escapeHtml(pending)}</span></div>`,
    );
  }
  if (isBusy(view)) {
    rows.push(`<div class="msg msg-busy">Trainer is working&hellip;</div>`);
  }
  return rows.join("\n");
}

function badge(row: ToolLogRow): string {
  if (row.kind === "call") {
    return `<span class="badge badge-call">call</span>`;
  }
  if (row.ok) {
    return `<span class="badge badge-ok">${row.kind === "vlm" ? "vlm" : "ok"}</span>`;
  }
  return `<span class="badge badge-err">${escapeHtml(row.errorCode ?? "error")}</span>`;
}

export function renderToolLog(view: SessionView): string {
  return view.toolLog
    .map(
      (row) =>
        `<div class="tool-row tool-${row.kind}" data-seq="${row.seq}">${badge(row)}` +
        `<span class="tool-name">${escapeHtml(row.name)}</span>` +
        `<span class="tool-summary">${escapeHtml(row.summary)}</span></div>`,
    )
    .join("\n");
}

export function renderPanel(view: SessionView): string {
  const p = view.panel;
  if (!p) {
    return `<div class="panel-empty">No session state yet.</div>`;
  }
  const checklist = p.stepCompleted
    .map((done, i) => {
      const n = i + 1;
      const current = n === p.currentStep ? " step-current" : "";
      return (
        `<label class="step-row${current}"><input type="checkbox" data-step="${n}" ` +
        `${done ? "checked" : ""}/> Step ${n}${n === p.currentStep ? " (current)" : ""}</label>`
      );
    })
    .join("\n");
  const highlights = p.highlights.length
    ? p.highlights.map((h) => `<span class="chip">${escapeHtml(h)}</span>`).join(" ")
    : "<em>none</em>";
  const finished = p.finished
    ? `<div class="finished-banner">Finished! The assembly video is playing.</div>`
    : "";
  const image = p.imageRef
    ? `<div class="step-image"><img src="/assets/${encodeURI(p.imageRef)}" ` +
      `alt="step ${p.currentStep}" ` +
      `onerror="this.style.display='none';this.nextElementSibling.style.display='inline'"/>` +
      `<span class="img-placeholder" style="display:none">no illustration</span></div>`
    : `<div class="step-image"><span class="img-placeholder">no illustration</span></div>`;
  return [
    image,
    `<div class="panel-grid">`,
    `<div>Step</div><div>${p.currentStep} / ${p.totalSteps} (${p.remainingSteps} remaining)</div>`,
    `<div>Started</div><div>${p.started ? "yes" : "no"}</div>`,
    `<div>Exploded</div><div>${p.exploded ? "yes" : "no"}</div>`,
    `<div>Zoom</div><div>${p.zoom.toFixed(2)}x</div>`,
    `<div>Rotation</div><div>${escapeHtml(p.rotation)}</div>`,
    `<div>Highlights</div><div>${highlights}</div>`,
    `</div>`,
    `<div class="checklist">${checklist}</div>`,
    finished,
  ].join("\n");
}

export function renderErrorBanner(view: SessionView): string {
  return view.errorBanner
    ? `<div class="error-banner">${escapeHtml(view.errorBanner)}</div>`
    : "";
}
