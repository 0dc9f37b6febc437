// Pure fold of session events into the view model. The server's event log is
// the single source of truth: replaying the same events always produces the
// same view, and events at or below lastSeq are ignored, which makes
// reconnect replays idempotent (no duplicate chat rows).

import type {
  AssemblyPanel,
  ChatMessage,
  Connection,
  SessionEvent,
  SessionView,
  ToolLogRow,
} from "./types.js";

export function initialView(): SessionView {
  return {
    sessionId: null,
    connection: "idle",
    lastSeq: 0,
    chat: [],
    pendingEcho: [],
    toolLog: [],
    panel: null,
    errorBanner: null,
  };
}

function panelFromState(payload: Record<string, any>): AssemblyPanel {
  return {
    sessionId: String(payload.session_id),
    manualId: String(payload.manual_id),
    currentStep: Number(payload.current_step),
    totalSteps: Number(payload.total_steps),
    remainingSteps: Number(payload.remaining_steps),
    started: Boolean(payload.started),
    finished: Boolean(payload.finished),
    exploded: Boolean(payload.exploded),
    zoom: Number(payload.zoom),
    rotation: String(payload.rotation),
    highlights: [...(payload.highlights ?? [])].map(String),
    stepCompleted: [...(payload.step_completed ?? [])].map(Boolean),
    imageRef: payload.image_ref == null ? null : String(payload.image_ref),
  };
}

function callSummary(payload: Record<string, any>): string {
  const args = payload.call?.args ?? {};
  return Object.keys(args).length ? JSON.stringify(args) : "";
}

function resultRow(ev: SessionEvent, kind: "response" | "vlm"): ToolLogRow {
  const response = ev.payload.response ?? {};
  let summary = String(response.text ?? "");
  if (kind === "vlm" && response.data && response.data.box) {
    summary = `${response.data.label} @ (${(response.data.box as number[]).join(", ")})`;
  }
  return {
    seq: ev.seq,
    kind,
    name: String(ev.payload.call?.name ?? "?"),
    ok: Boolean(response.ok),
    errorCode: (response.error_code ?? null) as string | null,
    summary,
  };
}

export function applyEvent(view: SessionView, ev: SessionEvent): SessionView {
  if (ev.seq <= view.lastSeq) {
    return view; // replayed or duplicate delivery
  }
  const next: SessionView = { ...view, lastSeq: ev.seq };
  switch (ev.type) {
    case "trainer_message": {
      const msg: ChatMessage = { seq: ev.seq, speaker: "trainer", text: String(ev.payload.text) };
      next.chat = [...view.chat, msg];
      return next;
    }
    case "trainee_message": {
      const text = String(ev.payload.text);
      const i = view.pendingEcho.indexOf(text);
      next.pendingEcho = i < 0 ? view.pendingEcho : view.pendingEcho.filter((_, j) => j !== i);
      next.chat = [...view.chat, { seq: ev.seq, speaker: "trainee", text }];
      return next;
    }
    case "tool_call": {
      const row: ToolLogRow = {
        seq: ev.seq,
        kind: "call",
        name: String(ev.payload.call?.name ?? "?"),
        ok: null,
        errorCode: null,
        summary: callSummary(ev.payload),
      };
      next.toolLog = [...view.toolLog, row];
      return next;
    }
    case "tool_response":
      next.toolLog = [...view.toolLog, resultRow(ev, "response")];
      return next;
    case "vlm_result":
      next.toolLog = [...view.toolLog, resultRow(ev, "vlm")];
      return next;
    case "state":
      next.panel = panelFromState(ev.payload);
      next.sessionId = next.panel.sessionId;
      return next;
    case "error":
      next.errorBanner = `${ev.payload.code ?? "Error"}`;
      return next;
    default:
      return next;
  }
}

export function applyEvents(view: SessionView, events: Iterable<SessionEvent>): SessionView {
  let out = view;
  for (const ev of events) {
    out = applyEvent(out, ev);
  }
  return out;
}

export function setConnection(view: SessionView, connection: Connection): SessionView {
  return view.connection === connection ? view : { ...view, connection };
}

export function addPendingEcho(view: SessionView, text: string): SessionView {
  return { ...view, pendingEcho: [...view.pendingEcho, text] };
}

// The agent is busy while the newest trainee message has no trainer reply yet.
export function isBusy(view: SessionView): boolean {
  let lastTrainer = 0;
  let lastTrainee = 0;
  for (const msg of view.chat) {
    if (msg.speaker === "trainer") lastTrainer = msg.seq;
    else lastTrainee = msg.seq;
  }
  return lastTrainee > lastTrainer || view.pendingEcho.length > 0;
}
