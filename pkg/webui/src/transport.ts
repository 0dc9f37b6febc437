// HTTP client for the session service. Uses only the documented endpoints:
//   POST /sessions, GET /sessions/{id}, POST /sessions/{id}/messages,
//   GET  /sessions/{id}/events?from_seq=, POST /sessions/{id}/steps/{n},
//   GET  /manuals, GET /tools
// The event stream is read as text/event-stream over a streaming fetch, so
// the same code runs in browsers and in node test drivers.

import type { ManualSummary, SessionEvent, SessionHandle } from "./types.js";

export class ServiceHttpError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

async function request(url: string, init?: RequestInit): Promise<any> {
  const resp = await fetch(url, init);
  const body = await resp.text();
  const json = body ? JSON.parse(body) : null;
  if (!resp.ok) {
    throw new ServiceHttpError(resp.status, json?.error ?? "HttpError", json?.message ?? body);
  }
  return json;
}

function post(url: string, payload: unknown): Promise<any> {
  return request(url, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(payload),
  });
}

export function fetchTools(base: string): Promise<{ name: string; description: string }[]> {
  return request(`${base}/tools`);
}

export function fetchManuals(base: string): Promise<ManualSummary[]> {
  return request(`${base}/manuals`);
}

export function createSession(base: string, manualId: string, chunkIndex = 0): Promise<SessionHandle> {
  return post(`${base}/sessions`, { manual_id: manualId, chunk_index: chunkIndex });
}

export function getSession(base: string, sessionId: string): Promise<SessionHandle> {
  return request(`${base}/sessions/${sessionId}`);
}

export function sendMessage(base: string, sessionId: string, text: string): Promise<{ accepted: boolean }> {
  return post(`${base}/sessions/${sessionId}/messages`, { text });
}

export function markStep(base: string, sessionId: string, step: number, done: boolean): Promise<unknown> {
  return post(`${base}/sessions/${sessionId}/steps/${step}`, { done });
}

// Parse one SSE frame ("id: ...\nevent: ...\ndata: {...}"); comments (lines
// starting with ":") and heartbeats yield null.
export function parseSseFrame(frame: string): SessionEvent | null {
  let data = "";
  for (const line of frame.split("\n")) {
    if (line.startsWith("data: ")) {
      data += line.slice(6);
    }
  }
  if (!data) {
    return null;
  }
  return JSON.parse(data) as SessionEvent;
}

export interface StreamOptions {
  fromSeq?: number;
  follow?: boolean;
  signal?: AbortSignal;
}

// Consume the event stream, invoking onEvent per decoded event. Resolves when
// the server ends the stream (follow=false) or the signal aborts; rejects on
// network failure so the caller can reconnect from its last seen seq.
export async function streamEvents(
  base: string,
  sessionId: string,
  onEvent: (ev: SessionEvent) => void,
  options: StreamOptions = {},
): Promise<void> {
  const fromSeq = options.fromSeq ?? 0;
  const follow = options.follow ?? true;
  const url = `${base}/sessions/${sessionId}/events?from_seq=${fromSeq}&follow=${follow}`;
  const resp = await fetch(url, { signal: options.signal });
  if (!resp.ok || !resp.body) {
    throw new ServiceHttpError(resp.status, "StreamError", `stream failed with ${resp.status}`);
  }
  const reader = resp.body.getReader();
  const decoder = new TextDecoder();
  let buffer = "";
  try {
    for (;;) {
      const { done, value } = await reader.read();
      if (done) {
        return;
      }
      buffer += decoder.decode(value, { stream: true });
      for (;;) {
        const cut = buffer.indexOf("\n\n");
        if (cut < 0) {
          break;
        }
        const frame = buffer.slice(0, cut);
        buffer = buffer.slice(cut + 2);
        const ev = parseSseFrame(frame);
        if (ev) {
          onEvent(ev);
        }
      }
    }
  } finally {
    reader.releaseLock();
  }
}
