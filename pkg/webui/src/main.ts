// Browser bootstrap: one store per tab, one stream subscription per session.
// State flows one way: server events -> reducer -> render.

import { addPendingEcho, applyEvent, initialView, isBusy, setConnection } from "./reducer.js";
import { renderChat, renderConnection, renderErrorBanner, renderPanel, renderToolLog } from "./render.js";
import { createSession, fetchManuals, markStep, sendMessage, streamEvents } from "./transport.js";
import type { SessionView } from "./types.js";

const base = ""; // same origin; the service serves this page

type Store = {
  view: SessionView;
  update(fn: (v: SessionView) => SessionView): void;
};

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing mount point #${id}`);
  return el;
}

function render(view: SessionView): void {
  $("connection").innerHTML = renderConnection(view);
  $("error").innerHTML = renderErrorBanner(view);
  $("chat").innerHTML = renderChat(view);
  $("tool-log").innerHTML = renderToolLog(view);
  $("panel").innerHTML = renderPanel(view);
  const input = $("message") as HTMLInputElement;
  const button = $("send") as HTMLButtonElement;
  const busy = isBusy(view);
  button.disabled = busy || !input.value.trim();
  $("queued").textContent = queue.length ? `${queue.length} queued` : "";
  $("chat").scrollTop = $("chat").scrollHeight;
}

const store: Store = {
  view: initialView(),
  update(fn) {
    this.view = fn(this.view);
    render(this.view);
  },
};

const queue: string[] = [];

async function flushQueue(sessionId: string): Promise<void> {
  while (queue.length && !isBusy(store.view)) {
    const text = queue.shift()!;
    store.update((v) => addPendingEcho(v, text));
    await sendMessage(base, sessionId, text);
  }
}

async function subscribe(sessionId: string): Promise<void> {
  for (;;) {
    store.update((v) => setConnection(v, v.lastSeq ? "reconnecting" : "connecting"));
    try {
      await streamEvents(
        base,
        sessionId,
        (ev) => {
          store.update((v) => applyEvent(v, ev));
          void flushQueue(sessionId);
        },
        { fromSeq: store.view.lastSeq },
      );
      store.update((v) => setConnection(v, "reconnecting"));
    } catch {
      store.update((v) => setConnection(v, "reconnecting"));
    }
    await new Promise((resolve) => setTimeout(resolve, 1000));
  }
}

async function boot(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  let sessionId = params.get("session");
  try {
    if (!sessionId) {
      const manualId = params.get("manual") ?? (await fetchManuals(base))[0]?.id;
      if (!manualId) throw new Error("no manuals available");
      const handle = await createSession(base, manualId);
      sessionId = handle.session_id;
      const url = new URL(window.location.href);
      url.searchParams.set("session", sessionId);
      window.history.replaceState(null, "", url.toString());
    }
  } catch (err) {
    store.update((v) => ({ ...v, errorBanner: String(err), connection: "error" }));
    return;
  }

  const sid = sessionId;
  store.update((v) => setConnection(v, "live"));

  $("send").addEventListener("click", () => {
    const input = $("message") as HTMLInputElement;
    const text = input.value.trim();
    if (!text) return;
    input.value = "";
    if (isBusy(store.view)) {
      queue.push(text);
      render(store.view);
      return;
    }
    store.update((v) => addPendingEcho(v, text));
    void sendMessage(base, sid, text);
  });
  ($("message") as HTMLInputElement).addEventListener("input", () => render(store.view));
  ($("message") as HTMLInputElement).addEventListener("keydown", (ev) => {
    if ((ev as KeyboardEvent).key === "Enter") $("send").click();
  });
  $("panel").addEventListener("change", (ev) => {
    const target = ev.target as HTMLInputElement;
    if (target.dataset && target.dataset.step) {
      void markStep(base, sid, Number(target.dataset.step), target.checked);
    }
  });

  void subscribe(sid);
}

if (typeof document !== "undefined" && document.getElementById("chat")) {
  void boot();
}
