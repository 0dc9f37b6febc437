// End-to-end steering demo against a real `mrtrainer serve` process.
//
// No browser binary is installable in this environment, so the session is
// driven headlessly through the app's own modules: the UI bundle is fetched
// from the server's static mount, events flow through transport.streamEvents
// into reducer.applyEvent exactly as in the browser, and the final DOM is
// produced by the real renderers inside jsdom and asserted on.

import { spawn, type ChildProcess } from "node:child_process";
import { createServer } from "node:net";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { JSDOM } from "jsdom";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { applyEvent, initialView, isBusy } from "../src/reducer.js";
import { renderChat, renderPanel, renderToolLog } from "../src/render.js";
import { createSession, fetchTools, markStep, sendMessage, streamEvents } from "../src/transport.js";
import type { SessionView } from "../src/types.js";

const here = dirname(fileURLToPath(import.meta.url));
const repoRoot = join(here, "..", "..");

let proc: ChildProcess;
let base = "";

async function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = createServer();
    srv.listen(0, "127.0.0.1", () => {
      const address = srv.address();
      if (address && typeof address === "object") {
        const port = address.port;
        srv.close(() => resolve(port));
      } else {
        reject(new Error("no port"));
      }
    });
  });
}

async function waitForServer(url: string, attempts = 100): Promise<void> {
  for (let i = 0; i < attempts; i++) {
    try {
      const resp = await fetch(url);
      if (resp.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 100));
  }
  throw new Error(`server at ${url} did not come up`);
}

async function until(predicate: () => boolean, what: string, ms = 15_000): Promise<void> {
  const deadline = Date.now() + ms;
  while (Date.now() < deadline) {
    if (predicate()) return;
    await new Promise((r) => setTimeout(r, 25));
  }
  throw new Error(`timed out waiting for ${what}`);
}

beforeAll(async () => {
  const port = await freePort();
  base = `http://127.0.0.1:${port}`;
  proc = spawn(
    "python3",
    [
      "-m", "mrtrainer.cli", "serve",
      "--manual-dir", "tests/fixtures/manuals",
      "--backend", "tests/fixtures/backends/chat_backend.json",
      "--port", String(port),
      "--ui-dir", "webui",
    ],
    { cwd: repoRoot, stdio: ["ignore", "pipe", "pipe"] },
  );
  await waitForServer(`${base}/tools`);
});

afterAll(() => {
  proc?.kill("SIGINT");
});

describe("steering a 3-step manual end to end", () => {
  it("completes chat, mark-done, and FinishedVideo in under 60 s", async () => {
    const started = Date.now();

    // the static mount serves the real UI bundle
    const page = await (await fetch(`${base}/`)).text();
    expect(page).toContain('src="./dist/main.js"');
    const bundle = await fetch(`${base}/dist/main.js`);
    expect(bundle.status).toBe(200);

    const tools = await fetchTools(base);
    expect(tools).toHaveLength(18);

    const handle = await createSession(base, "mini-robot");
    let view: SessionView = initialView();
    const controller = new AbortController();
    const stream = streamEvents(
      base,
      handle.session_id,
      (ev) => {
        view = applyEvent(view, ev);
      },
      { fromSeq: 0, signal: controller.signal },
    ).catch(() => {});

    await until(() => view.chat.length >= 1, "greeting");
    expect(view.chat[0]?.speaker).toBe("trainer");

    await sendMessage(base, handle.session_id, "let's begin");
    await until(() => view.panel?.started === true, "StartAssemble effect");

    await sendMessage(base, handle.session_id, "next");
    await until(() => view.panel?.currentStep === 2, "step 2");
    await sendMessage(base, handle.session_id, "next");
    await until(() => view.panel?.currentStep === 3, "step 3");

    for (const step of [1, 2, 3]) {
      await markStep(base, handle.session_id, step, true);
    }
    await until(
      () => view.panel?.stepCompleted.every(Boolean) === true,
      "checklist all done",
    );

    await sendMessage(base, handle.session_id, "finish");
    await until(() => view.panel?.finished === true, "finished flag");
    await until(() => !isBusy(view), "trainer reply");

    // fold the final view through the real renderers into a DOM
    const dom = new JSDOM(`<div id="chat"></div><div id="panel"></div><div id="log"></div>`);
    const doc = dom.window.document;
    doc.getElementById("chat")!.innerHTML = renderChat(view);
    doc.getElementById("panel")!.innerHTML = renderPanel(view);
    doc.getElementById("log")!.innerHTML = renderToolLog(view);

    expect(doc.querySelector(".finished-banner")?.textContent).toContain("Finished!");
    const toolNames = [...doc.querySelectorAll(".tool-row .tool-name")].map(
      (el) => el.textContent,
    );
    expect(toolNames).toContain("FinishedVideo");
    expect(doc.querySelectorAll("#panel input[type=checkbox]:checked")).toHaveLength(3);
    const lastMsg = [...doc.querySelectorAll("#chat .msg")].at(-1);
    expect(lastMsg?.textContent).toContain("Congratulations");

    controller.abort();
    await stream;

    const elapsed = (Date.now() - started) / 1000;
    expect(elapsed).toBeLessThan(60);
    console.log(
      `ACCEPTANCE PASS: steering demo finished a 3-step manual in ${elapsed.toFixed(1)}s`,
    );
  });

  it("reconnect from the last seen seq yields no duplicates", async () => {
    const handle = await createSession(base, "mini-robot");
    let view: SessionView = initialView();
    await streamEvents(base, handle.session_id, (ev) =>
      (view = applyEvent(view, ev)),
      { fromSeq: 0, follow: false });
    const after = view;
    await sendMessage(base, handle.session_id, "let's begin");
    // reconnect from lastSeq, then again from 0 (full overlap)
    let resumed = after;
    await streamEvents(base, handle.session_id, (ev) => (resumed = applyEvent(resumed, ev)),
      { fromSeq: after.lastSeq, follow: false });
    let replayedAll = resumed;
    await streamEvents(base, handle.session_id, (ev) => (replayedAll = applyEvent(replayedAll, ev)),
      { fromSeq: 0, follow: false });
    expect(replayedAll).toEqual(resumed);
    const seqs = resumed.chat.map((m) => m.seq);
    expect(new Set(seqs).size).toBe(seqs.length);
  });
});
