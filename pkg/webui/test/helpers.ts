import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import type { SessionEvent } from "../src/types.js";

const here = dirname(fileURLToPath(import.meta.url));

export function loadFixtureEvents(): SessionEvent[] {
  const raw = readFileSync(join(here, "fixtures", "session-events.jsonl"), "utf-8");
  return raw
    .split("\n")
    .filter((line) => line.trim())
    .map((line) => JSON.parse(line) as SessionEvent);
}

export function fixturePath(name: string): string {
  return join(here, "fixtures", name);
}
