#!/usr/bin/env python3
"""Record the 40-event scripted session log used by the web UI tests.

Run from the repository root; rewrites webui/test/fixtures/session-events.jsonl.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from conftest import make_manual  # noqa: E402

from mrtrainer.backends import ScriptedLlm  # noqa: E402
from mrtrainer.service import SessionManager  # noqa: E402
from mrtrainer.vision import MockRule, MockVisionBackend  # noqa: E402


def tool_block(name: str, args: dict | None = None) -> str:
    return "```tool\n" + json.dumps({"name": name, "args": args or {}}) + "\n```"


SCRIPT = [
    tool_block("GetCurrentStep"), "We haven't started yet; say begin when ready.",
    tool_block("StartAssemble"), "Started! Step 1 of 3: find the grey torso base.",
    tool_block("APICallObjectRecognitionAR"),
    tool_block("GetRemainingStep"),
    "That is the torso base, and two steps follow this one.",
    tool_block("NextStep"), "Step 2 of 3: place the blue head plate.",
    tool_block("NextStep"), "Step 3 of 3: press in the antenna.",
    "Looks good to me, keep going!",
    tool_block("FinishedVideo"), "Congratulations! Rolling the assembly video.",
]

VLM = MockVisionBackend([MockRule("[detection]", "*", "torso base 40 52 210 340")])


def main() -> None:
    manager = SessionManager(
        [make_manual("mini-robot", steps=3)],
        lambda: (ScriptedLlm(list(SCRIPT)), VLM),
    )
    manager.create_session("mini-robot", session_id="ui-fixture")
    for text in ("where are we?", "begin", "what piece is this?", "next", "next"):
        manager.post_message("ui-fixture", text)
    for step in (1, 2, 3):
        manager.control_step("ui-fixture", step, True)
    manager.post_message("ui-fixture", "does it look right?")
    manager.post_message("ui-fixture", "finish")

    events = [e.to_dict() for e in manager.get_session("ui-fixture").events]
    assert len(events) == 40, f"fixture drifted: {len(events)} events"
    out = Path(__file__).resolve().parents[1] / "webui" / "test" / "fixtures" / "session-events.jsonl"
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        for event in events:
            fh.write(json.dumps(event, ensure_ascii=False) + "\n")
    print(f"wrote {out} ({len(events)} events)")


if __name__ == "__main__":
    main()
