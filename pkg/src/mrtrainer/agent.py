"""The trainer agent: conversation memory, action parsing, the tool loop.

Each trainee message drives a bounded decide-act-observe loop: complete the
transcript with the LLM, parse the output into an action, execute tool or
vision calls against the session, feed the observation back, and stop at the
first plain response (or the iteration cap). Timestamps are logical counters
so serialized memory is byte-stable across identical runs.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Sequence

from .backends import LlmBackend, Message
from .manuals import ManualChunk
from .prompts import render_system_prompt
from .simulator import (
    TOOL_NAMES,
    VLM_TOOL_NAMES,
    AssemblySession,
    ToolCall,
    dispatch,
)
from .vision import VisionBackend

DEFAULT_MAX_ITERATIONS = 8

APOLOGY_REPLY = (
    "Sorry, I could not finish working on that request. Could you rephrase it "
    "or ask me something smaller?"
)

_TOOL_BLOCK = re.compile(r"```tool\s*\n(.*?)```", re.DOTALL)

ROLE_SYSTEM = "system"
ROLE_TRAINER = "trainer"
ROLE_TRAINEE = "trainee"
ROLE_TOOL = "tool"
ROLE_VLM = "vlm"


class MalformedToolBlock(ValueError):
    """A ```tool fence is present but its content is not a valid call."""


@dataclass(frozen=True)
class Turn:
    role: str
    content: str
    tool_call: ToolCall | None = None
    timestamp: int = 0

    def to_dict(self) -> dict:
        return {
            "role": self.role,
            "content": self.content,
            "tool_call": self.tool_call.to_dict() if self.tool_call else None,
            "ts": self.timestamp,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Turn":
        call = ToolCall.from_dict(d["tool_call"]) if d.get("tool_call") else None
        return cls(role=d["role"], content=d["content"], tool_call=call, timestamp=d["ts"])


@dataclass
class Memory:
    """Append-only transcript plus the grounding chunk it was opened on."""

    grounding: ManualChunk
    turns: list[Turn] = field(default_factory=list)

    @classmethod
    def open(cls, chunk: ManualChunk) -> "Memory":
        mem = cls(grounding=chunk)
        mem.append(ROLE_SYSTEM, render_system_prompt(chunk))
        return mem

    def append(self, role: str, content: str, tool_call: ToolCall | None = None) -> Turn:
        turn = Turn(role=role, content=content, tool_call=tool_call, timestamp=len(self.turns))
        self.turns.append(turn)
        return turn

    def to_messages(self) -> list[Message]:
        """Chat-completions view: observations become tagged user messages."""
        messages: list[Message] = []
        for turn in self.turns:
            if turn.role == ROLE_SYSTEM:
                messages.append(("system", turn.content))
            elif turn.role == ROLE_TRAINER:
                messages.append(("assistant", turn.content))
            elif turn.role == ROLE_TRAINEE:
                messages.append(("user", turn.content))
            else:  # tool / vlm observations
                name = turn.tool_call.name if turn.tool_call else turn.role
                messages.append(("user", f"Observation from {name}: {turn.content}"))
        return messages

    def to_jsonl(self) -> str:
        return "".join(json.dumps(t.to_dict(), ensure_ascii=False) + "\n" for t in self.turns)


@dataclass(frozen=True)
class AgentAction:
    """One decision: respond in text, call a tool, or call the vision agent."""

    kind: str  # "respond" | "call_tool" | "call_vlm"
    text: str | None = None
    call: ToolCall | None = None

    def __post_init__(self) -> None:
        if self.kind == "respond":
            if self.text is None or self.call is not None:
                raise ValueError("respond actions carry text only")
        elif self.kind in ("call_tool", "call_vlm"):
            if self.call is None or self.text is not None:
                raise ValueError(f"{self.kind} actions carry a call only")
        else:
            raise ValueError(f"unknown action kind {self.kind!r}")


def respond(text: str) -> AgentAction:
    return AgentAction(kind="respond", text=text)


def parse_action(llm_output: str) -> AgentAction:
    """First fenced ```tool block wins; no block means a plain response."""
    m = _TOOL_BLOCK.search(llm_output)
    if m is None:
        return respond(llm_output)
    try:
        payload = json.loads(m.group(1))
    except json.JSONDecodeError as exc:
        raise MalformedToolBlock(f"tool block is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict) or not isinstance(payload.get("name"), str):
        raise MalformedToolBlock("tool block must be an object with a 'name' string")
    name = payload["name"]
    if name not in TOOL_NAMES:
        raise MalformedToolBlock(f"unknown tool name {name!r}")
    args = payload.get("args") or {}
    if not isinstance(args, dict):
        raise MalformedToolBlock("'args' must be an object")
    call = ToolCall(name=name, args=args)
    kind = "call_vlm" if name in VLM_TOOL_NAMES else "call_tool"
    return AgentAction(kind=kind, call=call)


def run_turn(
    memory: Memory,
    session: AssemblySession,
    user_msg: str,
    llm: LlmBackend,
    vlm: VisionBackend | None = None,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    observer=None,
) -> tuple[Memory, AssemblySession, str, list[AgentAction]]:
    """Process one trainee message end to end.

    Returns (memory, session, trainer_reply, actions). The optional observer
    is called with (event_type, payload) as things happen, which is how the
    session service turns agent progress into its event stream.
    """
    notify = observer or (lambda kind, payload: None)
    memory.append(ROLE_TRAINEE, user_msg)
    notify("trainee_message", {"text": user_msg})

    actions: list[AgentAction] = []
    reprompted = False
    for _ in range(max_iterations):
        raw = llm.complete(memory.to_messages())
        try:
            action = parse_action(raw)
        except MalformedToolBlock as exc:
            if reprompted:
                action = respond(raw)  # degrade: treat the raw output as the reply
            else:
                reprompted = True
                note = (
                    f"Your tool block was invalid ({exc}). Raw output:\n{raw}\n"
                    "Reply again with a valid ```tool block or a plain answer."
                )
                memory.append(ROLE_SYSTEM, note)
                notify("error", {"code": "MalformedToolBlock", "note": note})
                continue

        if action.kind == "respond":
            actions.append(action)
            memory.append(ROLE_TRAINER, action.text)
            notify("trainer_message", {"text": action.text})
            return memory, session, action.text, actions

        actions.append(action)
        memory.append(ROLE_TRAINER, raw, tool_call=action.call)
        notify("tool_call", {"call": action.call.to_dict(), "raw": raw})
        _, response = dispatch(session, action.call, vlm)
        observation = json.dumps(response.to_dict(), ensure_ascii=False, sort_keys=True)
        role = ROLE_VLM if action.kind == "call_vlm" else ROLE_TOOL
        memory.append(role, observation, tool_call=action.call)
        notify(
            "vlm_result" if action.kind == "call_vlm" else "tool_response",
            {"call": action.call.to_dict(), "response": response.to_dict()},
        )

    memory.append(ROLE_TRAINER, APOLOGY_REPLY)
    notify("trainer_message", {"text": APOLOGY_REPLY})
    return memory, session, APOLOGY_REPLY, actions
