"""Deterministic stand-in for the pilot MR assembly application.

A session is a small state machine; its only transitions are the 18 serving
tools the application exposes. Dispatch never raises on a bad call: failures
come back as ok=false responses and the core state stays untouched. Every
attempt (success or failure) is journaled in the session's tool trace.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any, Iterable, Mapping

if TYPE_CHECKING:  # circular import guard; only needed for type checkers
    from .manuals import InstructionManual
    from .vision import VisionBackend

ZOOM_MIN = 0.25
ZOOM_MAX = 4.0
ZOOM_FACTOR = 1.25

DIRECTIONS = ("Up", "Down", "Left", "Right", "None")

# Error codes carried by ok=false responses.
ERR_NOT_STARTED = "NotStarted"
ERR_ALREADY_STARTED = "AlreadyStarted"
ERR_AT_FINAL_STEP = "AtFinalStep"
ERR_AT_FIRST_STEP = "AtFirstStep"
ERR_STEP_OUT_OF_RANGE = "StepOutOfRange"
ERR_STEPS_INCOMPLETE = "StepsIncomplete"
ERR_VLM_UNAVAILABLE = "VlmUnavailable"
ERR_VLM_FAILED = "VlmError"
ERR_BAD_ARGS = "BadArgs"
ERR_UNKNOWN_TOOL = "UnknownTool"


class StepOutOfRange(ValueError):
    """set_step_completed got a step index outside 1..total_steps."""


@dataclass(frozen=True)
class ToolCall:
    name: str
    args: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "args": dict(self.args)}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ToolCall":
        return cls(name=d["name"], args=dict(d.get("args") or {}))


@dataclass(frozen=True)
class ToolResponse:
    ok: bool
    text: str
    data: dict[str, Any] = field(default_factory=dict)
    error_code: str | None = None

    def __post_init__(self) -> None:
        if self.ok == (self.error_code is not None):
            raise ValueError("error_code must be present exactly when ok is false")

    def to_dict(self) -> dict[str, Any]:
        return {"ok": self.ok, "text": self.text, "data": self.data, "error_code": self.error_code}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ToolResponse":
        return cls(
            ok=d["ok"], text=d["text"], data=dict(d.get("data") or {}),
            error_code=d.get("error_code"),
        )


def _ok(text: str, **data: Any) -> ToolResponse:
    return ToolResponse(ok=True, text=text, data=data)


def _err(code: str, text: str) -> ToolResponse:
    return ToolResponse(ok=False, text=text, data={}, error_code=code)


# Registry rows: (name, description, arg schema). Descriptions are the
# application's published tool table, reproduced verbatim.
TOOL_TABLE: tuple[tuple[str, str, dict[str, str]], ...] = (
    ("StartAssemble", "Initiate the assembly process.", {}),
    ("NextStep", "Move to the next assembly step.", {}),
    ("FrontStep", "Go back to the previous assembly step.", {}),
    ("Explode", "Trigger an explosion for detailed viewing.", {}),
    ("Recover", "Restore the initial state of AR objects after explosion.", {}),
    ("FinishedVideo",
     "End the assembly process and show a video of the assembled LEGO bricks.", {}),
    ("ReShow", "Repeat the current assembly step.", {}),
    ("Enlarge", "Enlarge or zoom out the current object.", {}),
    ("Shrink", "Shrink or zoom in the current object.", {}),
    ("GoToStep", "Go to the given assembly step number.", {"step": "int"}),
    ("Rotate",
     'Rotate the current object to a direction ("Up", "Down", "Left", "Right", "None").',
     {"direction": "Up|Down|Left|Right|None"}),
    ("ShowPieces", "Show all candidate LEGO pieces to be assembled.", {}),
    ("HighlightCorrectComponents", "Highlight correct attachment points and components.", {}),
    ("GetCurrentStep", "Get the number of the current step.", {}),
    ("GetRemainingStep", "Get the number of the remaining steps.", {}),
    ("CheckStepStatusVR",
     "Check whether the current step in Unity is accomplished correctly or not.", {}),
    ("APICallObjectRecognitionAR",
     "Call the VLM agent to identify LEGO pieces based on the provided video streaming data "
     "from AR glasses and highlight the recognized pieces in the AR environment.", {}),
    ("APICallCheckStepStatusAR",
     "Call the VLM agent to determine whether the current assembly step is completed correctly "
     "or not, using the provided video streaming data from AR glasses as input.", {}),
)

TOOL_NAMES: tuple[str, ...] = tuple(name for name, _, _ in TOOL_TABLE)
VLM_TOOL_NAMES = ("APICallObjectRecognitionAR", "APICallCheckStepStatusAR")
_ARG_SCHEMAS = {name: schema for name, _, schema in TOOL_TABLE}


def list_tools() -> list[tuple[str, str]]:
    """The registry as ordered (name, description) pairs."""
    return [(name, desc) for name, desc, _ in TOOL_TABLE]


def registry_json() -> list[dict[str, Any]]:
    """Registry export for prompt construction and UI legends."""
    return [{"name": n, "description": d, "args": dict(a)} for n, d, a in TOOL_TABLE]


@dataclass
class AssemblySession:
    """Mutable simulator state for one trainee working one manual."""

    session_id: str
    manual: "InstructionManual"
    current_step: int = 0
    started: bool = False
    finished: bool = False
    exploded: bool = False
    zoom: float = 1.0
    rotation: str = "None"
    highlights: set[str] = field(default_factory=set)
    step_completed: list[bool] = field(default_factory=list)
    tool_trace: list[tuple[ToolCall, ToolResponse]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.step_completed:
            self.step_completed = [False] * self.total_steps

    @property
    def manual_id(self) -> str:
        return self.manual.id

    @property
    def total_steps(self) -> int:
        return len(self.manual.steps)

    @property
    def remaining_steps(self) -> int:
        return self.total_steps - self.current_step

    def frame_ref(self) -> str:
        """Opaque handle for the trainee's current camera frame."""
        return f"stream://{self.session_id}/step-{self.current_step}"

    def snapshot(self) -> dict[str, Any]:
        """Core state (everything except the trace), JSON-ready."""
        return {
            "session_id": self.session_id,
            "manual_id": self.manual_id,
            "current_step": self.current_step,
            "total_steps": self.total_steps,
            "remaining_steps": self.remaining_steps,
            "started": self.started,
            "finished": self.finished,
            "exploded": self.exploded,
            "zoom": self.zoom,
            "rotation": self.rotation,
            "highlights": sorted(self.highlights),
            "step_completed": list(self.step_completed),
        }

    def restore(self, snap: Mapping[str, Any]) -> None:
        """Apply a snapshot produced by snapshot() (manual stays as-is)."""
        self.current_step = snap["current_step"]
        self.started = snap["started"]
        self.finished = snap["finished"]
        self.exploded = snap["exploded"]
        self.zoom = snap["zoom"]
        self.rotation = snap["rotation"]
        self.highlights = set(snap["highlights"])
        self.step_completed = list(snap["step_completed"])

    def check_invariants(self) -> None:
        assert 0 <= self.current_step <= self.total_steps
        assert self.started or self.current_step == 0
        assert not self.finished or all(self.step_completed)
        assert ZOOM_MIN <= self.zoom <= ZOOM_MAX
        assert self.rotation in DIRECTIONS


def new_session(session_id: str, manual: "InstructionManual") -> AssemblySession:
    return AssemblySession(session_id=session_id, manual=manual)


def _validate_args(call: ToolCall) -> str | None:
    """Return an error message when args do not fit the tool's signature."""
    schema = _ARG_SCHEMAS.get(call.name)
    if schema is None:
        return f"unknown tool '{call.name}'"
    extra = set(call.args) - set(schema)
    if extra:
        return f"unexpected argument(s) {sorted(extra)} for {call.name}"
    if call.name == "GoToStep":
        step = call.args.get("step")
        if not isinstance(step, int) or isinstance(step, bool):
            return "GoToStep requires an integer 'step' argument"
    if call.name == "Rotate":
        direction = call.args.get("direction")
        if direction not in DIRECTIONS:
            return f"Rotate requires 'direction' in {list(DIRECTIONS)}"
    return None


def dispatch(
    session: AssemblySession,
    call: ToolCall,
    vlm: "VisionBackend | None" = None,
) -> tuple[AssemblySession, ToolResponse]:
    """Apply one tool call; always returns a response, never raises.

    Failed calls leave the core state untouched. Every call, failed or not,
    is appended to the session's tool trace.
    """
    response = _apply(session, call, vlm)
    session.tool_trace.append((call, response))
    return session, response


def _apply(s: AssemblySession, call: ToolCall, vlm) -> ToolResponse:
    if call.name not in _ARG_SCHEMAS:
        return _err(ERR_UNKNOWN_TOOL, f"Unknown tool '{call.name}'.")
    bad = _validate_args(call)
    if bad:
        return _err(ERR_BAD_ARGS, bad)

    name = call.name
    if name == "StartAssemble":
        if s.started:
            return _err(ERR_ALREADY_STARTED, "The assembly has already been started.")
        s.started = True
        s.current_step = 1
        return _ok(
            f"Assembly started. You are on step 1 of {s.total_steps}.",
            step=1, total_steps=s.total_steps,
        )

    if name == "NextStep":
        if not s.started:
            return _err(ERR_NOT_STARTED, "Start the assembly first.")
        if s.current_step >= s.total_steps:
            return _err(ERR_AT_FINAL_STEP, f"Already at the final step ({s.total_steps}).")
        s.current_step += 1
        return _ok(
            f"Moved to step {s.current_step} of {s.total_steps}.",
            step=s.current_step, total_steps=s.total_steps,
        )

    if name == "FrontStep":
        if not s.started:
            return _err(ERR_NOT_STARTED, "Start the assembly first.")
        if s.current_step <= 1:
            return _err(ERR_AT_FIRST_STEP, "Already at the first step.")
        s.current_step -= 1
        return _ok(
            f"Went back to step {s.current_step} of {s.total_steps}.",
            step=s.current_step, total_steps=s.total_steps,
        )

    if name == "Explode":
        if s.exploded:
            return _ok("The object is already exploded.", exploded=True)
        s.exploded = True
        return _ok("Exploded the object for detailed viewing.", exploded=True)

    if name == "Recover":
        s.exploded = False
        s.zoom = 1.0
        s.rotation = "None"
        return _ok("Restored the object to its initial state.", exploded=False, zoom=1.0)

    if name == "FinishedVideo":
        if not all(s.step_completed):
            missing = [i + 1 for i, done in enumerate(s.step_completed) if not done]
            return _err(
                ERR_STEPS_INCOMPLETE,
                f"Steps {missing} are not completed yet; finish them before the final video.",
            )
        s.finished = True
        video = f"video://{s.manual_id}/assembled"
        return _ok(f"Congratulations, the assembly is complete! Playing {video}.", video_ref=video)

    if name == "ReShow":
        if not s.started:
            return _err(ERR_NOT_STARTED, "Start the assembly first.")
        step = s.manual.step(s.current_step)
        return _ok(
            f"Step {s.current_step}: " + " ".join(step.instructions),
            step=s.current_step, instructions=list(step.instructions),
        )

    if name == "Enlarge":
        s.zoom = min(ZOOM_MAX, s.zoom * ZOOM_FACTOR)
        return _ok(f"Zoom level is now {s.zoom:g}.", zoom=s.zoom)

    if name == "Shrink":
        s.zoom = max(ZOOM_MIN, s.zoom / ZOOM_FACTOR)
        return _ok(f"Zoom level is now {s.zoom:g}.", zoom=s.zoom)

    if name == "GoToStep":
        if not s.started:
            return _err(ERR_NOT_STARTED, "Start the assembly first.")
        step = call.args["step"]
        if not 1 <= step <= s.total_steps:
            return _err(ERR_STEP_OUT_OF_RANGE, f"Step {step} is outside 1..{s.total_steps}.")
        s.current_step = step
        return _ok(
            f"Jumped to step {step} of {s.total_steps}.",
            step=step, total_steps=s.total_steps,
        )

    if name == "Rotate":
        direction = call.args["direction"]
        if direction == "None":
            return _ok("No rotation applied.", rotation=s.rotation)
        s.rotation = direction
        return _ok(f"Rotated the object {direction.lower()}.", rotation=direction)

    if name == "ShowPieces":
        if not s.started:
            return _err(ERR_NOT_STARTED, "Start the assembly first.")
        pieces = list(s.manual.step(s.current_step).piece_ids)
        return _ok(
            f"Candidate pieces for step {s.current_step}: {', '.join(pieces) if pieces else '(none listed)'}.",
            step=s.current_step, pieces=pieces,
        )

    if name == "HighlightCorrectComponents":
        if not s.started:
            return _err(ERR_NOT_STARTED, "Start the assembly first.")
        pieces = list(s.manual.step(s.current_step).piece_ids)
        s.highlights = set(pieces)
        return _ok(
            f"Highlighted: {', '.join(pieces) if pieces else '(none listed)'}.",
            step=s.current_step, highlighted=pieces,
        )

    if name == "GetCurrentStep":
        return _ok(f"You are on step {s.current_step} of {s.total_steps}.",
                   step=s.current_step, total_steps=s.total_steps)

    if name == "GetRemainingStep":
        return _ok(f"{s.remaining_steps} step(s) remaining.", remaining=s.remaining_steps)

    if name == "CheckStepStatusVR":
        if not s.started:
            return _err(ERR_NOT_STARTED, "Start the assembly first.")
        done = s.step_completed[s.current_step - 1]
        word = "completed" if done else "not completed yet"
        return _ok(f"Step {s.current_step} is {word}.", step=s.current_step, completed=done)

    if name in VLM_TOOL_NAMES:
        if not s.started:
            return _err(ERR_NOT_STARTED, "Start the assembly first.")
        if vlm is None:
            return _err(ERR_VLM_UNAVAILABLE, "No vision backend is attached to this session.")
        return _vlm_call(s, name, vlm)

    raise AssertionError(f"unhandled tool {name}")  # pragma: no cover


def _vlm_call(s: AssemblySession, name: str, vlm) -> ToolResponse:
    from . import vision  # local import to avoid a module cycle

    step = s.manual.step(s.current_step)
    frame = s.frame_ref()
    try:
        if name == "APICallObjectRecognitionAR":
            det = vision.detect_object(step, frame, vlm)
            return _ok(
                f"Recognized '{det.object_label}' at "
                f"({det.box.x_left}, {det.box.y_top}, {det.box.x_right}, {det.box.y_bottom}).",
                label=det.object_label, box=det.box.as_list(), raw=det.raw_output,
            )
        verdict = vision.check_assembly_state(frame, step, vlm)
        word = "matches" if verdict.matches else "does not match"
        return _ok(
            f"The current assembly state {word} the reference for step {s.current_step}."
            + (f" {verdict.rationale}" if verdict.rationale else ""),
            matches=verdict.matches, rationale=verdict.rationale,
        )
    except vision.VisionError as exc:
        return _err(ERR_VLM_FAILED, f"Vision agent failed: {exc}")


def set_step_completed(session: AssemblySession, step: int, done: bool) -> AssemblySession:
    """Control channel for physical-step completion (no trace entry)."""
    if not isinstance(step, int) or isinstance(step, bool) or not 1 <= step <= session.total_steps:
        raise StepOutOfRange(f"step {step} outside 1..{session.total_steps}")
    session.step_completed[step - 1] = done
    if not done:
        session.finished = False
    return session


def histogram_from_names(names: Iterable[str]) -> dict[str, tuple[int, float]]:
    counts = Counter(names)
    total = sum(counts.values())
    if total == 0:
        return {}
    return {name: (c, c / total) for name, c in sorted(counts.items())}


def trace_histogram(sessions: Iterable[AssemblySession]) -> dict[str, tuple[int, float]]:
    """Tool-usage counts and fractions across the sessions' traces."""
    return histogram_from_names(
        call.name for sess in sessions for call, _ in sess.tool_trace
    )


def write_trace(session: AssemblySession, path: str | Path) -> None:
    """Trace journal as JSONL: one {call, response, ts} object per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for ts, (call, response) in enumerate(session.tool_trace):
            row = {"call": call.to_dict(), "response": response.to_dict(), "ts": ts}
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def read_trace(path: str | Path) -> list[tuple[ToolCall, ToolResponse]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            row = json.loads(line)
            out.append((ToolCall.from_dict(row["call"]), ToolResponse.from_dict(row["response"])))
    return out


def replay_trace(
    session: AssemblySession,
    trace: Iterable[tuple[ToolCall, ToolResponse]],
    vlm: "VisionBackend | None" = None,
) -> AssemblySession:
    """Re-apply recorded calls in order against a (fresh) session."""
    for call, _ in trace:
        dispatch(session, call, vlm)
    return session
