"""Vision-language sub-agent boundary: queries, output parsing, backends.

The detection task answers in the loose grammar
"<label> <x_left> <y_top> <x_right> <y_bottom>"; real model output wraps it
in chatter, so the parser scans for the first 4-integer window preceded by a
clean label run. Caveat (documented): a label immediately preceded by
unpunctuated chatter is indistinguishable from a longer label, and a bare
integer token directly before the coordinate window binds to the window, not
the label. Coordinates are passed through verbatim, no unit normalization.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

from .manuals import StepInstruction

DETECTION_TOKEN = "[detection]"

_INT = re.compile(r"^\d+$")
_CLEAN_WORD = re.compile(r"^[\w'\-]+$", re.UNICODE)
_WS = re.compile(r"\s+")


class VisionError(Exception):
    """Base for every vision-agent failure."""


class NoDetectionFound(VisionError):
    """Output contains no labeled 4-integer coordinate window."""


class DegenerateBox(VisionError):
    """Coordinates violate the bounding-box ordering invariants."""


class UnparseableVerdict(VisionError):
    """State-check output starts with neither yes nor no."""


class VisionBackendError(VisionError):
    """Backend could not produce output for a query."""


@dataclass(frozen=True)
class BoundingBox:
    x_left: int
    y_top: int
    x_right: int
    y_bottom: int

    def __post_init__(self) -> None:
        if min(self.x_left, self.y_top, self.x_right, self.y_bottom) < 0:
            raise DegenerateBox(f"negative coordinate in {self.as_list()}")
        if self.x_left >= self.x_right or self.y_top >= self.y_bottom:
            raise DegenerateBox(f"empty or inverted box {self.as_list()}")

    def as_list(self) -> list[int]:
        return [self.x_left, self.y_top, self.x_right, self.y_bottom]


@dataclass(frozen=True)
class DetectionResult:
    object_label: str
    box: BoundingBox
    raw_output: str

    def answer_text(self) -> str:
        """Canonical answer string in the detection output grammar."""
        b = self.box
        return f"{self.object_label} {b.x_left} {b.y_top} {b.x_right} {b.y_bottom}"


@dataclass(frozen=True)
class MatchVerdict:
    matches: bool
    rationale: str


class VisionBackend(Protocol):
    def infer(self, query: str, image_ref: str) -> str: ...


def build_detection_query(step: StepInstruction) -> str:
    """Detection query: the task token plus the step's first sentence."""
    first = _WS.sub(" ", step.instructions[0]).strip()
    return f"{DETECTION_TOKEN} {first}"


def build_state_query(reference_step: StepInstruction) -> str:
    """State-check query: reference instruction text framed as a question."""
    text = _WS.sub(" ", " ".join(reference_step.instructions)).strip()
    return f"Does the current assembly state match this reference instruction? {text}"


def parse_detection_output(raw: str) -> DetectionResult:
    """Pull the first labeled coordinate window out of noisy model output.

    Scans left to right for four consecutive integer tokens; the label is
    the run of clean word tokens immediately before them (chatter carrying
    punctuation, and bare integers, terminate the run). Raises
    NoDetectionFound if no window with a non-empty label exists and
    DegenerateBox if the first such window violates box ordering.
    """
    tokens = raw.split()
    for i in range(len(tokens) - 3):
        window = tokens[i : i + 4]
        if not all(_INT.match(t) for t in window):
            continue
        j = i
        while j > 0 and _CLEAN_WORD.match(tokens[j - 1]) and not _INT.match(tokens[j - 1]):
            j -= 1
        label = " ".join(tokens[j:i])
        if not label:
            continue
        box = BoundingBox(*(int(t) for t in window))  # may raise DegenerateBox
        return DetectionResult(object_label=label, box=box, raw_output=raw)
    raise NoDetectionFound(f"no '<label> <4 ints>' pattern in {raw!r}")


def detect_object(step: StepInstruction, image_ref: str, backend: VisionBackend) -> DetectionResult:
    """Query the backend for the step's object and parse the answer."""
    raw = backend.infer(build_detection_query(step), image_ref)
    return parse_detection_output(raw)


def parse_verdict_output(raw: str) -> MatchVerdict:
    """Leading yes/no token (case-insensitive) decides; the rest is rationale."""
    stripped = raw.strip()
    m = re.match(r"^(yes|no)\b[.,!:;]*\s*", stripped, flags=re.IGNORECASE)
    if not m:
        raise UnparseableVerdict(f"no leading yes/no in {raw!r}")
    return MatchVerdict(
        matches=m.group(1).lower() == "yes",
        rationale=stripped[m.end():].strip(),
    )


def check_assembly_state(
    image_ref: str,
    reference_step: StepInstruction,
    backend: VisionBackend,
) -> MatchVerdict:
    raw = backend.infer(build_state_query(reference_step), image_ref)
    return parse_verdict_output(raw)


@dataclass(frozen=True)
class MockRule:
    query_contains: str
    image_ref: str  # "*" matches any frame
    output: str


class MockVisionBackend:
    """Deterministic scripted backend; rule list is immutable after load.

    First matching rule wins: the rule's query_contains must be a substring
    of the query and its image_ref must equal the frame ref (or be "*").
    No matching rule is an error, never a silent empty.
    """

    def __init__(self, rules: list[MockRule]):
        self._rules = tuple(rules)

    @classmethod
    def from_file(cls, path: str | Path) -> "MockVisionBackend":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls([MockRule(r["query_contains"], r["image_ref"], r["output"]) for r in raw])

    def infer(self, query: str, image_ref: str) -> str:
        for rule in self._rules:
            if rule.query_contains in query and rule.image_ref in ("*", image_ref):
                return rule.output
        raise VisionBackendError(f"no mock rule matches query={query!r} image_ref={image_ref!r}")


class HttpVisionBackend:
    """Vision backend over the same chat-completions wire contract as the LLM."""

    def __init__(self, llm) -> None:
        self._llm = llm  # any LlmBackend

    def infer(self, query: str, image_ref: str) -> str:
        from .backends import BackendError

        try:
            return self._llm.complete([("user", f"{query}\nimage: {image_ref}")])
        except BackendError as exc:
            raise VisionBackendError(str(exc)) from exc
