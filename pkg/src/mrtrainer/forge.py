"""Dialogue-dataset pipeline: simulate tool responses, generate grounded
conversations, build detection QA pairs, extract context-response pairs,
split, and report statistics.

Everything is deterministic given (master seed, manuals, scripted backends):
per-conversation RNG streams are derived from the seed and the conversation
id, and no wall-clock data enters any output file.
"""

from __future__ import annotations

import hashlib
import importlib.resources
import json
import logging
import random
import re
from collections import Counter, deque
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .backends import LlmBackend
from .manuals import InstructionManual, ManualChunk, chunk_manual
from .prompts import render_dialogue_query_prompt, render_dialogue_system_prompt, \
    render_requirements_prompt
from .simulator import (
    TOOL_NAMES,
    AssemblySession,
    ToolCall,
    ToolResponse,
    dispatch,
    histogram_from_names,
    new_session,
    set_step_completed,
)
from .vision import (
    MockRule,
    MockVisionBackend,
    VisionBackend,
    VisionError,
    build_detection_query,
    parse_detection_output,
)

logger = logging.getLogger(__name__)

TRAINER = "Trainer"
TRAINEE = "Trainee"
MAX_TOOLS_PER_CONVERSATION = 6

_TOOL_BLOCK = re.compile(r"```tool\s*\n(.*?)```", re.DOTALL)
_SPEAKER_LINE = re.compile(r"^(Trainer|Trainee):\s?(.*)$")

# Violation identifiers returned by validate_conversation.
V_NON_ALTERNATING = "NonAlternatingSpeakers"
V_MISSING_SECTIONS = "MissingSectionTitles"
V_MISSING_CLOSING = "MissingClosingProtocol"
V_SECTION_NO_ENGAGEMENT = "SectionWithoutTraineeEngagement"


class TranscriptParseError(ValueError):
    """Generated transcript does not follow the expected line grammar."""


class EmptyOutput(ValueError):
    """LLM returned nothing usable."""


@dataclass(frozen=True)
class ConversationTurn:
    speaker: str
    text: str
    tool_call: ToolCall | None = None
    tool_response: ToolResponse | None = None
    section: int = -1  # index into section_titles; -1 = before the first

    def to_dict(self) -> dict:
        return {
            "speaker": self.speaker,
            "text": self.text,
            "tool_call": self.tool_call.to_dict() if self.tool_call else None,
            "tool_response": self.tool_response.to_dict() if self.tool_response else None,
            "section": self.section,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConversationTurn":
        return cls(
            speaker=d["speaker"],
            text=d["text"],
            tool_call=ToolCall.from_dict(d["tool_call"]) if d.get("tool_call") else None,
            tool_response=(
                ToolResponse.from_dict(d["tool_response"]) if d.get("tool_response") else None
            ),
            section=d.get("section", -1),
        )


@dataclass
class ConversationRecord:
    conv_id: str
    manual_id: str
    chunk_index: int
    section_titles: list[str]
    turns: list[ConversationTurn]

    def to_dict(self) -> dict:
        return {
            "conv_id": self.conv_id,
            "manual_id": self.manual_id,
            "chunk_index": self.chunk_index,
            "section_titles": list(self.section_titles),
            "turns": [t.to_dict() for t in self.turns],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConversationRecord":
        return cls(
            conv_id=d["conv_id"],
            manual_id=d["manual_id"],
            chunk_index=d["chunk_index"],
            section_titles=list(d["section_titles"]),
            turns=[ConversationTurn.from_dict(t) for t in d["turns"]],
        )


@dataclass(frozen=True)
class ContextResponsePair:
    conv_id: str
    turn_index: int
    context: str
    response: str

    def to_dict(self, split: str | None = None) -> dict:
        d = {
            "conv_id": self.conv_id,
            "turn_index": self.turn_index,
            "context": self.context,
            "response": self.response,
        }
        if split is not None:
            d["split"] = split
        return d


@dataclass(frozen=True)
class VqaPair:
    manual_id: str
    step_index: int
    query: str
    image_ref: str
    answer: str

    def to_dict(self) -> dict:
        return {
            "manual_id": self.manual_id,
            "step_index": self.step_index,
            "query": self.query,
            "image_ref": self.image_ref,
            "answer": self.answer,
        }


@dataclass
class VqaBuildResult:
    pairs: list[VqaPair]
    dropped: int


# ---------------------------------------------------------------------------
# Tool-response simulation

# Scratch manual the response simulator runs tools against. Six steps so
# GoToStep has room to jump around.
_SCRATCH_MANUAL_DOC = {
    "id": "scratch",
    "title": "Scratch rig",
    "summary": "Internal rig for recording template tool responses.",
    "steps": [
        {
            "index": i,
            "instructions": [f"Attach part {i} to the frame."],
            "image_ref": None,
            "piece_ids": [f"part-{i}a", f"part-{i}b"],
        }
        for i in range(1, 7)
    ],
}

_SCRATCH_VLM = MockVisionBackend(
    [
        MockRule("[detection]", "*", "blue brick 2x4 12 18 96 142"),
        MockRule("", "*", "Yes, the pieces are aligned with the reference."),
    ]
)

# Calls that must run first so the sampled tool executes on a satisfied
# precondition. FinishedVideo additionally needs every step marked complete.
_PROLOGUES: dict[str, tuple[str, ...]] = {
    "StartAssemble": (),
    "NextStep": ("StartAssemble",),
    "FrontStep": ("StartAssemble", "NextStep"),
    "Explode": (),
    "Recover": ("Explode",),
    "FinishedVideo": ("StartAssemble",),
    "ReShow": ("StartAssemble",),
    "Enlarge": (),
    "Shrink": (),
    "GoToStep": ("StartAssemble",),
    "Rotate": (),
    "ShowPieces": ("StartAssemble",),
    "HighlightCorrectComponents": ("StartAssemble",),
    "GetCurrentStep": ("StartAssemble",),
    "GetRemainingStep": ("StartAssemble",),
    "CheckStepStatusVR": ("StartAssemble",),
    "APICallObjectRecognitionAR": ("StartAssemble",),
    "APICallCheckStepStatusAR": ("StartAssemble",),
}


def _scratch_session() -> AssemblySession:
    from .manuals import parse_manual

    return new_session("scratch", parse_manual(dict(_SCRATCH_MANUAL_DOC)))


def simulate_tool_responses(
    seed: int | str,
    tool_names: Sequence[str] = TOOL_NAMES,
) -> list[tuple[ToolCall, ToolResponse]]:
    """Sample 1..6 distinct tools and record their template responses.

    Each sampled tool runs against a fresh scratch session whose
    preconditions were satisfied by a setup prologue, so every recorded
    response is a success template.
    """
    rng = random.Random(seed)
    k = rng.randint(1, MAX_TOOLS_PER_CONVERSATION)
    names = rng.sample(list(tool_names), k)
    out: list[tuple[ToolCall, ToolResponse]] = []
    for name in names:
        session = _scratch_session()
        for pre in _PROLOGUES.get(name, ()):
            dispatch(session, ToolCall(pre), _SCRATCH_VLM)
        if name == "FinishedVideo":
            for step in range(1, session.total_steps + 1):
                set_step_completed(session, step, True)
        args: dict = {}
        if name == "GoToStep":
            args = {"step": rng.randint(1, session.total_steps)}
        elif name == "Rotate":
            args = {"direction": rng.choice(("Up", "Down", "Left", "Right"))}
        call = ToolCall(name, args)
        _, response = dispatch(session, call, _SCRATCH_VLM)
        out.append((call, response))
    return out


# ---------------------------------------------------------------------------
# Transcript parsing and conversation records


def parse_transcript(raw: str) -> tuple[list[str], list[tuple[str, str, ToolCall | None, int]]]:
    """Parse the "## section / Trainer: / Trainee:" line grammar.

    Returns (section_titles, turns) where each turn is (speaker, clean text,
    first tool call or None, section index). Tool blocks are removed from
    the utterance text. Raises TranscriptParseError on content before the
    first speaker line, empty transcripts, or invalid tool blocks.
    """
    section_titles: list[str] = []
    raw_turns: list[tuple[str, list[str], int]] = []
    current: list[str] | None = None

    for line in raw.splitlines():
        if line.startswith("## "):
            section_titles.append(line[3:].strip())
            current = None
            continue
        m = _SPEAKER_LINE.match(line)
        if m:
            current = [m.group(2)]
            raw_turns.append((m.group(1), current, len(section_titles) - 1))
            continue
        if current is not None:
            current.append(line)
            continue
        if line.strip():
            raise TranscriptParseError(f"content before any speaker tag: {line!r}")

    if not raw_turns:
        raise TranscriptParseError("transcript has no Trainer:/Trainee: lines")

    turns: list[tuple[str, str, ToolCall | None, int]] = []
    for speaker, lines, section in raw_turns:
        body = "\n".join(lines)
        call: ToolCall | None = None
        m = _TOOL_BLOCK.search(body)
        if m:
            try:
                payload = json.loads(m.group(1))
                name = payload["name"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise TranscriptParseError(f"invalid tool block: {exc}") from exc
            if name not in TOOL_NAMES:
                raise TranscriptParseError(f"unknown tool name {name!r} in transcript")
            call = ToolCall(name=name, args=dict(payload.get("args") or {}))
            body = _TOOL_BLOCK.sub(" ", body)
        text = " ".join(seg.strip() for seg in body.splitlines() if seg.strip())
        turns.append((speaker, text, call, section))
    return section_titles, turns


def generate_conversation(
    chunk: ManualChunk,
    tool_responses: list[tuple[ToolCall, ToolResponse]],
    llm: LlmBackend,
    conv_id: str | None = None,
) -> ConversationRecord:
    """Generate and parse one grounded conversation for a manual chunk."""
    raw = llm.complete(
        [
            ("system", render_dialogue_system_prompt()),
            ("user", render_dialogue_query_prompt(chunk, tool_responses)),
        ]
    )
    section_titles, parsed = parse_transcript(raw)

    by_name: dict[str, deque[ToolResponse]] = {}
    for call, response in tool_responses:
        by_name.setdefault(call.name, deque()).append(response)

    turns: list[ConversationTurn] = []
    for speaker, text, call, section in parsed:
        response = None
        if call is not None and by_name.get(call.name):
            response = by_name[call.name].popleft()
        turns.append(
            ConversationTurn(
                speaker=speaker, text=text, tool_call=call,
                tool_response=response, section=section,
            )
        )
    return ConversationRecord(
        conv_id=conv_id or f"{chunk.manual_id}-c{chunk.chunk_index:02d}",
        manual_id=chunk.manual_id,
        chunk_index=chunk.chunk_index,
        section_titles=section_titles,
        turns=turns,
    )


def validate_conversation(record: ConversationRecord) -> list[str]:
    """Structural checks on a record; an empty list means compliant."""
    violations: list[str] = []

    for i, turn in enumerate(record.turns):
        expected = TRAINER if i % 2 == 0 else TRAINEE
        if turn.speaker != expected:
            violations.append(f"{V_NON_ALTERNATING}: turn {i} is {turn.speaker}")
            break

    if not record.section_titles or any(not t for t in record.section_titles):
        violations.append(V_MISSING_SECTIONS)
    else:
        for si in range(len(record.section_titles)):
            engaged = any(
                t.speaker == TRAINEE and t.section == si and ("?" in t.text or t.tool_call)
                for t in record.turns
            )
            if not engaged:
                violations.append(f"{V_SECTION_NO_ENGAGEMENT}: section {si}")

    closing_ok = False
    if len(record.turns) >= 4:
        t4, t3, t2, t1 = record.turns[-4:]
        closing_ok = (
            t4.speaker == TRAINER and "accomplish" in t4.text.lower()
            and t3.speaker == TRAINEE
            and t2.speaker == TRAINER and "experience" in t2.text.lower()
            and t1.speaker == TRAINEE
        )
    if not closing_ok:
        violations.append(V_MISSING_CLOSING)
    return violations


# ---------------------------------------------------------------------------
# Detection QA pairs


def build_vqa_dataset(
    manuals: Iterable[InstructionManual],
    vlm: VisionBackend,
) -> VqaBuildResult:
    """One detection pair per illustrated step; unparseable answers dropped."""
    pairs: list[VqaPair] = []
    dropped = 0
    for manual in manuals:
        for step in manual.steps:
            if step.image_ref is None:
                continue
            query = build_detection_query(step)
            try:
                raw = vlm.infer(query, step.image_ref)
                result = parse_detection_output(raw)
            except VisionError as exc:
                dropped += 1
                logger.debug("dropping vqa pair %s/%d: %s", manual.id, step.index, exc)
                continue
            pairs.append(
                VqaPair(
                    manual_id=manual.id,
                    step_index=step.index,
                    query=query,
                    image_ref=step.image_ref,
                    answer=result.answer_text(),
                )
            )
    return VqaBuildResult(pairs=pairs, dropped=dropped)


# ---------------------------------------------------------------------------
# Pair extraction and splitting


def render_context(turns: Sequence[ConversationTurn]) -> str:
    return "\n".join(f"{t.speaker}: {t.text}" for t in turns)


def extract_pairs(records: Iterable[ConversationRecord]) -> list[ContextResponsePair]:
    """One pair per trainer turn that has context and a non-empty response."""
    pairs: list[ContextResponsePair] = []
    for record in records:
        for i, turn in enumerate(record.turns):
            if i == 0 or turn.speaker != TRAINER or not turn.text:
                continue
            pairs.append(
                ContextResponsePair(
                    conv_id=record.conv_id,
                    turn_index=i,
                    context=render_context(record.turns[:i]),
                    response=turn.text,
                )
            )
    return pairs


def split_dataset(
    pairs: Sequence[ContextResponsePair],
    test_fraction: float,
    seed: int | str,
) -> tuple[list[ContextResponsePair], list[ContextResponsePair]]:
    """Conversation-level split: no conv_id straddles train and test."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    conv_sizes = Counter(p.conv_id for p in pairs)
    conv_ids = sorted(conv_sizes)
    random.Random(f"{seed}:split").shuffle(conv_ids)
    target = test_fraction * len(pairs)
    test_ids: set[str] = set()
    size = 0
    for cid in conv_ids:
        if size >= target:
            break
        test_ids.add(cid)
        size += conv_sizes[cid]
    train = [p for p in pairs if p.conv_id not in test_ids]
    test = [p for p in pairs if p.conv_id in test_ids]
    return train, test


# ---------------------------------------------------------------------------
# Statistics


def top_tokens(
    texts: Iterable[str],
    tokenizer: Callable[[str], list[str]],
    k: int = 60,
) -> list[tuple[str, int]]:
    counts = Counter()
    for text in texts:
        counts.update(tokenizer(text))
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:k]


def dataset_stats(
    records: Sequence[ConversationRecord],
    pairs: Sequence[ContextResponsePair],
    tokenizer: Callable[[str], list[str]],
    manuals: Sequence[InstructionManual] | None = None,
    vqa_pairs: Sequence[VqaPair] | None = None,
    top_k: int = 60,
) -> dict:
    """Corpus-level statistics table (counts, averages, token frequencies)."""
    utterances = [t for r in records for t in r.turns]
    trainer_lens = [len(tokenizer(t.text)) for t in utterances if t.speaker == TRAINER]
    trainee_lens = [len(tokenizer(t.text)) for t in utterances if t.speaker == TRAINEE]
    vocab: set[str] = set()
    total_tokens = 0
    for t in utterances:
        toks = tokenizer(t.text)
        total_tokens += len(toks)
        vocab.update(toks)
    mean = lambda xs: sum(xs) / len(xs) if xs else 0.0

    stats = {
        "conversations": len(records),
        "utterances": len(utterances),
        "total_tokens": total_tokens,
        "unique_tokens": len(vocab),
        "avg_utterances_per_conversation": mean([len(r.turns) for r in records]),
        "avg_tokens_trainer": mean(trainer_lens),
        "avg_tokens_trainee": mean(trainee_lens),
        "pairs": len(pairs),
        "avg_context_tokens": mean([len(tokenizer(p.context)) for p in pairs]),
        "avg_response_tokens": mean([len(tokenizer(p.response)) for p in pairs]),
        "tool_histogram": {
            name: [count, fraction]
            for name, (count, fraction) in histogram_from_names(
                t.tool_call.name for t in utterances if t.tool_call
            ).items()
        },
    }
    slices: dict[str, list[tuple[str, int]]] = {
        "conversations": top_tokens((t.text for t in utterances), tokenizer, top_k),
    }
    if manuals is not None:
        slices["instructions"] = top_tokens(
            (
                text
                for m in manuals
                for text in (m.summary, *(s.joined_text() for s in m.steps))
            ),
            tokenizer,
            top_k,
        )
        slices["entities"] = top_tokens(
            (e.normalized for m in manuals for e in m.theme_entities), tokenizer, top_k
        )
    if vqa_pairs is not None:
        slices["vqa"] = top_tokens(
            (f"{p.query} {p.answer}" for p in vqa_pairs), tokenizer, top_k
        )
    stats["top_tokens"] = {name: [[t, c] for t, c in rows] for name, rows in slices.items()}
    return stats


# ---------------------------------------------------------------------------
# Requirement elicitation

_BULLET = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s+(.*\S)\s*$")


def generate_user_requirements(manual_samples: list[str], llm: LlmBackend) -> list[str]:
    """Elicit functional requirements from manual samples; bullet-parsed."""
    raw = llm.complete([("user", render_requirements_prompt(manual_samples))])
    if not raw.strip():
        raise EmptyOutput("backend returned an empty requirements list")
    bullets = [m.group(1) for line in raw.splitlines() if (m := _BULLET.match(line))]
    if bullets:
        return bullets
    return [line.strip() for line in raw.splitlines() if line.strip()]


def load_canonical_requirements() -> list[dict]:
    """The seven requirements the pilot application was built around."""
    data = importlib.resources.files("mrtrainer").joinpath("data/user_requirements.json")
    return json.loads(data.read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Full pipeline


@dataclass(frozen=True)
class GenerationConfig:
    seed: int = 7
    chunk_size: int = 10
    test_fraction: float = 0.2


@dataclass
class DatasetManifest:
    conversations: int
    utterances: int
    pairs: int
    vqa: int
    vqa_dropped: int
    train_size: int
    test_size: int
    seed: int
    chunk_size: int
    test_fraction: float
    config_hash: str
    validation_violations: int
    context_includes_manual: bool = False

    def to_dict(self) -> dict:
        return {
            "conversations": self.conversations,
            "utterances": self.utterances,
            "pairs": self.pairs,
            "vqa": self.vqa,
            "vqa_dropped": self.vqa_dropped,
            "train_size": self.train_size,
            "test_size": self.test_size,
            "seed": self.seed,
            "chunk_size": self.chunk_size,
            "test_fraction": self.test_fraction,
            "config_hash": self.config_hash,
            "validation_violations": self.validation_violations,
            "context_includes_manual": self.context_includes_manual,
        }


def _write_jsonl(path: Path, rows: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def config_hash(config: GenerationConfig, manual_ids: Sequence[str]) -> str:
    blob = json.dumps(
        {
            "seed": config.seed,
            "chunk_size": config.chunk_size,
            "test_fraction": config.test_fraction,
            "manual_ids": sorted(manual_ids),
        },
        sort_keys=True,
    )
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def run_generation(
    manuals: Sequence[InstructionManual],
    llm: LlmBackend,
    vlm: VisionBackend | None,
    config: GenerationConfig,
    out_dir: str | Path,
) -> DatasetManifest:
    """Run the whole pipeline and write the four dataset files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    records: list[ConversationRecord] = []
    violation_total = 0
    for manual in sorted(manuals, key=lambda m: m.id):
        for chunk in chunk_manual(manual, config.chunk_size):
            conv_id = f"{manual.id}-c{chunk.chunk_index:02d}"
            tool_responses = simulate_tool_responses(f"{config.seed}:{conv_id}")
            record = generate_conversation(chunk, tool_responses, llm, conv_id=conv_id)
            problems = validate_conversation(record)
            if problems:
                logger.warning("conversation %s: %s", conv_id, ", ".join(problems))
                violation_total += len(problems)
            records.append(record)

    vqa = build_vqa_dataset(manuals, vlm) if vlm is not None else VqaBuildResult([], 0)
    pairs = extract_pairs(records)
    train, test = split_dataset(pairs, config.test_fraction, config.seed)
    test_ids = {p.conv_id for p in test}

    manifest = DatasetManifest(
        conversations=len(records),
        utterances=sum(len(r.turns) for r in records),
        pairs=len(pairs),
        vqa=len(vqa.pairs),
        vqa_dropped=vqa.dropped,
        train_size=len(train),
        test_size=len(test),
        seed=config.seed,
        chunk_size=config.chunk_size,
        test_fraction=config.test_fraction,
        config_hash=config_hash(config, [m.id for m in manuals]),
        validation_violations=violation_total,
    )

    _write_jsonl(out / "conversations.jsonl", (r.to_dict() for r in records))
    _write_jsonl(
        out / "pairs.jsonl",
        (p.to_dict(split="test" if p.conv_id in test_ids else "train") for p in pairs),
    )
    _write_jsonl(out / "vqa.jsonl", (p.to_dict() for p in vqa.pairs))
    with open(out / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest.to_dict(), fh, indent=2)
        fh.write("\n")
    return manifest
