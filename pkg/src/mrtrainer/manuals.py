"""Instruction-manual model: parsing, validation, chunking, theme lexicon.

Manuals arrive as versioned JSON documents (one file per manual). Theme
entities are marked in the source text with [[double-bracket]] spans; parsing
strips the markup and records (unit, span) locations so serialization can
reinsert it exactly.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

SUMMARY_UNIT = "summary"
DEFAULT_CHUNK_SIZE = 10

_WS = re.compile(r"\s+")


class SchemaError(ValueError):
    """Manual document violates the interchange schema."""


class EmptyManual(SchemaError):
    """Manual has no steps."""


@dataclass(frozen=True)
class ThemeEntity:
    """A highlighted key phrase and where it sits in the manual."""

    surface: str
    normalized: str
    unit: str | int  # SUMMARY_UNIT or a 1-based step index
    span: tuple[int, int]  # character span in the unit's clean text


@dataclass(frozen=True)
class StepInstruction:
    index: int
    instructions: tuple[str, ...]
    image_ref: str | None = None
    piece_ids: tuple[str, ...] = ()

    def joined_text(self) -> str:
        return "\n".join(self.instructions)


@dataclass(frozen=True)
class InstructionManual:
    id: str
    title: str
    summary: str
    steps: tuple[StepInstruction, ...]
    theme_entities: tuple[ThemeEntity, ...] = ()

    def step(self, index: int) -> StepInstruction:
        return self.steps[index - 1]

    def unit_text(self, unit: str | int) -> str:
        return self.summary if unit == SUMMARY_UNIT else self.step(int(unit)).joined_text()


@dataclass(frozen=True)
class ManualChunk:
    """A summary plus a consecutive run of steps; one grounding unit."""

    manual_id: str
    chunk_index: int
    summary: str
    steps: tuple[StepInstruction, ...]


@dataclass(frozen=True)
class CorpusStats:
    manual_count: int
    total_steps: int
    total_tokens: int
    unique_tokens: int
    theme_entity_count: int
    entity_occurrences: int
    avg_steps_per_manual: float


def _strip_markup(text: str, where: str) -> tuple[str, list[tuple[str, tuple[int, int]]]]:
    """Remove [[...]] spans; return clean text plus (surface, span) pairs."""
    clean: list[str] = []
    spans: list[tuple[str, tuple[int, int]]] = []
    pos = 0
    out_len = 0
    while True:
        open_i = text.find("[[", pos)
        if open_i == -1:
            tail = text[pos:]
            clean.append(tail)
            break
        close_i = text.find("]]", open_i + 2)
        if close_i == -1:
            raise SchemaError(f"{where}: unterminated [[ markup")
        surface = text[open_i + 2 : close_i]
        if not surface.strip():
            raise SchemaError(f"{where}: empty [[ ]] entity")
        if "[[" in surface:
            raise SchemaError(f"{where}: nested [[ markup")
        before = text[pos:open_i]
        clean.append(before)
        out_len += len(before)
        clean.append(surface)
        spans.append((surface, (out_len, out_len + len(surface))))
        out_len += len(surface)
        pos = close_i + 2
    return "".join(clean), spans


def normalize_entity(surface: str) -> str:
    return _WS.sub(" ", surface.casefold()).strip()


def _require(doc: dict, key: str, kind: type, where: str):
    if key not in doc:
        raise SchemaError(f"{where}: missing field '{key}'")
    value = doc[key]
    if not isinstance(value, kind) or isinstance(value, bool):
        raise SchemaError(f"{where}: field '{key}' must be {kind.__name__}")
    return value


def parse_manual(document: dict | str) -> InstructionManual:
    """Validate a manual JSON document and extract theme entities.

    Accepts the parsed dict or the raw JSON string. Raises SchemaError on
    structural problems and EmptyManual when there are no steps.
    """
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"not valid JSON: {exc}") from exc
    if not isinstance(document, dict):
        raise SchemaError("manual document must be a JSON object")

    manual_id = _require(document, "id", str, "manual")
    title = _require(document, "title", str, "manual")
    raw_summary = _require(document, "summary", str, "manual")
    raw_steps = _require(document, "steps", list, "manual")
    if not raw_steps:
        raise EmptyManual(f"manual '{manual_id}' has no steps")

    entities: list[ThemeEntity] = []
    summary, summary_spans = _strip_markup(raw_summary, f"{manual_id}/summary")
    for surface, span in summary_spans:
        entities.append(ThemeEntity(surface, normalize_entity(surface), SUMMARY_UNIT, span))

    steps: list[StepInstruction] = []
    for pos, raw in enumerate(raw_steps):
        where = f"{manual_id}/steps[{pos}]"
        if not isinstance(raw, dict):
            raise SchemaError(f"{where}: step must be an object")
        index = _require(raw, "index", int, where)
        if index != pos + 1:
            raise SchemaError(
                f"{manual_id}: non-contiguous step indices (expected {pos + 1}, got {index})"
            )
        sentences = _require(raw, "instructions", list, where)
        if not sentences or not all(isinstance(s, str) and s for s in sentences):
            raise SchemaError(f"{where}: instructions must be a non-empty list of strings")
        image_ref = raw.get("image_ref")
        if image_ref is not None and not isinstance(image_ref, str):
            raise SchemaError(f"{where}: image_ref must be a string or null")
        piece_ids = raw.get("piece_ids", [])
        if not isinstance(piece_ids, list) or not all(isinstance(p, str) for p in piece_ids):
            raise SchemaError(f"{where}: piece_ids must be a list of strings")

        clean_sentences: list[str] = []
        offset = 0
        for si, sentence in enumerate(sentences):
            if "\n" in sentence:
                raise SchemaError(f"{where}: instruction sentences must not contain newlines")
            clean, spans = _strip_markup(sentence, f"{where}[{si}]")
            for surface, (a, b) in spans:
                entities.append(
                    ThemeEntity(surface, normalize_entity(surface), index, (offset + a, offset + b))
                )
            clean_sentences.append(clean)
            offset += len(clean) + 1  # joined with "\n"
        steps.append(
            StepInstruction(
                index=index,
                instructions=tuple(clean_sentences),
                image_ref=image_ref,
                piece_ids=tuple(piece_ids),
            )
        )

    return InstructionManual(
        id=manual_id,
        title=title,
        summary=summary,
        steps=tuple(steps),
        theme_entities=tuple(entities),
    )


def _reinsert_markup(clean: str, spans: Sequence[tuple[int, int]]) -> str:
    out = clean
    for a, b in sorted(spans, reverse=True):
        out = out[:a] + "[[" + out[a:b] + "]]" + out[b:]
    return out


def serialize_manual(manual: InstructionManual) -> dict:
    """Rebuild the interchange document, reinserting [[entity]] markup."""
    by_unit: dict[str | int, list[tuple[int, int]]] = {}
    for ent in manual.theme_entities:
        by_unit.setdefault(ent.unit, []).append(ent.span)

    steps_out = []
    for step in manual.steps:
        joined = _reinsert_markup(step.joined_text(), by_unit.get(step.index, []))
        steps_out.append(
            {
                "index": step.index,
                "instructions": joined.split("\n"),
                "image_ref": step.image_ref,
                "piece_ids": list(step.piece_ids),
            }
        )
    return {
        "id": manual.id,
        "title": manual.title,
        "summary": _reinsert_markup(manual.summary, by_unit.get(SUMMARY_UNIT, [])),
        "steps": steps_out,
    }


def load_manual(path: str | Path) -> InstructionManual:
    return parse_manual(Path(path).read_text(encoding="utf-8"))


def load_manual_dir(directory: str | Path) -> list[InstructionManual]:
    """Parse every *.json manual in a directory, sorted by filename."""
    paths = sorted(Path(directory).glob("*.json"))
    manuals = []
    for p in paths:
        try:
            manuals.append(load_manual(p))
        except SchemaError as exc:
            raise SchemaError(f"{p.name}: {exc}") from exc
    return manuals


def chunk_manual(manual: InstructionManual, chunk_size: int = DEFAULT_CHUNK_SIZE) -> list[ManualChunk]:
    """Partition steps into runs of chunk_size, each carrying the summary."""
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1")
    chunks = []
    for ci in range(math.ceil(len(manual.steps) / chunk_size)):
        chunks.append(
            ManualChunk(
                manual_id=manual.id,
                chunk_index=ci,
                summary=manual.summary,
                steps=manual.steps[ci * chunk_size : (ci + 1) * chunk_size],
            )
        )
    return chunks


def render_chunk_text(chunk: ManualChunk) -> str:
    """Human-readable grounding text: summary plus numbered step lines."""
    lines = [f"Summary: {chunk.summary}"]
    for step in chunk.steps:
        body = " ".join(step.instructions)
        lines.append(f"Step {step.index}: {body}")
    return "\n".join(lines)


def extract_theme_lexicon(manuals: Iterable[InstructionManual]) -> list[str]:
    """Deduplicated, sorted list of normalized theme-entity strings."""
    return sorted({ent.normalized for m in manuals for ent in m.theme_entities})


def corpus_stats(
    manuals: Sequence[InstructionManual],
    tokenizer: Callable[[str], list[str]],
) -> CorpusStats:
    """Count manuals, steps, tokens and entities with the shared tokenizer.

    total_tokens counts summary plus instruction tokens; unique_tokens is the
    vocabulary size over the same text. theme_entity_count is the lexicon
    size (unique normalized entities); entity_occurrences counts every
    highlighted span.
    """
    if not manuals:
        raise ValueError("need at least one manual")
    total_steps = 0
    total_tokens = 0
    vocab: set[str] = set()
    occurrences = 0
    for m in manuals:
        total_steps += len(m.steps)
        occurrences += len(m.theme_entities)
        for text in (m.summary, *(s.joined_text() for s in m.steps)):
            toks = tokenizer(text)
            total_tokens += len(toks)
            vocab.update(toks)
    return CorpusStats(
        manual_count=len(manuals),
        total_steps=total_steps,
        total_tokens=total_tokens,
        unique_tokens=len(vocab),
        theme_entity_count=len(extract_theme_lexicon(manuals)),
        entity_occurrences=occurrences,
        avg_steps_per_manual=total_steps / len(manuals),
    )
