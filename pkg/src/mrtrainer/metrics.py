"""Overlap and informativeness metrics for trainer-response evaluation.

Scores are kept on the [0, 1] scale internally; rendered tables multiply by
100. Conventions that the reference definitions leave open (tokenizer,
sentence-level BLEU averaging, epsilon smoothing, recall-oriented ROUGE,
ABSTAIN on empty entity references) are fixed here so runs stay comparable.
"""

from __future__ import annotations

import json
import math
import re
import statistics
from collections import Counter
from dataclasses import dataclass, fields
from typing import Iterable, Sequence

BLEU_EPS = 1e-9

# Sentinel for entity-accuracy pairs whose reference mentions no lexicon
# entry; such pairs are excluded from corpus means instead of scoring 0.
class _Abstain:
    def __repr__(self) -> str:  # pragma: no cover
        return "ABSTAIN"


ABSTAIN = _Abstain()

_EDGE_PUNCT = re.compile(r"^\W+|\W+$", re.UNICODE)


class LengthMismatch(ValueError):
    """Predictions and references differ in length."""


def tokenize(text: str) -> list[str]:
    """Case-fold, split on whitespace, strip edge punctuation.

    Tokens that are punctuation-only disappear; inner punctuation (as in
    "1x2" or "o'clock") survives.
    """
    out: list[str] = []
    for raw in text.casefold().split():
        tok = _EDGE_PUNCT.sub("", raw)
        if tok:
            out.append(tok)
    return out


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu4(candidate: Sequence[str], reference: Sequence[str]) -> float:
    """Sentence-level BLEU with clipped 1..4-gram precisions.

    Geometric mean of the four modified precisions (zero precisions floored
    at BLEU_EPS) times the brevity penalty. Empty candidates score 0.
    """
    if not candidate:
        return 0.0
    log_sum = 0.0
    for n in range(1, 5):
        cand = _ngrams(candidate, n)
        total = sum(cand.values())
        if total == 0:
            p = BLEU_EPS
        else:
            ref = _ngrams(reference, n)
            clipped = sum(min(c, ref[g]) for g, c in cand.items())
            p = clipped / total if clipped else BLEU_EPS
        log_sum += math.log(p)
    if len(candidate) < len(reference):
        bp = math.exp(1.0 - len(reference) / len(candidate))
    else:
        bp = 1.0
    return bp * math.exp(log_sum / 4.0)


def rouge_n(candidate: Sequence[str], reference: Sequence[str], n: int) -> float:
    """N-gram recall: clipped matches over reference n-gram count."""
    if n < 1:
        raise ValueError("n must be >= 1")
    ref = _ngrams(reference, n)
    total = sum(ref.values())
    if total == 0:
        return 0.0
    cand = _ngrams(candidate, n)
    matched = sum(min(c, cand[g]) for g, c in ref.items())
    return matched / total


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    """Longest common subsequence length, O(len(a)*len(b)) rolling rows."""
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                cur.append(prev[j - 1] + 1)
            else:
                cur.append(max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: Sequence[str], reference: Sequence[str], f1: bool = False) -> float:
    """LCS-based score; recall (LCS/|reference|) by default, F1 on request."""
    if not reference or not candidate:
        return 0.0
    lcs = lcs_length(candidate, reference)
    recall = lcs / len(reference)
    if not f1:
        return recall
    precision = lcs / len(candidate)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _contains_sequence(haystack: Sequence[str], needle: Sequence[str]) -> bool:
    k = len(needle)
    if k == 0 or k > len(haystack):
        return False
    target = tuple(needle)
    return any(tuple(haystack[i : i + k]) == target for i in range(len(haystack) - k + 1))


def entity_acc(
    candidate: Sequence[str],
    reference: Sequence[str],
    lexicon: Iterable[str],
) -> float | _Abstain:
    """Fraction of reference-mentioned lexicon entries also in the candidate.

    A mention is a contiguous token-sequence match of the tokenized entry
    (single case-insensitive token for one-word entries such as tool names).
    Returns ABSTAIN when the reference mentions no entry at all.
    """
    needles = {entry: tuple(tokenize(entry)) for entry in lexicon}
    in_ref = {e for e, toks in needles.items() if toks and _contains_sequence(reference, toks)}
    if not in_ref:
        return ABSTAIN
    hit = sum(1 for e in in_ref if _contains_sequence(candidate, needles[e]))
    return hit / len(in_ref)


@dataclass
class MetricReport:
    """Per-model corpus scores, all on [0, 1]."""

    model_id: str
    bleu4: float
    rouge1: float
    rouge2: float
    rougeL: float
    tool_acc: float
    theme_acc: float

    METRIC_NAMES = ("bleu4", "rouge1", "rouge2", "rougeL", "tool_acc", "theme_acc")

    def __post_init__(self) -> None:
        for name in self.METRIC_NAMES:
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "MetricReport":
        return cls(**{f.name: d[f.name] for f in fields(cls)})


def evaluate(
    predictions: Sequence[str],
    references: Sequence[str],
    tool_lexicon: Iterable[str],
    theme_lexicon: Iterable[str],
    model_id: str = "model",
) -> MetricReport:
    """Corpus means of the six metrics over aligned prediction/reference pairs.

    ABSTAIN pairs drop out of the ToolACC/ThemeACC denominators; if every
    pair abstains the accuracy is reported as 0.
    """
    if len(predictions) != len(references):
        raise LengthMismatch(f"{len(predictions)} predictions vs {len(references)} references")
    if not predictions:
        raise LengthMismatch("empty evaluation set")
    tools = list(tool_lexicon)
    themes = list(theme_lexicon)
    bleus, r1s, r2s, rls, tool_scores, theme_scores = [], [], [], [], [], []
    for pred, ref in zip(predictions, references):
        c, r = tokenize(pred), tokenize(ref)
        bleus.append(bleu4(c, r))
        r1s.append(rouge_n(c, r, 1))
        r2s.append(rouge_n(c, r, 2))
        rls.append(rouge_l(c, r))
        t = entity_acc(c, r, tools)
        if t is not ABSTAIN:
            tool_scores.append(t)
        t = entity_acc(c, r, themes)
        if t is not ABSTAIN:
            theme_scores.append(t)
    mean = lambda xs: sum(xs) / len(xs) if xs else 0.0
    return MetricReport(
        model_id=model_id,
        bleu4=mean(bleus),
        rouge1=mean(r1s),
        rouge2=mean(r2s),
        rougeL=mean(rls),
        tool_acc=mean(tool_scores),
        theme_acc=mean(theme_scores),
    )


def metric_stddev(reports: Sequence[MetricReport]) -> dict[str, float]:
    """Population standard deviation per metric column, on the x100 scale."""
    if len(reports) < 2:
        raise ValueError("need at least 2 reports")
    return {
        name: statistics.pstdev(getattr(r, name) * 100.0 for r in reports)
        for name in MetricReport.METRIC_NAMES
    }


_COLUMNS = (
    ("bleu4", "BLEU-4"),
    ("rouge1", "ROUGE-1"),
    ("rouge2", "ROUGE-2"),
    ("rougeL", "ROUGE-L"),
    ("tool_acc", "ToolACC"),
    ("theme_acc", "ThemeACC"),
)


def render_table(reports: Sequence[MetricReport], stddev_row: bool = False) -> str:
    """Aligned text table of x100 scores, optionally with a stddev footer."""
    width = max([len("Model")] + [len(r.model_id) for r in reports] + [len("stddev")])
    header = f"{'Model':<{width}}  " + "  ".join(f"{label:>8}" for _, label in _COLUMNS)
    lines = [header]
    for r in reports:
        cells = "  ".join(f"{getattr(r, name) * 100.0:8.2f}" for name, _ in _COLUMNS)
        lines.append(f"{r.model_id:<{width}}  {cells}")
    if stddev_row:
        sd = metric_stddev(reports)
        cells = "  ".join(f"{sd[name]:8.2f}" for name, _ in _COLUMNS)
        lines.append(f"{'stddev':<{width}}  {cells}")
    return "\n".join(lines)


def load_report(path: str) -> MetricReport:
    with open(path, encoding="utf-8") as fh:
        return MetricReport.from_dict(json.load(fh))


def save_report(report: MetricReport, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")
