"""Independent brute-force oracles for the metric suite.

Deliberately naive: n-grams as plain lists scanned with .count(), LCS as a
full dynamic-programming table. Shares only the documented conventions
(epsilon floor, brevity penalty, empty-input rules) with the real
implementation, never its code.
"""

from __future__ import annotations

import math

EPS = 1e-9


def ngram_list(tokens: list[str], n: int) -> list[tuple[str, ...]]:
    return [tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]


def oracle_bleu4(candidate: list[str], reference: list[str]) -> float:
    if not candidate:
        return 0.0
    precisions = []
    for n in range(1, 5):
        cand = ngram_list(candidate, n)
        ref = ngram_list(reference, n)
        if not cand:
            precisions.append(EPS)
            continue
        clipped = 0
        for gram in set(cand):
            clipped += min(cand.count(gram), ref.count(gram))
        precisions.append(clipped / len(cand) if clipped else EPS)
    product = 1.0
    for p in precisions:
        product *= p
    bp = 1.0 if len(candidate) >= len(reference) else math.exp(1.0 - len(reference) / len(candidate))
    return bp * product ** 0.25


def oracle_rouge_n(candidate: list[str], reference: list[str], n: int) -> float:
    ref = ngram_list(reference, n)
    if not ref:
        return 0.0
    cand = ngram_list(candidate, n)
    matched = 0
    for gram in set(ref):
        matched += min(ref.count(gram), cand.count(gram))
    return matched / len(ref)


def oracle_lcs(a: list[str], b: list[str]) -> int:
    table = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                table[i][j] = table[i - 1][j - 1] + 1
            else:
                table[i][j] = max(table[i - 1][j], table[i][j - 1])
    return table[len(a)][len(b)]


def oracle_rouge_l(candidate: list[str], reference: list[str]) -> float:
    if not reference or not candidate:
        return 0.0
    return oracle_lcs(candidate, reference) / len(reference)
