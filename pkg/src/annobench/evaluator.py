"""Token-level scoring of tagged predictions against a tagged gold standard.

Both sides are parsed, tokenized, and projected onto binary tagged/untagged
sequences; a longest-common-subsequence alignment guards against prediction
text that drifts from the source before TP/FP/FN counting.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field, replace
from enum import Enum

from .tagspan import SpanDoc, parse_tagged


class TokenSpanMismatchError(ValueError):
    """A token's character range falls outside its source text."""


class LengthMismatchError(ValueError):
    """Label sequence or alignment indices do not fit the token streams."""


class NoEvaluableSamplesError(ValueError):
    """Every sample was excluded from aggregation."""


class MetricFlag(str, Enum):
    ALIGNMENT_DIVERGENT = "AlignmentDivergent"
    EMPTY_GOLD = "EmptyGold"


@dataclass(frozen=True)
class Token:
    text: str
    start_char: int
    end_char: int


@dataclass(frozen=True)
class Alignment:
    """Matched (gold_index, pred_index) pairs, strictly increasing in both."""

    pairs: tuple[tuple[int, int], ...]
    coverage: float


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn
        )


@dataclass(frozen=True)
class SampleMetrics:
    precision: float
    recall: float
    f1: float
    counts: ConfusionCounts
    alignment_coverage: float
    flags: frozenset[MetricFlag] = field(default_factory=frozenset)


def _is_word_char(ch: str) -> bool:
    return unicodedata.category(ch)[0] in ("L", "N", "M")


def _is_letter(ch: str) -> bool:
    return unicodedata.category(ch)[0] == "L"


def tokenize(text: str) -> list[Token]:
    """Deterministic segmentation of plain text.

    Maximal runs of letters, digits, and combining marks form word tokens; a
    single apostrophe flanked by letters stays word-internal ("don't"). Any
    other non-whitespace character is its own single-character token.
    Whitespace separates tokens and is discarded.
    """
    tokens: list[Token] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if _is_word_char(ch):
            j = i + 1
            while j < n:
                c = text[j]
                if _is_word_char(c):
                    j += 1
                elif (
                    c == "'"
                    and j + 1 < n
                    and _is_letter(text[j - 1])
                    and _is_letter(text[j + 1])
                ):
                    j += 1
                else:
                    break
            tokens.append(Token(text[i:j], i, j))
            i = j
        else:
            tokens.append(Token(ch, i, i + 1))
            i += 1
    return tokens


def project_labels(doc: SpanDoc, tokens: list[Token]) -> list[int]:
    """Binary sequence over tokens: 1 iff the token's range intersects any span."""
    n = len(doc.plain_text)
    for tok in tokens:
        if not (0 <= tok.start_char < tok.end_char <= n):
            raise TokenSpanMismatchError(
                f"token [{tok.start_char}, {tok.end_char}) outside text of length {n}"
            )
    labels = []
    for tok in tokens:
        hit = any(
            tok.start_char < span.end_char and span.start_char < tok.end_char
            for span in doc.spans
        )
        labels.append(1 if hit else 0)
    return labels


def align(gold_tokens: list[Token], pred_tokens: list[Token]) -> Alignment:
    """Longest common subsequence over token texts, preferring earlier gold indices.

    coverage = matched pairs / max(1, gold token count).
    """
    g = [t.text for t in gold_tokens]
    p = [t.text for t in pred_tokens]
    n, m = len(g), len(p)
    # dp[i][j] = LCS length of g[i:] vs p[j:]
    dp = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        row, below = dp[i], dp[i + 1]
        gi = g[i]
        for j in range(m - 1, -1, -1):
            if gi == p[j]:
                row[j] = below[j + 1] + 1
            else:
                right = row[j + 1]
                down = below[j]
                row[j] = down if down >= right else right
    pairs: list[tuple[int, int]] = []
    i = j = 0
    while i < n and j < m:
        if g[i] == p[j] and dp[i][j] == dp[i + 1][j + 1] + 1:
            pairs.append((i, j))
            i += 1
            j += 1
        elif dp[i][j + 1] >= dp[i + 1][j]:
            # skipping a prediction token keeps the current gold token in play
            j += 1
        else:
            i += 1
    return Alignment(pairs=tuple(pairs), coverage=len(pairs) / max(1, n))


def confusion(
    gold_seq: list[int], pred_seq: list[int], alignment: Alignment
) -> ConfusionCounts:
    """Cell counts over aligned pairs plus unaligned leftovers.

    Unaligned gold tokens labeled 1 count as FN, unaligned prediction tokens
    labeled 1 as FP; unaligned tokens labeled 0 on either side count as TN.
    """
    for gi, pi in alignment.pairs:
        if gi >= len(gold_seq) or pi >= len(pred_seq):
            raise LengthMismatchError("alignment pair outside label sequences")
    tp = fp = fn = tn = 0
    aligned_g = {gi for gi, _ in alignment.pairs}
    aligned_p = {pi for _, pi in alignment.pairs}
    for gi, pi in alignment.pairs:
        gl, pl = gold_seq[gi], pred_seq[pi]
        if gl and pl:
            tp += 1
        elif pl:
            fp += 1
        elif gl:
            fn += 1
        else:
            tn += 1
    for gi, gl in enumerate(gold_seq):
        if gi not in aligned_g:
            fn += gl
            tn += 1 - gl
    for pi, pl in enumerate(pred_seq):
        if pi not in aligned_p:
            fp += pl
            tn += 1 - pl
    return ConfusionCounts(tp, fp, fn, tn)


def metrics(counts: ConfusionCounts, coverage: float = 1.0) -> SampleMetrics:
    """Precision, recall, and their harmonic mean from the counts.

    Zero-denominator conventions: a side with an empty denominator scores 1
    only when the other side is empty too (mutual emptiness is perfect
    agreement), otherwise 0; F1 is 0 when P + R = 0.
    """
    tp, fp, fn = counts.tp, counts.fp, counts.fn
    if tp + fp == 0:
        precision = 1.0 if tp + fn == 0 else 0.0
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall = 1.0 if tp + fp == 0 else 0.0
    else:
        recall = tp / (tp + fn)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    flags = set()
    if coverage < 0.5:
        flags.add(MetricFlag.ALIGNMENT_DIVERGENT)
    return SampleMetrics(precision, recall, f1, counts, coverage, frozenset(flags))


def evaluate_pair(gold: str, pred: str, labels: set[str]) -> SampleMetrics:
    """Full pipeline: parse, tokenize, project, align, count, score.

    Total on any pair of strings. A gold side that is empty (or whitespace
    only) marks the result EmptyGold so aggregation can exclude it.
    """
    gold_doc = parse_tagged(gold, labels)
    pred_doc = parse_tagged(pred, labels)
    gold_tokens = tokenize(gold_doc.plain_text)
    pred_tokens = tokenize(pred_doc.plain_text)
    gold_seq = project_labels(gold_doc, gold_tokens)
    pred_seq = project_labels(pred_doc, pred_tokens)
    alignment = align(gold_tokens, pred_tokens)
    result = metrics(confusion(gold_seq, pred_seq, alignment), alignment.coverage)
    if not gold.strip():
        result = replace(result, flags=result.flags | {MetricFlag.EMPTY_GOLD})
    return result


def _evaluable(samples: list[SampleMetrics]) -> list[SampleMetrics]:
    kept = [s for s in samples if MetricFlag.EMPTY_GOLD not in s.flags]
    if not kept:
        raise NoEvaluableSamplesError("no samples left after excluding empty-gold ones")
    return kept


def macro_average(samples: list[SampleMetrics]) -> tuple[float, float, float]:
    """Unweighted mean of per-sample precision, recall, and F1."""
    kept = _evaluable(samples)
    n = len(kept)
    return (
        sum(s.precision for s in kept) / n,
        sum(s.recall for s in kept) / n,
        sum(s.f1 for s in kept) / n,
    )


def micro_average(samples: list[SampleMetrics]) -> tuple[float, float, float]:
    """Metrics over counts pooled across samples; exported alongside the macro view."""
    kept = _evaluable(samples)
    pooled = ConfusionCounts()
    for s in kept:
        pooled = pooled + s.counts
    m = metrics(pooled)
    return (m.precision, m.recall, m.f1)
