"""Lenient parsing and rendering of inline span tags embedded in plain text.

A marker is recognized only as an exact, case-sensitive ``<Label>`` or
``</Label>`` match against a configured label set. Everything else, including
unknown labels, attribute-bearing tags, and stray angle brackets, passes
through as literal text. Parsing is total: malformed input never raises, it
produces warnings on the returned document instead.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

_MARKER_RE = re.compile(r"<(/?)([^<>\s]+)>")
_LABEL_RE = re.compile(r"[^<>\s]+")


class WarningKind(str, Enum):
    UNCLOSED_TAG = "UnclosedTag"
    STRAY_CLOSE_TAG = "StrayCloseTag"
    UNKNOWN_LABEL = "UnknownLabel"
    NESTED_FLATTENED = "NestedFlattened"


@dataclass(frozen=True)
class ParseWarning:
    """A recoverable anomaly, anchored to the offending marker in the tagged input."""

    kind: WarningKind
    char_offset: int


@dataclass(frozen=True, order=True)
class Span:
    """A labeled half-open character range [start_char, end_char) over plain text."""

    label: str
    start_char: int
    end_char: int


@dataclass
class SpanDoc:
    """Plain text plus non-overlapping labeled spans, sorted by start offset."""

    plain_text: str
    spans: list[Span] = field(default_factory=list)
    warnings: list[ParseWarning] = field(default_factory=list)

    def labels(self) -> set[str]:
        return {s.label for s in self.spans}


class InvalidSpanDocError(ValueError):
    """Raised when a SpanDoc violates its ordering, bounds, or disjointness rules."""


def _check_labels(allowed_labels: set[str]) -> None:
    if not allowed_labels:
        raise ValueError("allowed_labels must be nonempty")
    for label in allowed_labels:
        if not label or not _LABEL_RE.fullmatch(label):
            raise ValueError(
                f"invalid label {label!r}: must be nonempty with no whitespace or angle brackets"
            )


def parse_tagged(text: str, allowed_labels: set[str]) -> SpanDoc:
    """Extract labeled spans from inline-tagged text.

    Offsets in ``plain_text`` count Unicode code points. Salvage rules:

    - an open tag with no close extends its span to the end of the text
      (UnclosedTag warning);
    - a close tag with no open is removed and produces no span
      (StrayCloseTag warning);
    - nested or overlapping tags are flattened to the union of their ranges
      (NestedFlattened warning);
    - markers whose label is not in ``allowed_labels`` remain literal text
      (one UnknownLabel warning per distinct label, at its first occurrence).
    """
    _check_labels(allowed_labels)

    parts: list[str] = []
    plain_len = 0
    warnings: list[ParseWarning] = []
    # label -> (nesting depth, plain-text start, input offset of first open)
    open_depth: dict[str, int] = {}
    open_start: dict[str, int] = {}
    open_input_pos: dict[str, int] = {}
    # (start, end, label, input offset of the opening marker)
    raw_spans: list[tuple[int, int, str, int]] = []
    seen_unknown: set[str] = set()

    cursor = 0
    for m in _MARKER_RE.finditer(text):
        chunk = text[cursor : m.start()]
        parts.append(chunk)
        plain_len += len(chunk)
        cursor = m.end()

        closing = m.group(1) == "/"
        label = m.group(2)
        if label not in allowed_labels:
            if label not in seen_unknown:
                seen_unknown.add(label)
                warnings.append(ParseWarning(WarningKind.UNKNOWN_LABEL, m.start()))
            parts.append(m.group(0))
            plain_len += len(m.group(0))
            continue

        if not closing:
            depth = open_depth.get(label, 0)
            if depth == 0:
                open_start[label] = plain_len
                open_input_pos[label] = m.start()
            else:
                warnings.append(ParseWarning(WarningKind.NESTED_FLATTENED, m.start()))
            open_depth[label] = depth + 1
        else:
            depth = open_depth.get(label, 0)
            if depth == 0:
                warnings.append(ParseWarning(WarningKind.STRAY_CLOSE_TAG, m.start()))
            elif depth == 1:
                raw_spans.append((open_start[label], plain_len, label, open_input_pos[label]))
                open_depth[label] = 0
            else:
                open_depth[label] = depth - 1

    tail = text[cursor:]
    parts.append(tail)
    plain_len += len(tail)

    for label, depth in open_depth.items():
        if depth > 0:
            warnings.append(ParseWarning(WarningKind.UNCLOSED_TAG, open_input_pos[label]))
            raw_spans.append((open_start[label], plain_len, label, open_input_pos[label]))

    # Enforce pairwise disjointness. Same-label spans cannot overlap (the depth
    # counter already unions them); spans of different labels that collide are
    # clipped in open-marker order, dropping any span the clip empties.
    raw_spans.sort(key=lambda s: (s[0], s[3]))
    spans: list[Span] = []
    prev_end = 0
    for start, end, label, input_pos in raw_spans:
        if start < prev_end:
            warnings.append(ParseWarning(WarningKind.NESTED_FLATTENED, input_pos))
            start = prev_end
        if start >= end:
            continue
        spans.append(Span(label, start, end))
        prev_end = end

    warnings.sort(key=lambda w: w.char_offset)
    return SpanDoc(plain_text="".join(parts), spans=spans, warnings=warnings)


def render_tagged(doc: SpanDoc) -> str:
    """Insert ``<label>``/``</label>`` markers at span boundaries of the plain text.

    Inverse of :func:`parse_tagged` up to warnings: re-parsing the result with
    the document's labels reproduces plain text and spans exactly.
    """
    _validate_doc(doc)
    parts: list[str] = []
    cursor = 0
    for span in doc.spans:
        parts.append(doc.plain_text[cursor : span.start_char])
        parts.append(f"<{span.label}>")
        parts.append(doc.plain_text[span.start_char : span.end_char])
        parts.append(f"</{span.label}>")
        cursor = span.end_char
    parts.append(doc.plain_text[cursor:])
    return "".join(parts)


def strip_tags(text: str, allowed_labels: set[str]) -> str:
    """Plain text with every recognized marker removed; lenient like parse_tagged."""
    return parse_tagged(text, allowed_labels).plain_text


def _validate_doc(doc: SpanDoc) -> None:
    prev_end = 0
    for span in doc.spans:
        if not span.label or not _LABEL_RE.fullmatch(span.label):
            raise InvalidSpanDocError(f"invalid span label {span.label!r}")
        if not (0 <= span.start_char < span.end_char <= len(doc.plain_text)):
            raise InvalidSpanDocError(
                f"span [{span.start_char}, {span.end_char}) out of bounds or empty"
            )
        if span.start_char < prev_end:
            raise InvalidSpanDocError("spans must be sorted and pairwise disjoint")
        prev_end = span.end_char
