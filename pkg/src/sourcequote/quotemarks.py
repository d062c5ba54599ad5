"""Quotation-mark scanning shared by the corpus model, filters, and annotator.

Only the double-quote family is considered: straight ``"`` plus the curly
pair ``“ ”``. Straight marks pair up sequentially; curly marks must nest.
"""

from __future__ import annotations

STRAIGHT = '"'
CURLY_OPEN = "“"
CURLY_CLOSE = "”"
MARKS = frozenset((STRAIGHT, CURLY_OPEN, CURLY_CLOSE))


def is_paired(text: str) -> bool:
    """True iff straight quotes come in pairs and curly quotes nest properly."""
    if text.count(STRAIGHT) % 2 != 0:
        return False
    depth = 0
    for ch in text:
        if ch == CURLY_OPEN:
            depth += 1
        elif ch == CURLY_CLOSE:
            depth -= 1
            if depth < 0:
                return False
    return depth == 0


def quoted_spans(text: str) -> list[tuple[int, int]]:
    """Outermost quoted regions as (start, end) offsets, marks included.

    Unterminated regions are ignored; callers that need a guarantee should
    check :func:`is_paired` first.
    """
    spans: list[tuple[int, int]] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == STRAIGHT:
            j = text.find(STRAIGHT, i + 1)
            if j == -1:
                break
            spans.append((i, j + 1))
            i = j + 1
        elif ch == CURLY_OPEN:
            depth = 1
            j = i + 1
            while j < n and depth > 0:
                if text[j] == CURLY_OPEN:
                    depth += 1
                elif text[j] == CURLY_CLOSE:
                    depth -= 1
                j += 1
            if depth != 0:
                break
            spans.append((i, j))
            i = j
        else:
            i += 1
    return spans


def quote_type_of(text: str) -> str:
    """Classify a quote span as direct, indirect, or mixed.

    Direct means the span starts and ends with quotation marks and every
    token lies inside a quoted region; indirect means no marks at all.
    """
    stripped = text.strip()
    if not any(ch in MARKS for ch in stripped):
        return "indirect"
    spans = quoted_spans(stripped)
    if (
        spans
        and stripped[0] in (STRAIGHT, CURLY_OPEN)
        and stripped[-1] in (STRAIGHT, CURLY_CLOSE)
        and not _has_outside_tokens(stripped, spans)
    ):
        return "direct"
    return "mixed"


def _has_outside_tokens(text: str, spans: list[tuple[int, int]]) -> bool:
    outside = []
    prev = 0
    for start, end in spans:
        outside.append(text[prev:start])
        prev = end
    outside.append(text[prev:])
    return any(piece.strip(" \t,;:.!?-") for piece in outside)
