"""Rule-based quote extraction, quote typing, and training-format exporters.

The extractor handles direct quotes only: it takes the quotation-mark
delimited spans as the quote and attributes them to the nearest capitalized
token run adjacent to a trigger verb outside the quotes. No parser is
involved; abstention (returning None) is the correct behavior for indirect
speech.
"""

from __future__ import annotations

import json
import re
import string
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from . import quotemarks
from .errors import MissingPrediction, SpanNotFound, UnbalancedQuotes
from .pipeline import TriggerLexicon
from .records import QuoteRecord

_PUNCT = frozenset(string.punctuation) | frozenset("“”‘’—–…")
_WORD_RE = re.compile(r"\S+")

BIO_TAGS = ("B-S", "I-S", "B-Q", "I-Q", "O")
SOURCE_MODES = ("true_source", "predicted_source", "masked")


class QuoteType(Enum):
    DIRECT = "direct"
    INDIRECT = "indirect"
    MIXED = "mixed"


@dataclass(frozen=True)
class BioSequence:
    tokens: tuple[str, ...]
    tags: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.tokens) != len(self.tags):
            raise ValueError("tokens and tags must have equal length")
        prev = "O"
        for tag in self.tags:
            if tag not in BIO_TAGS:
                raise ValueError(f"unknown tag {tag}")
            if tag == "I-S" and prev not in ("B-S", "I-S"):
                raise ValueError("I-S must follow B-S or I-S")
            if tag == "I-Q" and prev not in ("B-Q", "I-Q"):
                raise ValueError("I-Q must follow B-Q or I-Q")
            prev = tag
        super().__setattr__("tokens", tuple(self.tokens))
        super().__setattr__("tags", tuple(self.tags))


@dataclass(frozen=True)
class QaExample:
    question: str
    context_l: str
    context_s: str
    context_r: str
    answer_start: int
    answer_text: str
    source_mode: str


def detach_tokens(text: str) -> list[str]:
    """Whitespace split with edge punctuation detached into its own tokens."""
    out: list[str] = []
    for chunk in text.split():
        lead: list[str] = []
        while chunk and chunk[0] in _PUNCT:
            lead.append(chunk[0])
            chunk = chunk[1:]
        tail: list[str] = []
        while chunk and chunk[-1] in _PUNCT:
            tail.append(chunk[-1])
            chunk = chunk[:-1]
        out.extend(lead)
        if chunk:
            out.append(chunk)
        out.extend(reversed(tail))
    return out


def classify_quote_type(record: QuoteRecord) -> QuoteType:
    """Type a quote by the number and position of its quotation marks."""
    return QuoteType(quotemarks.quote_type_of(record.quote))


def _outside_tokens(text: str) -> list[tuple[str, int, int]]:
    """Tokens (with offsets) that do not overlap any quoted span."""
    spans = quotemarks.quoted_spans(text)
    tokens = []
    for m in _WORD_RE.finditer(text):
        if any(m.start() < end and m.end() > start for start, end in spans):
            continue
        tokens.append((m.group(), m.start(), m.end()))
    return tokens


def _strip_edges(token: str) -> str:
    return token.strip("".join(_PUNCT))


def _is_capitalized(token: str) -> bool:
    core = _strip_edges(token)
    return bool(core) and core[0].isupper()


# punctuation that ends a capitalized run; periods pass so abbreviated
# titles like "Dr." stay inside the run
_CLAUSE_END = frozenset(",;:!?)")


def _ends_clause(token: str) -> bool:
    return bool(token) and token[-1] in _CLAUSE_END


def _capitalized_run(
    tokens: Sequence[tuple[str, int, int]], start: int, step: int
) -> list[str] | None:
    run: list[str] = []
    i = start
    while 0 <= i < len(tokens) and _is_capitalized(tokens[i][0]):
        run.append(_strip_edges(tokens[i][0]))
        if step > 0 and _ends_clause(tokens[i][0]):
            break
        if step < 0 and 0 <= i - 1 < len(tokens) and _ends_clause(tokens[i - 1][0]):
            break
        i += step
    if not run:
        return None
    return run if step > 0 else list(reversed(run))


def extract_direct(
    sentence_text: str, lexicon: TriggerLexicon
) -> tuple[str, str] | None:
    """Extract (source, quote) from a direct-quote sentence, or abstain.

    The quote is the concatenation of all quotation-mark delimited segments
    (marks included). The source is the capitalized token run adjacent to the
    first trigger verb found outside the quotes, looking after the verb
    first, then before it. Returns None when there are no quote marks, no
    trigger outside the quotes, or no adjacent capitalized run.
    """
    if not quotemarks.is_paired(sentence_text):
        raise UnbalancedQuotes(f"unpaired quotation marks: {sentence_text!r}")
    spans = quotemarks.quoted_spans(sentence_text)
    if not spans:
        return None
    outside = _outside_tokens(sentence_text)
    quote = " ".join(sentence_text[s:e] for s, e in spans)
    for i, (token, _, _) in enumerate(outside):
        if _strip_edges(token).lower() not in lexicon:
            continue
        run = _capitalized_run(outside, i + 1, +1) or _capitalized_run(outside, i - 1, -1)
        if run:
            return " ".join(run), quote
    return None


def _find_subsequence(haystack: Sequence[str], needle: Sequence[str]) -> list[int]:
    if not needle or len(needle) > len(haystack):
        return []
    return [
        i
        for i in range(len(haystack) - len(needle) + 1)
        if list(haystack[i:i + len(needle)]) == list(needle)
    ]


def to_bio(record: QuoteRecord) -> BioSequence:
    """Tag the main sentence's tokens with source/quote BIO labels.

    The source and quote must be locatable as disjoint token subsequences of
    the main sentence (punctuation detached); otherwise SpanNotFound.
    """
    tokens = detach_tokens(record.main_sentence)
    source_tokens = detach_tokens(record.source_surface)
    quote_tokens = detach_tokens(record.quote)
    source_starts = _find_subsequence(tokens, source_tokens)
    quote_starts = _find_subsequence(tokens, quote_tokens)
    if not source_starts:
        raise SpanNotFound("source_surface tokens not found in main_sentence")
    if not quote_starts:
        raise SpanNotFound("quote tokens not found in main_sentence")
    placement = None
    for s in source_starts:
        s_range = range(s, s + len(source_tokens))
        for q in quote_starts:
            q_range = range(q, q + len(quote_tokens))
            if s_range.stop <= q_range.start or q_range.stop <= s_range.start:
                placement = (s_range, q_range)
                break
        if placement:
            break
    if placement is None:
        raise SpanNotFound("source and quote spans overlap everywhere they occur")
    s_range, q_range = placement
    tags = ["O"] * len(tokens)
    for j, idx in enumerate(s_range):
        tags[idx] = "B-S" if j == 0 else "I-S"
    for j, idx in enumerate(q_range):
        tags[idx] = "B-Q" if j == 0 else "I-Q"
    return BioSequence(tokens=tuple(tokens), tags=tuple(tags))


def decode_bio(seq: BioSequence) -> tuple[list[str], list[str]]:
    """Recover the (source tokens, quote tokens) encoded in a tag sequence."""
    source: list[str] = []
    quote: list[str] = []
    for token, tag in zip(seq.tokens, seq.tags):
        if tag in ("B-S", "I-S"):
            source.append(token)
        elif tag in ("B-Q", "I-Q"):
            quote.append(token)
    return source, quote


def to_qa(
    record: QuoteRecord,
    source_mode: str = "true_source",
    predicted_source: str | None = None,
) -> tuple[QaExample, QaExample]:
    """Build the source question and the quote question for one record.

    The context is ``left + " " + main + " " + right``; answer offsets index
    into that concatenation and always fall inside the main segment.
    """
    if source_mode not in SOURCE_MODES:
        raise ValueError(f"unknown source_mode {source_mode!r}")
    if source_mode == "predicted_source" and predicted_source is None:
        raise MissingPrediction("predicted_source mode requires a prediction")
    if source_mode == "true_source":
        who = record.source_surface
    elif source_mode == "predicted_source":
        who = predicted_source
    else:
        who = "they"

    main_offset = len(record.left_sentence) + 1
    source_example = QaExample(
        question="Who is the source?",
        context_l=record.left_sentence,
        context_s=record.main_sentence,
        context_r=record.right_sentence,
        answer_start=main_offset + record.main_sentence.index(record.source_surface),
        answer_text=record.source_surface,
        source_mode=source_mode,
    )
    quote_example = QaExample(
        question=f"What did {who} say?",
        context_l=record.left_sentence,
        context_s=record.main_sentence,
        context_r=record.right_sentence,
        answer_start=main_offset + record.main_sentence.index(record.quote),
        answer_text=record.quote,
        source_mode=source_mode,
    )
    return source_example, quote_example


def write_bio(sequences: Iterable[BioSequence], path) -> None:
    """Two-column token<TAB>tag lines, blank line between sentences."""
    with open(path, "w", encoding="utf-8") as fh:
        for seq in sequences:
            for token, tag in zip(seq.tokens, seq.tags):
                fh.write(f"{token}\t{tag}\n")
            fh.write("\n")


def write_qa(examples: Iterable[QaExample], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps({
                "question": ex.question,
                "context_l": ex.context_l,
                "context_s": ex.context_s,
                "context_r": ex.context_r,
                "answer_start": ex.answer_start,
                "answer_text": ex.answer_text,
            }, ensure_ascii=False) + "\n")
