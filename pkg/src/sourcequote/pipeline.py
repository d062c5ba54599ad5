"""Dataset construction: frame filtering, de-duplication, chronological split.

The input is pre-annotated sentence data (semantic-role frames plus entity
annotations); every step here is a deterministic filter or partition over
that input. De-duplication substitutes a shingle-overlap rule for a learned
duplicate classifier, which is out of scope.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from datetime import datetime
from typing import Iterable, Mapping, Sequence

from . import quotemarks
from .errors import BoundaryError, InvariantError, SchemaError, UnsortedStream
from .records import QuoteRecord, parse_timestamp

# Sources carrying any of these ontology classes are never experts.
EXCLUDED_SOURCE_CLASSES = frozenset({"Location", "Place", "Country"})


@dataclass(frozen=True)
class Span:
    start: int
    end: int

    def text(self, sentence: str) -> str:
        return sentence[self.start:self.end]


@dataclass(frozen=True)
class Frame:
    verb: Span
    verb_lemma: str | None
    subject: Span | None
    object: Span | None


@dataclass(frozen=True)
class EntityAnnotation:
    span: Span
    entity: str
    ontology_classes: tuple[str, ...]


@dataclass(frozen=True)
class SrlSentence:
    article_id: str
    sentence_text: str
    frames: tuple[Frame, ...]
    entity_annotations: tuple[EntityAnnotation, ...]
    published_at: datetime
    title: str
    # article metadata carried through to assembled records
    left_sentence: str = ""
    right_sentence: str = ""
    summary_first_sentence: str = ""
    keywords: tuple[str, ...] = ()
    categories: tuple[str, ...] = ()
    news_source: str = ""

    def __post_init__(self) -> None:
        n = len(self.sentence_text)
        for frame in self.frames:
            for span in (frame.verb, frame.subject, frame.object):
                if span is not None and not (0 <= span.start <= span.end <= n):
                    raise InvariantError("frame span out of sentence bounds")
        for ann in self.entity_annotations:
            if not (0 <= ann.span.start <= ann.span.end <= n):
                raise InvariantError("entity span out of sentence bounds")


@dataclass(frozen=True)
class TriggerLexicon:
    verbs: frozenset[str]

    def __post_init__(self) -> None:
        if not self.verbs:
            raise InvariantError("trigger lexicon is empty")
        if any(v != v.lower() for v in self.verbs):
            raise InvariantError("trigger lexicon entries must be lowercase")

    def __contains__(self, verb: str) -> bool:
        return verb in self.verbs


@dataclass(frozen=True)
class SplitBoundaries:
    train_end: datetime
    valid_test_start: datetime
    valid_fraction: float

    def __post_init__(self) -> None:
        if self.train_end > self.valid_test_start:
            raise InvariantError("train_end must not exceed valid_test_start")
        if not 0.0 < self.valid_fraction < 1.0:
            raise InvariantError("valid_fraction must lie in (0, 1)")


# A pipeline candidate: one frame of one sentence.
Candidate = tuple[SrlSentence, Frame]


def load_lexicon(path) -> TriggerLexicon:
    """One verb per line, UTF-8; blank lines and # comments ignored."""
    verbs = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            entry = line.strip()
            if entry and not entry.startswith("#"):
                verbs.add(entry.lower())
    return TriggerLexicon(verbs=frozenset(verbs))


def default_lexicon() -> TriggerLexicon:
    """The small reporting-verb list bundled with the package."""
    from importlib import resources

    path = resources.files("sourcequote") / "data" / "trigger_verbs.txt"
    return load_lexicon(path)


def default_class_list() -> frozenset[str]:
    from importlib import resources

    path = resources.files("sourcequote") / "data" / "ontology_classes.txt"
    return load_class_list(path)


def load_class_list(path) -> frozenset[str]:
    with open(path, "r", encoding="utf-8") as fh:
        return frozenset(
            line.strip() for line in fh if line.strip() and not line.startswith("#")
        )


def _span_from_json(value) -> Span | None:
    if value is None:
        return None
    if not (isinstance(value, list) and len(value) == 2):
        raise SchemaError("ill-typed field: span")
    return Span(int(value[0]), int(value[1]))


def parse_srl_sentence(line: str) -> SrlSentence:
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"line is not valid JSON: {exc}") from exc
    for name in ("article_id", "sentence_text", "frames", "entities",
                 "published_at", "title"):
        if name not in raw:
            raise SchemaError(f"missing field: {name}")
    frames = []
    for f in raw["frames"]:
        verb = _span_from_json(f.get("verb"))
        if verb is None:
            raise SchemaError("missing field: frames[].verb")
        frames.append(
            Frame(
                verb=verb,
                verb_lemma=f.get("verb_lemma"),
                subject=_span_from_json(f.get("subject")),
                object=_span_from_json(f.get("object")),
            )
        )
    annotations = []
    for e in raw["entities"]:
        span = _span_from_json(e.get("span"))
        if span is None or "entity" not in e:
            raise SchemaError("missing field: entities[].span or .entity")
        annotations.append(
            EntityAnnotation(
                span=span,
                entity=e["entity"],
                ontology_classes=tuple(e.get("ontology_classes", ())),
            )
        )
    return SrlSentence(
        article_id=raw["article_id"],
        sentence_text=raw["sentence_text"],
        frames=tuple(frames),
        entity_annotations=tuple(annotations),
        published_at=parse_timestamp(raw["published_at"]),
        title=raw["title"],
        left_sentence=raw.get("left_sentence", ""),
        right_sentence=raw.get("right_sentence", ""),
        summary_first_sentence=raw.get("summary_first_sentence", ""),
        keywords=tuple(raw.get("keywords", ())),
        categories=tuple(raw.get("categories", ())),
        news_source=raw.get("news_source", ""),
    )


def load_srl_sentences(path) -> list[SrlSentence]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(parse_srl_sentence(line))
            except (SchemaError, InvariantError) as exc:
                raise type(exc)(f"line {lineno}: {exc}") from exc
    return out


def srl_filter(sentence: SrlSentence, lexicon: TriggerLexicon) -> list[Frame]:
    """Keep frames with a trigger verb, a subject, and a long-enough object.

    The verb matches by lowercase lemma, falling back to the lowercase
    surface form when no lemma is supplied. Objects must exceed three
    whitespace tokens so the candidate quote carries information.
    """
    kept = []
    for frame in sentence.frames:
        verb_key = frame.verb_lemma or frame.verb.text(sentence.sentence_text)
        if verb_key.lower() not in lexicon:
            continue
        if frame.subject is None or not frame.subject.text(sentence.sentence_text).strip():
            continue
        if frame.object is None:
            continue
        if len(frame.object.text(sentence.sentence_text).split()) <= 3:
            continue
        kept.append(frame)
    return kept


def resolve_source_entity(
    sentence: SrlSentence, frame: Frame
) -> EntityAnnotation | None:
    """Entity annotation overlapping the frame's subject span, if any.

    Prefers the annotation with the largest overlap; ties go to the earliest.
    """
    if frame.subject is None:
        return None
    best = None
    best_overlap = 0
    for ann in sentence.entity_annotations:
        overlap = min(ann.span.end, frame.subject.end) - max(
            ann.span.start, frame.subject.start
        )
        if overlap > best_overlap:
            best, best_overlap = ann, overlap
    return best


def count_source_entities(candidates: Iterable[Candidate]) -> dict[str, int]:
    """Entity-as-source occurrence counts over the pre-filter candidate pool."""
    counts: dict[str, int] = {}
    for sentence, frame in candidates:
        ann = resolve_source_entity(sentence, frame)
        if ann is not None:
            counts[ann.entity] = counts.get(ann.entity, 0) + 1
    return counts


def source_filter(
    candidates: Sequence[Candidate],
    allowed_classes: frozenset[str],
    min_count: int = 2,
    corpus_counts: Mapping[str, int] | None = None,
) -> list[Candidate]:
    """Keep candidates whose subject is an allowed, frequent-enough entity.

    ``corpus_counts`` must be computed over the full candidate pool before
    any filtering (see :func:`count_source_entities`); when omitted it is
    derived from ``candidates`` itself.
    """
    if corpus_counts is None:
        corpus_counts = count_source_entities(candidates)
    kept = []
    for sentence, frame in candidates:
        ann = resolve_source_entity(sentence, frame)
        if ann is None:
            continue
        classes = set(ann.ontology_classes)
        if not classes & allowed_classes:
            continue
        if classes & EXCLUDED_SOURCE_CLASSES:
            continue
        if corpus_counts.get(ann.entity, 0) < min_count:
            continue
        kept.append((sentence, frame))
    return kept


def paired_quotes_check(sentence_text: str) -> bool:
    return quotemarks.is_paired(sentence_text)


def candidate_to_record(
    sentence: SrlSentence,
    frame: Frame,
    annotation: EntityAnnotation | None,
    record_id: str,
) -> QuoteRecord:
    """Assemble a validated record from a surviving candidate frame."""
    if annotation is None:
        annotation = resolve_source_entity(sentence, frame)
    if annotation is None:
        raise InvariantError(f"candidate {record_id} has no resolvable source entity")
    return QuoteRecord(
        record_id=record_id,
        left_sentence=sentence.left_sentence,
        main_sentence=sentence.sentence_text,
        right_sentence=sentence.right_sentence,
        quote=frame.object.text(sentence.sentence_text),
        source_surface=frame.subject.text(sentence.sentence_text),
        source_entity=annotation.entity,
        ontology_classes=annotation.ontology_classes,
        keywords=sentence.keywords,
        title=sentence.title,
        summary_first_sentence=sentence.summary_first_sentence,
        categories=sentence.categories,
        news_source=sentence.news_source,
        published_at=sentence.published_at,
    )


def _char_ngrams(text: str, n: int = 4) -> set[str]:
    if len(text) < n:
        return {text} if text else set()
    return {text[i:i + n] for i in range(len(text) - n + 1)}


def dedup_stream(
    articles: Iterable[tuple[str, str, datetime]],
    jaccard_threshold: float = 0.8,
) -> list[tuple[str, str, datetime]]:
    """Drop near-duplicate articles from a chronologically sorted stream.

    An article is dropped iff the character-4-gram Jaccard similarity of its
    title plus first summary sentence against any retained earlier article
    reaches the threshold; the earliest copy of a story always survives.
    Quadratic in the number of retained articles, which is fine at the scale
    this runs at.
    """
    retained: list[tuple[str, str, datetime]] = []
    grams: list[set[str]] = []
    last_ts: datetime | None = None
    for article in articles:
        title, summary, ts = article
        if last_ts is not None and ts < last_ts:
            raise UnsortedStream(
                f"timestamp {ts.isoformat()} decreases after {last_ts.isoformat()}"
            )
        last_ts = ts
        g = _char_ngrams(f"{title} {summary}")
        duplicate = False
        for other in grams:
            union = len(g | other)
            if union == 0:
                duplicate = True  # both empty: identical
                break
            if len(g & other) / union >= jaccard_threshold:
                duplicate = True
                break
        if not duplicate:
            retained.append(article)
            grams.append(g)
    return retained


def chronological_split(
    records: Sequence[QuoteRecord],
    boundaries: SplitBoundaries,
    seed: int,
) -> tuple[list[QuoteRecord], list[QuoteRecord], list[QuoteRecord]]:
    """Partition records by time, then split the late period valid/test by seed.

    Records at or before ``train_end`` train; records at or after
    ``valid_test_start`` are assigned to valid with probability
    ``valid_fraction`` (seeded), otherwise test. A record strictly between
    the boundaries raises BoundaryError.
    """
    rng = random.Random(seed)
    train: list[QuoteRecord] = []
    valid: list[QuoteRecord] = []
    test: list[QuoteRecord] = []
    for rec in records:
        ts = rec.published_at
        if ts <= boundaries.train_end:
            train.append(rec)
        elif ts >= boundaries.valid_test_start:
            if rng.random() < boundaries.valid_fraction:
                valid.append(rec)
            else:
                test.append(rec)
        else:
            raise BoundaryError(
                f"record {rec.record_id} at {ts.isoformat()} falls between the "
                "split boundaries"
            )
    return train, valid, test
