"""Corpus schema, JSONL loading, and dataset statistics.

A record is one quote-source sample: the sentence where the quote occurred,
its neighboring sentences, the quoted span, the attributed source (surface
form plus canonical entity id), and article-level metadata. Records are
serialized one JSON object per line with snake_case keys; unknown keys are
preserved opaquely so upstream metadata survives a round-trip.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Any, Iterable

from . import quotemarks
from .errors import EmptyCorpus, InvariantError, SchemaError

QUOTE_TYPES = ("direct", "indirect", "mixed")

# (field name, JSON type) in validation order; the first offender is named.
_REQUIRED: tuple[tuple[str, type], ...] = (
    ("record_id", str),
    ("left_sentence", str),
    ("main_sentence", str),
    ("right_sentence", str),
    ("quote", str),
    ("source_surface", str),
    ("source_entity", str),
    ("ontology_classes", list),
    ("keywords", list),
    ("title", str),
    ("summary_first_sentence", str),
    ("categories", list),
    ("news_source", str),
    ("published_at", str),
)


@dataclass(frozen=True)
class QuoteRecord:
    record_id: str
    left_sentence: str
    main_sentence: str
    right_sentence: str
    quote: str
    source_surface: str
    source_entity: str
    ontology_classes: tuple[str, ...]
    keywords: tuple[str, ...]
    title: str
    summary_first_sentence: str
    categories: tuple[str, ...]
    news_source: str
    published_at: datetime
    quote_type: str | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    def with_quote_type(self, quote_type: str) -> "QuoteRecord":
        return replace(self, quote_type=quote_type)


@dataclass(frozen=True)
class Corpus:
    records: tuple[QuoteRecord, ...]
    split_label: str = "unsplit"

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for rec in self.records:
            if rec.record_id in seen:
                raise InvariantError(f"duplicate record_id: {rec.record_id}")
            seen.add(rec.record_id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def by_id(self) -> dict[str, QuoteRecord]:
        return {rec.record_id: rec for rec in self.records}


@dataclass(frozen=True)
class StatsReport:
    n_samples: int
    n_articles: int
    n_source_entities: int
    avg_quote_length: float
    n_news_sources: int
    n_categories: int
    avg_keywords_per_article: float
    quote_type_proportions: dict[str, float]


def parse_timestamp(value: str) -> datetime:
    """Parse an ISO-8601 timestamp; naive values are taken as UTC."""
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def parse_record(line: str) -> QuoteRecord:
    """Parse one serialized record, validating schema then invariants.

    Raises SchemaError naming the first missing or ill-typed field, or
    InvariantError naming the violated invariant.
    """
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"line is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise SchemaError("record must be a JSON object")

    for name, expected in _REQUIRED:
        if name not in raw:
            raise SchemaError(f"missing field: {name}")
        value = raw[name]
        if not isinstance(value, expected):
            raise SchemaError(f"ill-typed field: {name}")
        if expected is list and not all(isinstance(x, str) for x in value):
            raise SchemaError(f"ill-typed field: {name}")

    quote_type = raw.get("quote_type")
    if quote_type is not None:
        if not isinstance(quote_type, str) or quote_type not in QUOTE_TYPES:
            raise SchemaError("ill-typed field: quote_type")

    quote = raw["quote"]
    if len(quote.split()) <= 3:
        raise InvariantError("quote length: quote must exceed three tokens")
    main = raw["main_sentence"]
    if quote not in main:
        raise InvariantError("quote is not a substring of main_sentence")
    if raw["source_surface"] not in main:
        raise InvariantError("source_surface is not a substring of main_sentence")
    try:
        published_at = parse_timestamp(raw["published_at"])
    except ValueError as exc:
        raise InvariantError(f"published_at is not a valid timestamp: {exc}") from exc
    if not raw["source_entity"]:
        raise InvariantError("source_entity is empty")

    known = {name for name, _ in _REQUIRED} | {"quote_type"}
    extra = {k: v for k, v in raw.items() if k not in known}
    return QuoteRecord(
        record_id=raw["record_id"],
        left_sentence=raw["left_sentence"],
        main_sentence=main,
        right_sentence=raw["right_sentence"],
        quote=quote,
        source_surface=raw["source_surface"],
        source_entity=raw["source_entity"],
        ontology_classes=tuple(raw["ontology_classes"]),
        keywords=tuple(raw["keywords"]),
        title=raw["title"],
        summary_first_sentence=raw["summary_first_sentence"],
        categories=tuple(raw["categories"]),
        news_source=raw["news_source"],
        published_at=published_at,
        quote_type=quote_type,
        extra=extra,
    )


def serialize_record(record: QuoteRecord) -> str:
    obj: dict[str, Any] = {
        "record_id": record.record_id,
        "left_sentence": record.left_sentence,
        "main_sentence": record.main_sentence,
        "right_sentence": record.right_sentence,
        "quote": record.quote,
        "source_surface": record.source_surface,
        "source_entity": record.source_entity,
        "ontology_classes": list(record.ontology_classes),
        "keywords": list(record.keywords),
        "title": record.title,
        "summary_first_sentence": record.summary_first_sentence,
        "categories": list(record.categories),
        "news_source": record.news_source,
        "published_at": record.published_at.isoformat(),
    }
    if record.quote_type is not None:
        obj["quote_type"] = record.quote_type
    for key, value in record.extra.items():
        obj.setdefault(key, value)
    return json.dumps(obj, ensure_ascii=False)


def load_corpus(path, split_label: str = "unsplit") -> Corpus:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                records.append(parse_record(line))
            except (SchemaError, InvariantError) as exc:
                raise type(exc)(f"line {lineno}: {exc}") from exc
    return Corpus(records=tuple(records), split_label=split_label)


def save_corpus(corpus: Corpus | Iterable[QuoteRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in corpus:
            fh.write(serialize_record(record) + "\n")


def corpus_stats(corpus: Corpus) -> StatsReport:
    """Aggregate counts over a corpus; articles are keyed by title+timestamp."""
    if len(corpus) == 0:
        raise EmptyCorpus("cannot compute statistics of an empty corpus")
    # article-level fields come from the record with the smallest id, so the
    # report is invariant under record order
    articles: dict[tuple[str, datetime], tuple[str, tuple[str, ...]]] = {}
    entities: set[str] = set()
    news_sources: set[str] = set()
    categories: set[str] = set()
    quote_lengths: list[int] = []
    type_counts: Counter[str] = Counter()
    for rec in corpus:
        key = (rec.title, rec.published_at)
        rep = articles.get(key)
        if rep is None or rec.record_id < rep[0]:
            articles[key] = (rec.record_id, rec.keywords)
        entities.add(rec.source_entity)
        news_sources.add(rec.news_source)
        categories.update(rec.categories)
        quote_lengths.append(len(rec.quote.split()))
        qtype = rec.quote_type or quotemarks.quote_type_of(rec.quote)
        type_counts[qtype] += 1
    n = len(corpus)
    return StatsReport(
        n_samples=n,
        n_articles=len(articles),
        n_source_entities=len(entities),
        avg_quote_length=sum(quote_lengths) / n,
        n_news_sources=len(news_sources),
        n_categories=len(categories),
        avg_keywords_per_article=sum(len(k) for _, k in articles.values()) / len(articles),
        quote_type_proportions={t: type_counts[t] / n for t in QUOTE_TYPES},
    )


def format_stats(report: StatsReport, label: str = "corpus") -> str:
    props = report.quote_type_proportions
    rows = [
        ("No. of samples", f"{report.n_samples:,}"),
        ("No. of articles", f"{report.n_articles:,}"),
        ("No. of source entities", f"{report.n_source_entities:,}"),
        ("Avg. quote length", f"{report.avg_quote_length:.2f}"),
        ("No. of news sources", f"{report.n_news_sources:,}"),
        ("No. of news categories", f"{report.n_categories:,}"),
        ("Avg. keywords per article", f"{report.avg_keywords_per_article:.2f}"),
        ("Quote types (dir/ind/mix)", "{:.0%} / {:.0%} / {:.0%}".format(
            props["direct"], props["indirect"], props["mixed"])),
    ]
    width = max(len(name) for name, _ in rows)
    lines = [f"[{label}]"]
    lines += [f"  {name:<{width}}  {value}" for name, value in rows]
    return "\n".join(lines)
