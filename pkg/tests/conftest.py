from __future__ import annotations

from datetime import datetime, timezone
from pathlib import Path

import pytest

from sourcequote.records import Corpus, QuoteRecord

DATA_DIR = Path(__file__).parent / "data"


def make_record(**overrides) -> QuoteRecord:
    """A valid record; override any field."""
    fields = dict(
        record_id="r1",
        left_sentence="Officials met on Tuesday.",
        main_sentence='Dr. Lee said the vaccine is effective and safe.',
        right_sentence="The briefing ended at noon.",
        quote="the vaccine is effective and safe",
        source_surface="Dr. Lee",
        source_entity="entity/Dr_Lee",
        ontology_classes=("Person", "Scientist"),
        keywords=("covid", "vaccine", "fda", "trial", "efficacy", "approval"),
        title="Dr. Lee warns of second wave",
        summary_first_sentence="A health official discussed vaccine efficacy.",
        categories=("Health", "Science"),
        news_source="Daily Ledger",
        published_at=datetime(2020, 3, 14, 9, 30, tzinfo=timezone.utc),
    )
    fields.update(overrides)
    return QuoteRecord(**fields)


@pytest.fixture
def record() -> QuoteRecord:
    return make_record()


@pytest.fixture
def tiny_corpus() -> Corpus:
    recs = (
        make_record(),
        make_record(
            record_id="r2",
            main_sentence='Maria Gomez said markets would recover within weeks.',
            quote="markets would recover within weeks",
            source_surface="Maria Gomez",
            source_entity="entity/Maria_Gomez",
            keywords=("markets", "stocks", "recovery"),
        ),
    )
    return Corpus(records=recs)
