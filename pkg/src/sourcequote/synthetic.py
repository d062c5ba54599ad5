"""Seeded synthetic corpus with planted topics, experts, and queries.

Twenty topics by default, ten experts per topic. Every expert owns a few
private vocabulary words that appear in all of their quotes and nowhere
else; topics own a shared vocabulary; a filler vocabulary is global.
Article keywords lead with topic words, so a w=5 query window sees only
topical terms while the full keyword list still carries the expert's
private words. Expert categories are topic-specific, which makes topics
recoverable as clusters.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

from .evaluation import Qrels
from .records import Corpus, QuoteRecord

_CONSONANTS = "bdfglmnprstvz"
_VOWELS = "aeiou"

TRAIN_START = datetime(2020, 1, 19, tzinfo=timezone.utc)
TEST_START = datetime(2020, 6, 21, tzinfo=timezone.utc)

_OUTLETS = ("Daily Ledger", "Wire Desk", "Metro Journal", "Coast Herald",
            "Capital Review", "Evening Post")


@dataclass
class SyntheticData:
    corpus: Corpus
    queries: Corpus
    qrels: Qrels
    categories: dict[str, list[str]]
    topic_of_expert: dict[str, int]


class _WordMint:
    """Unique pseudoword factory; one global pool prevents cross-vocabulary collisions."""

    def __init__(self, rng: random.Random) -> None:
        self.rng = rng
        self.used: set[str] = set()

    def word(self, syllables: int = 3) -> str:
        while True:
            w = "".join(
                self.rng.choice(_CONSONANTS) + self.rng.choice(_VOWELS)
                for _ in range(syllables)
            )
            if w not in self.used:
                self.used.add(w)
                return w

    def words(self, n: int, syllables: int = 3) -> list[str]:
        return [self.word(syllables) for _ in range(n)]


def generate_synthetic(
    n_topics: int = 20,
    experts_per_topic: int = 10,
    docs_per_expert: tuple[int, int] = (3, 6),
    n_queries: int = 100,
    seed: int = 0,
) -> SyntheticData:
    rng = random.Random(seed)
    mint = _WordMint(rng)

    filler = mint.words(40)
    topic_words = [mint.words(12) for _ in range(n_topics)]
    topic_cats = [[f"t{t:02d}cat{i}" for i in range(5)] for t in range(n_topics)]

    experts: list[dict] = []
    for t in range(n_topics):
        for _ in range(experts_per_topic):
            first = mint.word(2).capitalize()
            last = mint.word(2).capitalize()
            surface = f"{first} {last}"
            entity = f"entity/{first}_{last}"
            experts.append({
                "topic": t,
                "surface": surface,
                "entity": entity,
                "words": mint.words(4),
                "categories": rng.sample(topic_cats[t], rng.choice((4, 5))),
            })

    records: list[QuoteRecord] = []
    counter = 0
    ts = TRAIN_START
    for ex in experts:
        t = ex["topic"]
        n_docs = rng.randint(*docs_per_expert)
        for _ in range(n_docs):
            body_words = (
                rng.sample(ex["words"], 3)
                + rng.sample(topic_words[t], 4)
                + rng.sample(filler, 1)
            )
            rng.shuffle(body_words)
            body = " ".join(body_words)
            keywords = (
                rng.sample(topic_words[t], 5)
                + rng.sample(ex["words"], 3)
                + rng.sample(filler, 2)
            )
            left = " ".join(rng.sample(filler, 3) + rng.sample(topic_words[t], 2))
            right = " ".join(rng.sample(topic_words[t], 2) + rng.sample(filler, 3))
            title = " ".join(
                rng.sample(topic_words[t], 3) + rng.sample(ex["words"], 1)
            )
            summary = " ".join(
                rng.sample(topic_words[t], 4)
                + rng.sample(ex["words"], 1)
                + rng.sample(filler, 2)
            )
            records.append(QuoteRecord(
                record_id=f"d{counter:05d}",
                left_sentence=left.capitalize() + ".",
                main_sentence=f'{ex["surface"]} said that {body}.',
                right_sentence=right.capitalize() + ".",
                quote=body,
                source_surface=ex["surface"],
                source_entity=ex["entity"],
                ontology_classes=("Person",),
                keywords=tuple(keywords),
                title=title,
                summary_first_sentence=summary,
                categories=tuple(ex["categories"]),
                news_source=_OUTLETS[counter % len(_OUTLETS)],
                published_at=ts,
            ))
            counter += 1
            ts += timedelta(minutes=7)

    query_experts = rng.sample(experts, min(n_queries, len(experts)))
    queries: list[QuoteRecord] = []
    truth: dict[str, str] = {}
    ts = TEST_START
    for qi, ex in enumerate(query_experts):
        t = ex["topic"]
        keywords = (
            rng.sample(topic_words[t], 5)
            + rng.sample(ex["words"], 3)
            + rng.sample(filler, 2)
        )
        body_words = rng.sample(ex["words"], 2) + rng.sample(topic_words[t], 4)
        rng.shuffle(body_words)
        body = " ".join(body_words)
        qid = f"q{qi:04d}"
        queries.append(QuoteRecord(
            record_id=qid,
            left_sentence=" ".join(rng.sample(filler, 4)).capitalize() + ".",
            main_sentence=f'{ex["surface"]} said that {body}.',
            right_sentence=" ".join(rng.sample(filler, 4)).capitalize() + ".",
            quote=body,
            source_surface=ex["surface"],
            source_entity=ex["entity"],
            ontology_classes=("Person",),
            keywords=tuple(keywords),
            title=" ".join(rng.sample(topic_words[t], 3) + rng.sample(ex["words"], 1)),
            summary_first_sentence=" ".join(
                rng.sample(topic_words[t], 4) + rng.sample(ex["words"], 1)
            ),
            categories=tuple(ex["categories"]),
            news_source=_OUTLETS[qi % len(_OUTLETS)],
            published_at=ts,
        ))
        truth[qid] = ex["entity"]
        ts += timedelta(hours=3)

    return SyntheticData(
        corpus=Corpus(records=tuple(records), split_label="train"),
        queries=Corpus(records=tuple(queries), split_label="test"),
        qrels=Qrels(truth=truth),
        categories={ex["entity"]: list(ex["categories"]) for ex in experts},
        topic_of_expert={ex["entity"]: ex["topic"] for ex in experts},
    )
