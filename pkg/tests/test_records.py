import json
from datetime import timedelta

import pytest
from hypothesis import given, strategies as st

from sourcequote.errors import EmptyCorpus, InvariantError, SchemaError
from sourcequote.records import (
    Corpus,
    corpus_stats,
    format_stats,
    parse_record,
    serialize_record,
)

from conftest import make_record


def record_json(**overrides) -> str:
    obj = json.loads(serialize_record(make_record()))
    obj.update(overrides)
    return json.dumps(obj)


class TestParseRecord:
    def test_minimal_valid_record(self):
        rec = parse_record(record_json())
        assert rec.record_id == "r1"
        assert rec.quote_type is None
        assert rec.published_at.tzinfo is not None

    def test_short_quote_rejected(self):
        line = record_json(
            main_sentence="Dr. Lee said no more.", quote="no more"
        )
        with pytest.raises(InvariantError, match="quote length"):
            parse_record(line)

    def test_three_token_quote_rejected(self):
        line = record_json(
            main_sentence="Dr. Lee said it will pass.", quote="it will pass"
        )
        with pytest.raises(InvariantError, match="quote length"):
            parse_record(line)

    def test_quote_not_substring(self):
        with pytest.raises(InvariantError, match="quote is not a substring"):
            parse_record(record_json(quote="completely different words here"))

    def test_source_not_substring(self):
        with pytest.raises(InvariantError, match="source_surface"):
            parse_record(record_json(source_surface="Nobody Here"))

    def test_missing_field_named(self):
        obj = json.loads(record_json())
        del obj["quote"]
        with pytest.raises(SchemaError, match="missing field: quote"):
            parse_record(json.dumps(obj))

    def test_ill_typed_field_named(self):
        with pytest.raises(SchemaError, match="ill-typed field: keywords"):
            parse_record(record_json(keywords="not-a-list"))

    def test_bad_timestamp(self):
        with pytest.raises(InvariantError, match="published_at"):
            parse_record(record_json(published_at="not a date"))

    def test_empty_entity(self):
        with pytest.raises(InvariantError, match="source_entity"):
            parse_record(record_json(source_entity=""))

    def test_bad_quote_type(self):
        with pytest.raises(SchemaError, match="quote_type"):
            parse_record(record_json(quote_type="verbatim"))

    def test_not_json(self):
        with pytest.raises(SchemaError):
            parse_record("{nope")

    def test_unknown_fields_preserved(self):
        rec = parse_record(record_json(upstream_id="abc123"))
        assert rec.extra == {"upstream_id": "abc123"}
        assert json.loads(serialize_record(rec))["upstream_id"] == "abc123"


words = st.text(
    alphabet=st.characters(whitelist_categories=("Ll", "Lu")),
    min_size=1,
    max_size=8,
)


@given(
    quote_words=st.lists(words, min_size=4, max_size=12),
    source=words,
    extra_value=st.text(max_size=20),
    quote_type=st.sampled_from([None, "direct", "indirect", "mixed"]),
    hours=st.integers(min_value=0, max_value=10000),
)
def test_round_trip(quote_words, source, extra_value, quote_type, hours):
    quote = " ".join(quote_words)
    base = make_record()
    rec = make_record(
        main_sentence=f"{source} said {quote}.",
        quote=quote,
        source_surface=source,
        quote_type=quote_type,
        published_at=base.published_at + timedelta(hours=hours),
        extra={"blob": extra_value},
    )
    assert parse_record(serialize_record(rec)) == rec


class TestCorpus:
    def test_duplicate_ids_rejected(self):
        with pytest.raises(InvariantError, match="duplicate record_id"):
            Corpus(records=(make_record(), make_record()))

    def test_by_id(self, tiny_corpus):
        assert set(tiny_corpus.by_id()) == {"r1", "r2"}


class TestCorpusStats:
    def test_same_article_two_entities(self, tiny_corpus):
        # both records share title+timestamp, so they are one article
        report = corpus_stats(tiny_corpus)
        assert report.n_samples == 2
        assert report.n_articles == 1
        assert report.n_source_entities == 2

    def test_avg_quote_length_single(self):
        rec = make_record(
            main_sentence="Dr. Lee said one two three four five six seven eight nine ten.",
            quote="one two three four five six seven eight nine ten",
        )
        report = corpus_stats(Corpus(records=(rec,)))
        assert report.avg_quote_length == 10

    def test_permutation_invariance(self, tiny_corpus):
        flipped = Corpus(records=tuple(reversed(tiny_corpus.records)))
        assert corpus_stats(tiny_corpus) == corpus_stats(flipped)

    def test_proportions_sum_to_one(self, tiny_corpus):
        report = corpus_stats(tiny_corpus)
        assert abs(sum(report.quote_type_proportions.values()) - 1.0) < 1e-9

    def test_derived_quote_types(self):
        recs = (
            make_record(
                record_id="a",
                main_sentence='She said "the risk is real and rising".',
                quote='"the risk is real and rising"',
                source_surface="She",
            ),
            make_record(record_id="b"),  # plain indirect quote
        )
        report = corpus_stats(Corpus(records=recs))
        assert report.quote_type_proportions["direct"] == 0.5
        assert report.quote_type_proportions["indirect"] == 0.5

    def test_empty_corpus(self):
        with pytest.raises(EmptyCorpus):
            corpus_stats(Corpus(records=()))

    def test_format_stats_smoke(self, tiny_corpus):
        text = format_stats(corpus_stats(tiny_corpus))
        assert "No. of samples" in text
