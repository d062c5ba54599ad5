"""Inverted index with BM25 ranking.

Scoring: for each query term t (counted with multiplicity),

    idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len / avg_len))
    idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5))

The ln(1 + x) idf form keeps scores non-negative. Defaults k1=0.9, b=0.4.

Snapshot format (magic ``SQI1``, all integers little-endian):

    magic        4 bytes  b"SQI1"
    version      u32      1
    k1, b        f64 f64
    config       u32 flags (bit0 lowercase, bit1 stemming), u32 n_stopwords,
                 then that many length-prefixed stopwords (sorted)
    docs         u64 n_docs, then per doc: string doc_id, u64 token count
    postings     u64 n_terms, then per term: string term, u64 n_postings,
                 then (u32 doc_index, u64 tf) pairs sorted by doc_id

Strings are u32 length-prefixed UTF-8. The built index is immutable and safe
for concurrent searches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .analysis import SPARSE_DEFAULT_CONFIG, TokenizerConfig, tokenize
from .binio import Reader, Writer
from .errors import BadMagic, DuplicateDocId, EmptyQuery

MAGIC = b"SQI1"
VERSION = 1


@dataclass
class SparseIndex:
    postings: dict[str, list[tuple[str, int]]]
    doc_lengths: dict[str, int]
    n_docs: int
    avg_doc_length: float
    k1: float = 0.9
    b: float = 0.4
    config: TokenizerConfig = field(default_factory=lambda: SPARSE_DEFAULT_CONFIG)


def build_sparse(
    docs: list[tuple[str, str]],
    config: TokenizerConfig = SPARSE_DEFAULT_CONFIG,
    k1: float = 0.9,
    b: float = 0.4,
) -> SparseIndex:
    """Index (doc_id, text) pairs; doc_ids must be unique."""
    doc_lengths: dict[str, int] = {}
    postings: dict[str, dict[str, int]] = {}
    for doc_id, text in docs:
        if doc_id in doc_lengths:
            raise DuplicateDocId(doc_id)
        terms = tokenize(text, config)
        doc_lengths[doc_id] = len(terms)
        for term in terms:
            by_doc = postings.setdefault(term, {})
            by_doc[doc_id] = by_doc.get(doc_id, 0) + 1
    n_docs = len(doc_lengths)
    avg = sum(doc_lengths.values()) / n_docs if n_docs else 0.0
    sorted_postings = {
        term: sorted(by_doc.items()) for term, by_doc in postings.items()
    }
    return SparseIndex(
        postings=sorted_postings,
        doc_lengths=doc_lengths,
        n_docs=n_docs,
        avg_doc_length=avg,
        k1=k1,
        b=b,
        config=config,
    )


def idf(index: SparseIndex, term: str) -> float:
    df = len(index.postings.get(term, ()))
    return math.log(1.0 + (index.n_docs - df + 0.5) / (df + 0.5))


def search_sparse(
    index: SparseIndex, query_text: str, k: int = 10
) -> list[tuple[str, float]]:
    """Top-k documents by BM25, descending score, ties by ascending doc_id.

    Only documents with positive scores are returned. Raises EmptyQuery when
    the query tokenizes to nothing.
    """
    terms = tokenize(query_text, index.config)
    if not terms:
        raise EmptyQuery(f"query {query_text!r} has no terms after tokenization")
    scores: dict[str, float] = {}
    k1, b, avg = index.k1, index.b, index.avg_doc_length
    for term in terms:
        plist = index.postings.get(term)
        if not plist:
            continue
        w = idf(index, term)
        for doc_id, tf in plist:
            norm = k1 * (1.0 - b + b * index.doc_lengths[doc_id] / avg)
            scores[doc_id] = scores.get(doc_id, 0.0) + w * tf * (k1 + 1.0) / (tf + norm)
    ranked = sorted(
        ((doc_id, s) for doc_id, s in scores.items() if s > 0.0),
        key=lambda item: (-item[1], item[0]),
    )
    return ranked[:k]


def save_sparse(index: SparseIndex, path) -> None:
    w = Writer()
    w.raw(MAGIC)
    w.u32(VERSION)
    w.f64(index.k1)
    w.f64(index.b)
    flags = (1 if index.config.lowercase else 0) | (2 if index.config.stemming else 0)
    w.u32(flags)
    stopwords = sorted(index.config.stopwords)
    w.u32(len(stopwords))
    for word in stopwords:
        w.string(word)
    doc_ids = sorted(index.doc_lengths)
    doc_index = {doc_id: i for i, doc_id in enumerate(doc_ids)}
    w.u64(len(doc_ids))
    for doc_id in doc_ids:
        w.string(doc_id)
        w.u64(index.doc_lengths[doc_id])
    w.u64(len(index.postings))
    for term in sorted(index.postings):
        w.string(term)
        plist = index.postings[term]
        w.u64(len(plist))
        for doc_id, tf in plist:
            w.u32(doc_index[doc_id])
            w.u64(tf)
    with open(path, "wb") as fh:
        fh.write(w.getvalue())


def load_sparse(path) -> SparseIndex:
    with open(path, "rb") as fh:
        r = Reader(fh.read())
    if r.raw(4) != MAGIC:
        raise BadMagic(f"{path} is not a sparse index snapshot")
    version = r.u32()
    if version != VERSION:
        raise BadMagic(f"unsupported sparse index version {version}")
    k1 = r.f64()
    b = r.f64()
    flags = r.u32()
    stopwords = frozenset(r.string() for _ in range(r.u32()))
    config = TokenizerConfig(
        lowercase=bool(flags & 1), stopwords=stopwords, stemming=bool(flags & 2)
    )
    n_docs = r.u64()
    doc_ids = []
    doc_lengths: dict[str, int] = {}
    for _ in range(n_docs):
        doc_id = r.string()
        doc_ids.append(doc_id)
        doc_lengths[doc_id] = r.u64()
    postings: dict[str, list[tuple[str, int]]] = {}
    for _ in range(r.u64()):
        term = r.string()
        plist = []
        for _ in range(r.u64()):
            plist.append((doc_ids[r.u32()], r.u64()))
        postings[term] = plist
    avg = sum(doc_lengths.values()) / n_docs if n_docs else 0.0
    return SparseIndex(
        postings=postings,
        doc_lengths=doc_lengths,
        n_docs=n_docs,
        avg_doc_length=avg,
        k1=k1,
        b=b,
        config=config,
    )
