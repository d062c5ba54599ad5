"""Query/document formation and the five retrieval methods.

Document-retrieval methods (dr_sparse, dr_flat, dr_hnsw) fetch the top
documents for a query and collapse them to experts by best-document rank.
Expert-retrieval methods (er_candidate, er_document) score experts directly
via the language models. Dense methods consume precomputed query vectors
keyed by record id; no embedding happens in this package.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .analysis import tokenize
from .dense import HnswIndex, VectorStore, search_flat, search_hnsw
from .errors import EmptyField, IndexMissing, ParameterError, UnknownDocId
from .expert_lm import ExpertRanking, LmStats, rank_experts
from .records import Corpus, QuoteRecord
from .sparse import SparseIndex, search_sparse

QUERY_MODES = ("title", "keywords", "summary")
DOC_MODES = ("sentence", "context")
METHODS = ("dr_sparse", "dr_flat", "dr_hnsw", "er_candidate", "er_document")

# Document-retrieval methods collapse this many retrieved documents.
DOC_CUT = 10


@dataclass(frozen=True)
class QuerySpec:
    mode: str = "keywords"
    w: int | None = None
    strip_source: bool = False

    def __post_init__(self) -> None:
        if self.mode not in QUERY_MODES:
            raise ParameterError(f"unknown query mode {self.mode!r}")
        if self.w is not None and self.w < 1:
            raise ParameterError(f"w must be at least 1, got {self.w}")


@dataclass(frozen=True)
class DocSpec:
    mode: str = "context"

    def __post_init__(self) -> None:
        if self.mode not in DOC_MODES:
            raise ParameterError(f"unknown document mode {self.mode!r}")


@dataclass
class IndexSet:
    """Everything a retrieval method may need, loaded once and then read-only."""

    corpus: Corpus | None = None
    sparse: SparseIndex | None = None
    dense_store: VectorStore | None = None
    hnsw: HnswIndex | None = None
    query_vectors: VectorStore | None = None

    def query_vector_for(self, record_id: str):
        if self.query_vectors is None:
            raise IndexMissing("no query-vector file loaded")
        cache = getattr(self, "_query_rows", None)
        if cache is None:
            cache = {doc_id: i for i, doc_id in enumerate(self.query_vectors.doc_ids)}
            self._query_rows = cache
        row = cache.get(record_id)
        if row is None:
            raise IndexMissing(f"no query vector for record {record_id!r}")
        return self.query_vectors.vectors[row]


def canonical_entity_name(entity: str) -> str:
    """Human-readable form of an entity id: last path segment, underscores out."""
    tail = entity.rstrip("/").rsplit("/", 1)[-1]
    return tail.replace("_", " ")


_EDGE_PUNCT = "\"'“”‘’.,;:!?()[]"


def _norm_token(token: str) -> str:
    return token.strip(_EDGE_PUNCT).lower()


def form_query(record: QuoteRecord, spec: QuerySpec) -> str:
    """Build the query text for a record as the query spec directs.

    strip_source removes every token of the source surface form and of the
    entity's canonical name (case-insensitive, edge punctuation ignored);
    w keeps only the first w whitespace words after stripping.
    """
    if spec.mode == "title":
        text = record.title
    elif spec.mode == "keywords":
        text = " ".join(record.keywords)
    else:
        text = record.summary_first_sentence
    if not text.strip():
        raise EmptyField(f"record {record.record_id} has an empty {spec.mode} field")
    if spec.strip_source:
        banned = {
            _norm_token(t)
            for t in record.source_surface.split()
            + canonical_entity_name(record.source_entity).split()
        }
        banned.discard("")
        words = [w for w in text.split() if _norm_token(w) not in banned]
        text = " ".join(words)
    if spec.w is not None:
        text = " ".join(text.split()[: spec.w])
    return text


def form_document(record: QuoteRecord, spec: DocSpec) -> tuple[str, str]:
    """The indexable text for a record: main sentence alone or with context."""
    if spec.mode == "sentence":
        text = record.main_sentence
    else:
        parts = (record.left_sentence, record.main_sentence, record.right_sentence)
        text = " ".join(p for p in parts if p)
    return record.record_id, text


def experts_from_documents(
    ranked_docs: list[tuple[str, float]], corpus: Corpus
) -> ExpertRanking:
    """Collapse a document ranking to experts by best-document rank."""
    by_id = corpus.by_id()
    entries: list[tuple[str, float]] = []
    seen: set[str] = set()
    for doc_id, score in ranked_docs:
        record = by_id.get(doc_id)
        if record is None:
            raise UnknownDocId(f"document {doc_id!r} is not in the corpus")
        expert = record.source_entity
        if expert not in seen:
            seen.add(expert)
            entries.append((expert, score))
    return ExpertRanking(entries=tuple(entries))


def recommend(
    indices: IndexSet,
    stats: LmStats | None,
    record: QuoteRecord,
    method: str,
    query_spec: QuerySpec,
    k: int = 10,
) -> ExpertRanking:
    """Rank experts for one query record with the chosen method.

    DR methods ignore the w cap (it applies to expert retrieval only) and
    collapse the top max(DOC_CUT, k) documents; ER methods tokenize the
    w-truncated query with the stats' own tokenizer.
    """
    if method not in METHODS:
        raise ParameterError(f"unknown method {method!r}")
    if k < 1:
        raise ParameterError(f"k must be positive, got {k}")

    if method.startswith("dr_"):
        query = form_query(record, replace(query_spec, w=None))
        ranking = recommend_text(indices, stats, query, method, k,
                                 query_vector_id=record.record_id)
    else:
        query = form_query(record, query_spec)
        ranking = recommend_text(indices, stats, query, method, k)
    return ranking


def retrieve_documents(
    indices: IndexSet,
    query: str,
    method: str,
    doc_k: int,
    query_vector_id: str | None = None,
) -> list[tuple[str, float]]:
    """Run the document search behind a DR method.

    Dense methods need a precomputed query vector; ``query_vector_id``
    names its row in the loaded query-vector store (the query text itself
    is used as the id when none is given).
    """
    if method == "dr_sparse":
        if indices.sparse is None:
            raise IndexMissing("sparse index not loaded")
        return search_sparse(indices.sparse, query, k=doc_k)
    if method in ("dr_flat", "dr_hnsw"):
        if indices.dense_store is None:
            raise IndexMissing("dense vector store not loaded")
        qv = indices.query_vector_for(query_vector_id or query)
        if method == "dr_flat":
            return search_flat(indices.dense_store, qv, k=doc_k)
        if indices.hnsw is None:
            raise IndexMissing("hnsw index not built")
        return search_hnsw(indices.hnsw, qv, k=doc_k, ef_search=max(100, doc_k))
    raise ParameterError(f"{method!r} is not a document-retrieval method")


def recommend_text(
    indices: IndexSet,
    stats: LmStats | None,
    query: str,
    method: str,
    k: int = 10,
    query_vector_id: str | None = None,
) -> ExpertRanking:
    """Method dispatch on an already-formed query string."""
    if method not in METHODS:
        raise ParameterError(f"unknown method {method!r}")
    if method.startswith("dr_"):
        if indices.corpus is None:
            raise IndexMissing("corpus not loaded")
        docs = retrieve_documents(indices, query, method, max(DOC_CUT, k),
                                  query_vector_id)
        return _truncate(experts_from_documents(docs, indices.corpus), k)
    if stats is None:
        raise IndexMissing("language-model statistics not loaded")
    terms = tokenize(query, stats.config)
    lm_method = "candidate" if method == "er_candidate" else "document"
    return rank_experts(stats, terms, method=lm_method, k=k)


def _truncate(ranking: ExpertRanking, k: int) -> ExpertRanking:
    return ExpertRanking(entries=ranking.entries[:k])
