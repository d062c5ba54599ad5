"""Probabilistic expert retrieval over attributed quote documents.

Two rankers, both computed in log space:

* candidate-based: a term model per expert, mixing the expert's documents
  with the corpus background,

      score(e) = sum_t n(t,q) * ln[(1-lam) * sum_d p(t|d) p(d|e) + lam * p(t)]
      lam = beta / (beta + n(e)),
      beta = avg |{d : n(e,d) > 0}| * mean document length

* document-based: each associated document is scored against the query and
  the per-document likelihoods are summed (log-sum-exp),

      score(e) = ln sum_{d in assoc(e)} exp(sum_t n(t,q) *
                 ln[(1-lam_d) p(t|d) + lam_d p(t)]),
      lam_d = mean_len / (mean_len + n(d))

p(t|d) and p(t) are maximum-likelihood estimates; p(d|e) is the Boolean
association indicator (1 iff document d is attributed to expert e), left
unnormalized, so scores are rank-only quantities. A query term never seen in
the corpus forces a -inf score; rankings exclude -inf entries.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from .analysis import LM_DEFAULT_CONFIG, TokenizerConfig, tokenize
from .binio import Reader, Writer
from .errors import BadMagic, DuplicateDocId, EmptyQuery, ParameterError, UnknownExpert

MAGIC = b"SQL1"
VERSION = 1

NEG_INF = float("-inf")


@dataclass(frozen=True)
class ExpertRanking:
    entries: tuple[tuple[str, float], ...]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        prev = math.inf
        for expert, score in self.entries:
            if expert in seen:
                raise ValueError(f"duplicate expert in ranking: {expert}")
            seen.add(expert)
            if score > prev:
                raise ValueError("ranking scores must be non-increasing")
            prev = score
        super().__setattr__("entries", tuple(self.entries))

    def experts(self) -> list[str]:
        return [expert for expert, _ in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class LmStats:
    term_doc_counts: dict[tuple[str, str], int]
    doc_lengths: dict[str, int]
    total_tokens: int
    background_counts: dict[str, int]
    associations: dict[str, frozenset[str]]
    expert_occurrences: dict[str, int]
    avg_doc_length: float
    n_experts: int
    beta_candidate: float
    config: TokenizerConfig = field(default_factory=lambda: LM_DEFAULT_CONFIG)

    def background_prob(self, term: str) -> float:
        if self.total_tokens == 0:
            return 0.0
        return self.background_counts.get(term, 0) / self.total_tokens


def build_lm_stats(
    corpus: Sequence[tuple[str, str, str]],
    config: TokenizerConfig = LM_DEFAULT_CONFIG,
) -> LmStats:
    """Collect counts from (doc_id, text, source_entity) triples.

    Each document counts as one occurrence of its attributed expert; the
    association model is Boolean.
    """
    term_doc_counts: dict[tuple[str, str], int] = {}
    doc_lengths: dict[str, int] = {}
    background: dict[str, int] = {}
    associations: dict[str, set[str]] = {}
    for doc_id, text, expert in corpus:
        if doc_id in doc_lengths:
            raise DuplicateDocId(doc_id)
        terms = tokenize(text, config)
        doc_lengths[doc_id] = len(terms)
        for term in terms:
            term_doc_counts[(term, doc_id)] = term_doc_counts.get((term, doc_id), 0) + 1
            background[term] = background.get(term, 0) + 1
        associations.setdefault(expert, set()).add(doc_id)
    total_tokens = sum(background.values())
    n_docs = len(doc_lengths)
    avg_len = total_tokens / n_docs if n_docs else 0.0
    n_experts = len(associations)
    assoc_frozen = {e: frozenset(docs) for e, docs in associations.items()}
    occurrences = {e: len(docs) for e, docs in assoc_frozen.items()}
    beta = (
        sum(len(docs) * avg_len for docs in assoc_frozen.values()) / n_experts
        if n_experts
        else 0.0
    )
    return LmStats(
        term_doc_counts=term_doc_counts,
        doc_lengths=doc_lengths,
        total_tokens=total_tokens,
        background_counts=background,
        associations=assoc_frozen,
        expert_occurrences=occurrences,
        avg_doc_length=avg_len,
        n_experts=n_experts,
        beta_candidate=beta,
        config=config,
    )


def _logsumexp(values: list[float]) -> float:
    finite = [v for v in values if v > NEG_INF]
    if not finite:
        return NEG_INF
    peak = max(finite)
    return peak + math.log(sum(math.exp(v - peak) for v in finite))


def score_candidate_based(
    stats: LmStats, query_terms: Sequence[str], expert: str
) -> float:
    if expert not in stats.associations:
        raise UnknownExpert(expert)
    if not query_terms:
        raise EmptyQuery("query has no terms")
    docs = stats.associations[expert]
    n_e = stats.expert_occurrences[expert]
    denom = stats.beta_candidate + n_e
    lam = stats.beta_candidate / denom if denom > 0 else 1.0
    doc_order = sorted(docs)  # fixed order keeps float sums reproducible
    score = 0.0
    for term, n_tq in Counter(query_terms).items():
        doc_sum = 0.0
        for doc_id in doc_order:
            n_td = stats.term_doc_counts.get((term, doc_id))
            if n_td:
                doc_sum += n_td / stats.doc_lengths[doc_id]
        mix = (1.0 - lam) * doc_sum + lam * stats.background_prob(term)
        if mix <= 0.0:
            return NEG_INF
        score += n_tq * math.log(mix)
    return score


def score_document_based(
    stats: LmStats, query_terms: Sequence[str], expert: str
) -> float:
    if expert not in stats.associations:
        raise UnknownExpert(expert)
    if not query_terms:
        raise EmptyQuery("query has no terms")
    query_counts = Counter(query_terms)
    doc_logs: list[float] = []
    for doc_id in sorted(stats.associations[expert]):
        n_d = stats.doc_lengths[doc_id]
        denom = stats.avg_doc_length + n_d
        lam = stats.avg_doc_length / denom if denom > 0 else 1.0
        log_prod = 0.0
        for term, n_tq in query_counts.items():
            p_td = (stats.term_doc_counts.get((term, doc_id), 0) / n_d) if n_d else 0.0
            mix = (1.0 - lam) * p_td + lam * stats.background_prob(term)
            if mix <= 0.0:
                log_prod = NEG_INF
                break
            log_prod += n_tq * math.log(mix)
        doc_logs.append(log_prod)
    return _logsumexp(doc_logs)


_SCORERS = {
    "candidate": score_candidate_based,
    "document": score_document_based,
}


def rank_experts(
    stats: LmStats,
    query_terms: Sequence[str],
    method: str = "candidate",
    k: int = 10,
) -> ExpertRanking:
    """Score every known expert; top-k, ties by expert id, -inf excluded."""
    if method not in _SCORERS:
        raise ParameterError(f"unknown method {method!r}")
    if k < 1:
        raise ParameterError(f"k must be positive, got {k}")
    if not query_terms:
        raise EmptyQuery("query has no terms")
    scorer = _SCORERS[method]
    scored = []
    for expert in sorted(stats.associations):
        score = scorer(stats, query_terms, expert)
        if score > NEG_INF:
            scored.append((expert, score))
    scored.sort(key=lambda item: (-item[1], item[0]))
    return ExpertRanking(entries=tuple(scored[:k]))


def top_documents_for_expert(
    stats: LmStats, query_terms: Sequence[str], expert: str, n: int = 3
) -> list[tuple[str, float]]:
    """The expert's associated documents most likely to have generated the query.

    Per-document smoothed likelihoods, as in the document-based model; used
    to surface supporting quotes next to a ranking.
    """
    if expert not in stats.associations:
        raise UnknownExpert(expert)
    query_counts = Counter(query_terms)
    scored = []
    for doc_id in sorted(stats.associations[expert]):
        n_d = stats.doc_lengths[doc_id]
        denom = stats.avg_doc_length + n_d
        lam = stats.avg_doc_length / denom if denom > 0 else 1.0
        log_prod = 0.0
        for term, n_tq in query_counts.items():
            p_td = (stats.term_doc_counts.get((term, doc_id), 0) / n_d) if n_d else 0.0
            mix = (1.0 - lam) * p_td + lam * stats.background_prob(term)
            if mix <= 0.0:
                log_prod = NEG_INF
                break
            log_prod += n_tq * math.log(mix)
        scored.append((doc_id, log_prod))
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored[:n]


def save_lm_stats(stats: LmStats, path) -> None:
    w = Writer()
    w.raw(MAGIC)
    w.u32(VERSION)
    flags = (1 if stats.config.lowercase else 0) | (2 if stats.config.stemming else 0)
    w.u32(flags)
    stopwords = sorted(stats.config.stopwords)
    w.u32(len(stopwords))
    for word in stopwords:
        w.string(word)
    doc_ids = sorted(stats.doc_lengths)
    doc_index = {d: i for i, d in enumerate(doc_ids)}
    w.u64(len(doc_ids))
    for doc_id in doc_ids:
        w.string(doc_id)
        w.u64(stats.doc_lengths[doc_id])
    terms = sorted(stats.background_counts)
    term_index = {t: i for i, t in enumerate(terms)}
    w.u64(len(terms))
    for term in terms:
        w.string(term)
        w.u64(stats.background_counts[term])
    cells = sorted(stats.term_doc_counts.items())
    w.u64(len(cells))
    for (term, doc_id), count in cells:
        w.u32(term_index[term])
        w.u32(doc_index[doc_id])
        w.u64(count)
    w.u64(len(stats.associations))
    for expert in sorted(stats.associations):
        w.string(expert)
        docs = sorted(stats.associations[expert])
        w.u64(len(docs))
        for doc_id in docs:
            w.u32(doc_index[doc_id])
    with open(path, "wb") as fh:
        fh.write(w.getvalue())


def load_lm_stats(path) -> LmStats:
    with open(path, "rb") as fh:
        r = Reader(fh.read())
    if r.raw(4) != MAGIC:
        raise BadMagic(f"{path} is not a language-model stats snapshot")
    version = r.u32()
    if version != VERSION:
        raise BadMagic(f"unsupported stats version {version}")
    flags = r.u32()
    stopwords = frozenset(r.string() for _ in range(r.u32()))
    config = TokenizerConfig(
        lowercase=bool(flags & 1), stopwords=stopwords, stemming=bool(flags & 2)
    )
    doc_ids = []
    doc_lengths: dict[str, int] = {}
    for _ in range(r.u64()):
        doc_id = r.string()
        doc_ids.append(doc_id)
        doc_lengths[doc_id] = r.u64()
    terms = []
    background: dict[str, int] = {}
    for _ in range(r.u64()):
        term = r.string()
        terms.append(term)
        background[term] = r.u64()
    term_doc_counts: dict[tuple[str, str], int] = {}
    for _ in range(r.u64()):
        term = terms[r.u32()]
        doc_id = doc_ids[r.u32()]
        term_doc_counts[(term, doc_id)] = r.u64()
    associations: dict[str, frozenset[str]] = {}
    for _ in range(r.u64()):
        expert = r.string()
        associations[expert] = frozenset(
            doc_ids[r.u32()] for _ in range(r.u64())
        )
    total_tokens = sum(background.values())
    n_docs = len(doc_lengths)
    avg_len = total_tokens / n_docs if n_docs else 0.0
    n_experts = len(associations)
    occurrences = {e: len(d) for e, d in associations.items()}
    beta = (
        sum(len(d) * avg_len for d in associations.values()) / n_experts
        if n_experts
        else 0.0
    )
    return LmStats(
        term_doc_counts=term_doc_counts,
        doc_lengths=doc_lengths,
        total_tokens=total_tokens,
        background_counts=background,
        associations=associations,
        expert_occurrences=occurrences,
        avg_doc_length=avg_len,
        n_experts=n_experts,
        beta_candidate=beta,
        config=config,
    )
