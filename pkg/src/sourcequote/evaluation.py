"""Extraction and ranking metrics, plus cluster-based relaxed relevance.

Each evaluation query has exactly one relevant expert. Strict relevance is
an exact entity match. Relaxed relevance loosens the match: a ranked
candidate counts as a hit when it shares a k-means cluster (over binary
category vectors) with the true source. A query's metric is driven by its
first hit, so a run that finds the true source exactly can never score lower
under the relaxed regime.

NDCG uses the gain discount 1/log2(i) for ranks i >= 2 and no discount at
rank 1, where log2 would vanish.
"""

from __future__ import annotations

import json
import math
import string
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import MissingClusterModel, TooFewSources, UnknownQuery

_PUNCT_TABLE = str.maketrans({ch: " " for ch in string.punctuation})
_ARTICLES = frozenset({"a", "an", "the"})


# ---------------------------------------------------------------------------
# span extraction metrics
# ---------------------------------------------------------------------------

def _normalize_tokens(text: str) -> list[str]:
    text = text.lower().translate(_PUNCT_TABLE)
    return [t for t in text.split() if t not in _ARTICLES]


def span_scores(prediction: str, gold: str) -> tuple[int, float]:
    """(exact_match, token F1) with lowercase/punctuation/article folding."""
    pred = _normalize_tokens(prediction)
    true = _normalize_tokens(gold)
    em = int(pred == true)
    if not pred or not true:
        return em, float(em)
    overlap = sum((Counter(pred) & Counter(true)).values())
    if overlap == 0:
        return em, 0.0
    precision = overlap / len(pred)
    recall = overlap / len(true)
    return em, 2 * precision * recall / (precision + recall)


# ---------------------------------------------------------------------------
# ranking metrics
# ---------------------------------------------------------------------------

def average_precision(ranked: Sequence[str], relevant: set[str]) -> float:
    """Mean of precision at each relevant rank, normalized by |relevant|."""
    if not relevant:
        return 0.0
    hits = 0
    total = 0.0
    for rank, item in enumerate(ranked, 1):
        if item in relevant:
            hits += 1
            total += hits / rank
    return total / len(relevant)


def _discount(rank: int) -> float:
    return 1.0 / max(1.0, math.log2(rank))


def ndcg_at_k(ranked: Sequence[str], relevant: set[str], k: int) -> float:
    dcg = sum(
        _discount(rank)
        for rank, item in enumerate(ranked[:k], 1)
        if item in relevant
    )
    ideal = sum(_discount(rank) for rank in range(1, min(len(relevant), k) + 1))
    return dcg / ideal if ideal > 0 else 0.0


# ---------------------------------------------------------------------------
# qrels and run files
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Qrels:
    """One relevant expert per query."""

    truth: dict[str, str]

    def __getitem__(self, query_id: str) -> str:
        return self.truth[query_id]

    def __contains__(self, query_id: str) -> bool:
        return query_id in self.truth


def load_qrels(path) -> Qrels:
    truth: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            query_id, _, expert, _ = line.split()
            truth[query_id] = expert
    return Qrels(truth=truth)


def save_qrels(qrels: Qrels, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for query_id in sorted(qrels.truth):
            fh.write(f"{query_id}\t0\t{qrels.truth[query_id]}\t1\n")


def write_run(run: Mapping[str, Sequence[tuple[str, float]]], path, tag: str) -> None:
    """TREC-style run lines: query_id, expert_id, rank, score, tag."""
    with open(path, "w", encoding="utf-8") as fh:
        for query_id in sorted(run):
            for rank, (expert, score) in enumerate(run[query_id], 1):
                fh.write(f"{query_id}\t{expert}\t{rank}\t{score:.6f}\t{tag}\n")


def read_run(path) -> dict[str, list[str]]:
    run: dict[str, list[tuple[int, str]]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            query_id, expert, rank, _score, _tag = line.split("\t")
            run.setdefault(query_id, []).append((int(rank), expert))
    return {
        query_id: [expert for _, expert in sorted(entries)]
        for query_id, entries in run.items()
    }


# ---------------------------------------------------------------------------
# category clustering for relaxed relevance
# ---------------------------------------------------------------------------

OVERFLOW_CLUSTER = -1


@dataclass
class ClusterModel:
    category_vocab: list[str]
    centroids: np.ndarray
    assignment: dict[str, int]
    seed: int


def lloyd_kmeans(
    X: np.ndarray,
    k: int,
    seed: int,
    max_iter: int = 300,
    tol: float = 1e-6,
) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """k-means++ seeding then Lloyd iterations; deterministic for a seed.

    Returns (centroids, labels, inertia history). An empty cluster is
    restarted at the point farthest from its assigned centroid.
    """
    n = X.shape[0]
    rng = np.random.Generator(np.random.PCG64(seed))
    X = X.astype(np.float64)
    sq_norms = (X ** 2).sum(axis=1)

    def all_dists(cents: np.ndarray) -> np.ndarray:
        d = sq_norms[:, None] + (cents ** 2).sum(axis=1)[None, :] - 2.0 * X @ cents.T
        return np.maximum(d, 0.0)

    centroids = np.empty((k, X.shape[1]), dtype=np.float64)
    centroids[0] = X[int(rng.integers(n))]
    closest = all_dists(centroids[:1])[:, 0]
    for j in range(1, k):
        total = closest.sum()
        if total <= 0:
            pick = int(rng.integers(n))
        else:
            r = rng.random() * total
            pick = min(int(np.searchsorted(np.cumsum(closest), r)), n - 1)
        centroids[j] = X[pick]
        closest = np.minimum(closest, all_dists(centroids[j:j + 1])[:, 0])

    inertia_history: list[float] = []
    labels = np.zeros(n, dtype=np.int64)
    for _ in range(max_iter):
        dists = all_dists(centroids)
        labels = dists.argmin(axis=1)
        inertia_history.append(float(dists[np.arange(n), labels].sum()))
        new_centroids = centroids.copy()
        spread = dists[np.arange(n), labels].copy()
        for j in range(k):
            members = X[labels == j]
            if len(members):
                new_centroids[j] = members.mean(axis=0)
            else:
                # deterministic restart at the point farthest from its
                # centroid; zeroed afterwards so a second empty cluster
                # picks a different point
                pick = int(spread.argmax())
                new_centroids[j] = X[pick]
                spread[pick] = 0.0
        shift = float(np.abs(new_centroids - centroids).max())
        centroids = new_centroids
        if shift < tol:
            break
    dists = all_dists(centroids)
    labels = dists.argmin(axis=1)
    inertia_history.append(float(dists[np.arange(n), labels].sum()))
    return centroids, labels, inertia_history


def build_cluster_model(
    sources: Mapping[str, Iterable[str]],
    m: int = 100,
    k: int = 40,
    seed: int = 0,
) -> ClusterModel:
    """Cluster sources by binary vectors over the m most frequent categories.

    Sources without any in-vocabulary category fall into a dedicated
    overflow bucket that is relaxed-relevant only to itself.
    """
    freq: Counter[str] = Counter()
    for cats in sources.values():
        freq.update(set(cats))
    vocab = [cat for cat, _ in sorted(freq.items(), key=lambda it: (-it[1], it[0]))[:m]]
    vocab_index = {cat: i for i, cat in enumerate(vocab)}

    embeddable = []
    for entity in sorted(sources):
        cols = [vocab_index[c] for c in set(sources[entity]) if c in vocab_index]
        if cols:
            embeddable.append((entity, cols))
    if len(embeddable) < k:
        raise TooFewSources(
            f"{len(embeddable)} embeddable sources for k={k} clusters"
        )
    X = np.zeros((len(embeddable), len(vocab)), dtype=np.float64)
    for row, (_, cols) in enumerate(embeddable):
        X[row, cols] = 1.0
    centroids, labels, _ = lloyd_kmeans(X, k, seed)
    assignment = {entity: int(labels[row]) for row, (entity, _) in enumerate(embeddable)}
    for entity in sources:
        assignment.setdefault(entity, OVERFLOW_CLUSTER)
    return ClusterModel(
        category_vocab=vocab, centroids=centroids, assignment=assignment, seed=seed
    )


def same_cluster(model: ClusterModel, candidate: str, true_source: str) -> bool:
    """Relaxed relevance judgment; a source always matches itself."""
    if candidate == true_source:
        return True
    a = model.assignment.get(candidate)
    b = model.assignment.get(true_source)
    if a is None or b is None or a == OVERFLOW_CLUSTER or b == OVERFLOW_CLUSTER:
        return False
    return a == b


# ---------------------------------------------------------------------------
# run evaluation
# ---------------------------------------------------------------------------

@dataclass
class MetricsReport:
    map_strict: float
    ndcg5_strict: float
    ndcg10_strict: float
    map_relaxed: float | None = None
    ndcg5_relaxed: float | None = None
    ndcg10_relaxed: float | None = None
    per_query: dict[str, dict[str, float]] = field(default_factory=dict)


def _single_target_metrics(
    ranked: Sequence[str], is_relevant: Callable[[str], bool]
) -> tuple[float, float, float]:
    """AP and NDCG@5/10 when the query has one target; first hit carries it."""
    rank = next((i for i, c in enumerate(ranked, 1) if is_relevant(c)), None)
    if rank is None:
        return 0.0, 0.0, 0.0
    ap = 1.0 / rank
    gain = _discount(rank)
    return ap, gain if rank <= 5 else 0.0, gain if rank <= 10 else 0.0


def evaluate_run(
    run: Mapping[str, Sequence[str]],
    qrels: Qrels,
    cluster_model: ClusterModel | None = None,
    relaxed: bool | None = None,
) -> MetricsReport:
    """Score a run against qrels; relaxed metrics need a cluster model.

    ``relaxed=None`` computes relaxed metrics iff a model is supplied;
    ``relaxed=True`` without a model raises MissingClusterModel.
    """
    want_relaxed = relaxed if relaxed is not None else cluster_model is not None
    if want_relaxed and cluster_model is None:
        raise MissingClusterModel("relaxed metrics require a cluster model")
    if not run:
        raise UnknownQuery("run contains no queries")

    per_query: dict[str, dict[str, float]] = {}
    strict_rows = []
    relaxed_rows = []
    for query_id in sorted(run):
        if query_id not in qrels:
            raise UnknownQuery(f"query {query_id!r} missing from qrels")
        true = qrels[query_id]
        ranked = list(run[query_id])
        s_ap, s_n5, s_n10 = _single_target_metrics(ranked, lambda c: c == true)
        row = {"ap_strict": s_ap, "ndcg5_strict": s_n5, "ndcg10_strict": s_n10}
        strict_rows.append((s_ap, s_n5, s_n10))
        if want_relaxed:
            r_ap, r_n5, r_n10 = _single_target_metrics(
                ranked, lambda c: same_cluster(cluster_model, c, true)
            )
            row.update(
                {"ap_relaxed": r_ap, "ndcg5_relaxed": r_n5, "ndcg10_relaxed": r_n10}
            )
            relaxed_rows.append((r_ap, r_n5, r_n10))
        per_query[query_id] = row

    def mean(col: int, rows: list[tuple[float, float, float]]) -> float:
        return sum(r[col] for r in rows) / len(rows)

    report = MetricsReport(
        map_strict=mean(0, strict_rows),
        ndcg5_strict=mean(1, strict_rows),
        ndcg10_strict=mean(2, strict_rows),
        per_query=per_query,
    )
    if want_relaxed:
        report.map_relaxed = mean(0, relaxed_rows)
        report.ndcg5_relaxed = mean(1, relaxed_rows)
        report.ndcg10_relaxed = mean(2, relaxed_rows)
    return report


def format_metrics(report: MetricsReport, label: str = "run") -> str:
    lines = [f"[{label}]", "  regime    MAP     NDCG@5  NDCG@10"]
    lines.append(
        "  strict   {:.4f}  {:.4f}  {:.4f}".format(
            report.map_strict, report.ndcg5_strict, report.ndcg10_strict
        )
    )
    if report.map_relaxed is not None:
        lines.append(
            "  relaxed  {:.4f}  {:.4f}  {:.4f}".format(
                report.map_relaxed, report.ndcg5_relaxed, report.ndcg10_relaxed
            )
        )
    return "\n".join(lines)


def metrics_to_json(report: MetricsReport) -> str:
    payload = {
        "map_strict": report.map_strict,
        "ndcg5_strict": report.ndcg5_strict,
        "ndcg10_strict": report.ndcg10_strict,
        "map_relaxed": report.map_relaxed,
        "ndcg5_relaxed": report.ndcg5_relaxed,
        "ndcg10_relaxed": report.ndcg10_relaxed,
        "per_query": report.per_query,
    }
    return json.dumps(payload, indent=2, sort_keys=True)
