#!/usr/bin/env python3
"""Run the full method grid on the bundled synthetic corpus.

Evaluates every retrieval method under both document modes and all three
query modes, with strict and cluster-relaxed metrics, mirroring the shape
of the full experiment matrix. Dense rows use the hashed stand-in encoder
from make_fixture_vectors.py.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))
from make_fixture_vectors import MODEL_ID, encode_texts  # noqa: E402

from sourcequote.dense import VectorStore, build_hnsw  # noqa: E402
from sourcequote.evaluation import build_cluster_model, evaluate_run  # noqa: E402
from sourcequote.expert_lm import build_lm_stats  # noqa: E402
from sourcequote.recommend import (  # noqa: E402
    DocSpec,
    IndexSet,
    METHODS,
    QuerySpec,
    form_document,
    form_query,
    recommend,
)
from sourcequote.sparse import build_sparse  # noqa: E402
from sourcequote.synthetic import generate_synthetic  # noqa: E402


def build_indices(data, doc_mode: str, query_mode: str, dim: int, seed: int) -> tuple:
    doc_spec = DocSpec(mode=doc_mode)
    pairs = [form_document(rec, doc_spec) for rec in data.corpus]
    texts = [text for _, text in pairs]
    doc_vectors = VectorStore(
        dim=dim,
        vectors=encode_texts(texts, dim=dim),
        doc_ids=[rec.record_id for rec in data.corpus],
        normalized=True,
        metadata={"model": MODEL_ID},
    )
    qspec = QuerySpec(mode=query_mode)
    query_texts = [form_query(rec, qspec) for rec in data.queries]
    query_vectors = VectorStore(
        dim=dim,
        vectors=encode_texts(query_texts, dim=dim),
        doc_ids=[rec.record_id for rec in data.queries],
        normalized=True,
        metadata={"model": MODEL_ID},
    )
    indices = IndexSet(
        corpus=data.corpus,
        sparse=build_sparse(pairs),
        dense_store=doc_vectors,
        hnsw=build_hnsw(doc_vectors, M=16, ef_construction=100, seed=seed),
        query_vectors=query_vectors,
    )
    stats = build_lm_stats(
        [(doc_id, text, rec.source_entity)
         for (doc_id, text), rec in zip(pairs, data.corpus)]
    )
    return indices, stats


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--n-queries", type=int, default=100)
    ap.add_argument("--dim", type=int, default=64)
    ap.add_argument("--w", type=int, default=5, help="query cap for ER methods")
    ap.add_argument("--clusters", type=int, default=20)
    args = ap.parse_args()

    started = time.monotonic()
    data = generate_synthetic(seed=args.seed, n_queries=args.n_queries)
    model = build_cluster_model(data.categories, m=100, k=args.clusters,
                                seed=args.seed)
    print(f"synthetic corpus: {len(data.corpus)} docs, {len(data.queries)} queries")
    print(f"{'doc':9s} {'query':9s} {'method':13s} "
          f"{'MAP':>7s} {'NDCG@5':>7s} {'NDCG@10':>8s} | "
          f"{'rMAP':>7s} {'rNDCG@5':>8s} {'rNDCG@10':>9s}")
    for doc_mode in ("context", "sentence"):
        for query_mode in ("keywords", "title", "summary"):
            indices, stats = build_indices(
                data, doc_mode, query_mode, args.dim, args.seed
            )
            for method in METHODS:
                w = args.w if method.startswith("er_") else None
                spec = QuerySpec(mode=query_mode, w=w)
                run = {
                    rec.record_id: recommend(
                        indices, stats, rec, method, spec, k=10
                    ).experts()
                    for rec in data.queries
                }
                report = evaluate_run(run, data.qrels, cluster_model=model)
                print(
                    f"{doc_mode:9s} {query_mode:9s} {method:13s} "
                    f"{report.map_strict:7.4f} {report.ndcg5_strict:7.4f} "
                    f"{report.ndcg10_strict:8.4f} | "
                    f"{report.map_relaxed:7.4f} {report.ndcg5_relaxed:8.4f} "
                    f"{report.ndcg10_relaxed:9.4f}"
                )
    print(f"total time: {time.monotonic() - started:.1f}s")


if __name__ == "__main__":
    main()
