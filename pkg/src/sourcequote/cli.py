"""Command-line surface: ingestion, pipeline, index builds, search, eval.

An index directory collects everything a retrieval method needs:

    corpus.jsonl   validated records (written by `ingest`)
    sparse.sqi     BM25 index snapshot
    lm.sql         expert language-model statistics
    vectors.sqv    document embeddings (SQV1, produced externally)
    queries.sqv    query embeddings keyed by record id (optional)
    manifest.json  build parameters (doc modes, HNSW settings)

Dense indexes are validated at build time and the HNSW graph is
reconstructed deterministically at load time from the manifest parameters.
"""

from __future__ import annotations

import argparse
import json
import shutil
import sys
from collections import Counter
from pathlib import Path

from . import annotator, dense, evaluation, expert_lm, pipeline, records, sparse
from .analysis import SPARSE_DEFAULT_CONFIG, TokenizerConfig
from .errors import SourceQuoteError
from .recommend import (
    DocSpec,
    IndexSet,
    QuerySpec,
    METHODS,
    recommend,
)
from .service import ServiceState, make_server

MANIFEST = "manifest.json"


def _read_manifest(index_dir: Path) -> dict:
    path = index_dir / MANIFEST
    if path.exists():
        return json.loads(path.read_text(encoding="utf-8"))
    return {}


def _write_manifest(index_dir: Path, manifest: dict) -> None:
    (index_dir / MANIFEST).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _corpus_path(args) -> Path:
    if args.corpus:
        return Path(args.corpus)
    return Path(args.index_dir) / "corpus.jsonl"


def _doc_pairs(corpus: records.Corpus, doc_mode: str):
    from .recommend import form_document

    spec = DocSpec(mode=doc_mode)
    return [form_document(rec, spec) for rec in corpus]


def cmd_ingest(args) -> int:
    corpus = records.load_corpus(args.corpus)
    index_dir = Path(args.index_dir)
    index_dir.mkdir(parents=True, exist_ok=True)
    records.save_corpus(corpus, index_dir / "corpus.jsonl")
    print(f"ingested {len(corpus)} records into {index_dir / 'corpus.jsonl'}")
    return 0


def cmd_filter(args) -> int:
    sentences = pipeline.load_srl_sentences(args.srl)
    lexicon = pipeline.load_lexicon(args.triggers)
    allowed = pipeline.load_class_list(args.ontology)

    if not args.no_dedup:
        articles = {}
        for s in sentences:
            articles.setdefault(
                s.article_id, (s.title, s.summary_first_sentence, s.published_at)
            )
        ordered = sorted(articles.items(), key=lambda kv: (kv[1][2], kv[0]))
        retained = pipeline.dedup_stream(
            [art for _, art in ordered], jaccard_threshold=args.dedup_threshold
        )
        retained_keys = {art for art in retained}
        keep_ids = {aid for aid, art in ordered if art in retained_keys}
        sentences = [s for s in sentences if s.article_id in keep_ids]

    pool: list[pipeline.Candidate] = []
    for sentence in sentences:
        for frame in pipeline.srl_filter(sentence, lexicon):
            pool.append((sentence, frame))
    counts = pipeline.count_source_entities(pool)
    kept = pipeline.source_filter(
        pool, allowed, min_count=args.min_count, corpus_counts=counts
    )

    out = []
    seq: Counter[str] = Counter()
    for sentence, frame in kept:
        if not pipeline.paired_quotes_check(sentence.sentence_text):
            continue
        ann = pipeline.resolve_source_entity(sentence, frame)
        seq[sentence.article_id] += 1
        record_id = f"{sentence.article_id}:{seq[sentence.article_id]}"
        out.append(pipeline.candidate_to_record(sentence, frame, ann, record_id))
    records.save_corpus(out, args.out)
    print(f"kept {len(out)} of {len(pool)} candidate frames -> {args.out}")
    return 0


def cmd_split(args) -> int:
    corpus = records.load_corpus(args.corpus)
    boundaries = pipeline.SplitBoundaries(
        train_end=records.parse_timestamp(args.train_end),
        valid_test_start=records.parse_timestamp(args.valid_test_start),
        valid_fraction=args.valid_fraction,
    )
    train, valid, test = pipeline.chronological_split(
        list(corpus), boundaries, seed=args.seed
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, part in (("train", train), ("valid", valid), ("test", test)):
        records.save_corpus(part, out_dir / f"{name}.jsonl")
        print(f"{name}: {len(part)} records")
    return 0


def cmd_stats(args) -> int:
    corpus = records.load_corpus(args.corpus)
    report = records.corpus_stats(corpus)
    if args.json:
        payload = {
            "n_samples": report.n_samples,
            "n_articles": report.n_articles,
            "n_source_entities": report.n_source_entities,
            "avg_quote_length": report.avg_quote_length,
            "n_news_sources": report.n_news_sources,
            "n_categories": report.n_categories,
            "avg_keywords_per_article": report.avg_keywords_per_article,
            "quote_type_proportions": report.quote_type_proportions,
        }
        print(json.dumps(payload, indent=2))
    else:
        print(records.format_stats(report, label=Path(args.corpus).name))
    return 0


def cmd_build_sparse(args) -> int:
    index_dir = Path(args.index_dir)
    corpus = records.load_corpus(_corpus_path(args))
    config = TokenizerConfig(
        lowercase=True,
        stopwords=frozenset() if args.no_stopwords else SPARSE_DEFAULT_CONFIG.stopwords,
        stemming=not args.no_stem,
    )
    index = sparse.build_sparse(
        _doc_pairs(corpus, args.doc_mode), config=config, k1=args.k1, b=args.b
    )
    index_dir.mkdir(parents=True, exist_ok=True)
    sparse.save_sparse(index, index_dir / "sparse.sqi")
    manifest = _read_manifest(index_dir)
    manifest["sparse"] = {"doc_mode": args.doc_mode, "k1": args.k1, "b": args.b}
    _write_manifest(index_dir, manifest)
    print(f"sparse index: {index.n_docs} docs, {len(index.postings)} terms")
    return 0


def cmd_build_dense(args) -> int:
    index_dir = Path(args.index_dir)
    index_dir.mkdir(parents=True, exist_ok=True)
    store = dense.load_vectors(args.vectors, normalize=args.normalize)
    target = index_dir / "vectors.sqv"
    if Path(args.vectors).resolve() != target.resolve():
        shutil.copyfile(args.vectors, target)
    msg = f"dense store: {len(store)} vectors of dim {store.dim}"
    if args.query_vectors:
        qstore = dense.load_vectors(args.query_vectors, normalize=args.normalize)
        qtarget = index_dir / "queries.sqv"
        if Path(args.query_vectors).resolve() != qtarget.resolve():
            shutil.copyfile(args.query_vectors, qtarget)
        msg += f"; {len(qstore)} query vectors"
    manifest = _read_manifest(index_dir)
    manifest["dense"] = {
        "normalize": bool(args.normalize),
        "hnsw": {"M": args.M, "ef_construction": args.ef_construction,
                 "seed": args.seed},
    }
    _write_manifest(index_dir, manifest)
    print(msg)
    return 0


def cmd_build_lm(args) -> int:
    index_dir = Path(args.index_dir)
    corpus = records.load_corpus(_corpus_path(args))
    triples = [
        (doc_id, text, rec.source_entity)
        for rec, (doc_id, text) in zip(corpus, _doc_pairs(corpus, args.doc_mode))
    ]
    stats = expert_lm.build_lm_stats(triples)
    index_dir.mkdir(parents=True, exist_ok=True)
    expert_lm.save_lm_stats(stats, index_dir / "lm.sql")
    manifest = _read_manifest(index_dir)
    manifest["lm"] = {"doc_mode": args.doc_mode}
    _write_manifest(index_dir, manifest)
    print(
        f"lm stats: {len(stats.doc_lengths)} docs, {stats.n_experts} experts, "
        f"{len(stats.background_counts)} terms"
    )
    return 0


def cmd_annotate(args) -> int:
    corpus = records.load_corpus(args.corpus)
    lexicon = pipeline.load_lexicon(args.triggers)
    rows = []
    em_source = []
    f1_source = []
    em_quote = []
    f1_quote = []
    extracted = 0
    for rec in corpus:
        result = annotator.extract_direct(rec.main_sentence, lexicon)
        if result is None:
            rows.append({"record_id": rec.record_id, "abstained": True})
            continue
        source, quote = result
        extracted += 1
        em_s, f1_s = evaluation.span_scores(source, rec.source_surface)
        em_q, f1_q = evaluation.span_scores(quote, rec.quote)
        em_source.append(em_s)
        f1_source.append(f1_s)
        em_quote.append(em_q)
        f1_quote.append(f1_q)
        rows.append({
            "record_id": rec.record_id,
            "abstained": False,
            "source": source,
            "quote": quote,
        })
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    print(f"extracted on {extracted}/{len(corpus)} sentences")
    if extracted:
        print(
            "source EM {:.3f} F1 {:.3f} | quote EM {:.3f} F1 {:.3f}".format(
                sum(em_source) / extracted,
                sum(f1_source) / extracted,
                sum(em_quote) / extracted,
                sum(f1_quote) / extracted,
            )
        )
    return 0


def cmd_export_bio(args) -> int:
    corpus = records.load_corpus(args.corpus)
    sequences = [annotator.to_bio(rec) for rec in corpus]
    annotator.write_bio(sequences, args.out)
    print(f"wrote {len(sequences)} tagged sentences -> {args.out}")
    return 0


def cmd_export_qa(args) -> int:
    corpus = records.load_corpus(args.corpus)
    predictions = {}
    if args.predictions:
        with open(args.predictions, "r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    row = json.loads(line)
                    predictions[row["record_id"]] = row["source"]
    examples = []
    for rec in corpus:
        predicted = predictions.get(rec.record_id)
        source_ex, quote_ex = annotator.to_qa(
            rec, source_mode=args.source_mode, predicted_source=predicted
        )
        examples.extend((source_ex, quote_ex))
    annotator.write_qa(examples, args.out)
    print(f"wrote {len(examples)} QA examples -> {args.out}")
    return 0


def _load_index_set(index_dir: Path, method: str) -> tuple[IndexSet, expert_lm.LmStats | None]:
    manifest = _read_manifest(index_dir)
    indices = IndexSet()
    stats = None
    corpus_file = index_dir / "corpus.jsonl"
    if corpus_file.exists():
        indices.corpus = records.load_corpus(corpus_file)
    sparse_file = index_dir / "sparse.sqi"
    if sparse_file.exists():
        indices.sparse = sparse.load_sparse(sparse_file)
    vec_file = index_dir / "vectors.sqv"
    if vec_file.exists():
        cfg = manifest.get("dense", {})
        indices.dense_store = dense.load_vectors(
            vec_file, normalize=cfg.get("normalize", False)
        )
        if method in ("dr_hnsw", "all"):
            h = cfg.get("hnsw", {})
            indices.hnsw = dense.build_hnsw(
                indices.dense_store,
                M=h.get("M", 16),
                ef_construction=h.get("ef_construction", 200),
                seed=h.get("seed", 0),
            )
        qfile = index_dir / "queries.sqv"
        if qfile.exists():
            indices.query_vectors = dense.load_vectors(
                qfile, normalize=cfg.get("normalize", False)
            )
    lm_file = index_dir / "lm.sql"
    if lm_file.exists():
        stats = expert_lm.load_lm_stats(lm_file)
    return indices, stats


def cmd_recommend(args) -> int:
    index_dir = Path(args.index_dir)
    indices, stats = _load_index_set(index_dir, args.method)
    queries = records.load_corpus(args.queries)
    spec = QuerySpec(
        mode=args.query_mode,
        w=args.w,
        strip_source=args.strip_source,
    )
    run = {}
    for rec in queries:
        ranking = recommend(indices, stats, rec, args.method, spec, k=args.k)
        run[rec.record_id] = list(ranking.entries)
    evaluation.write_run(run, args.out, tag=args.tag or args.method)
    print(f"wrote run for {len(run)} queries -> {args.out}")
    if args.qrels_out:
        qrels = evaluation.Qrels(
            truth={rec.record_id: rec.source_entity for rec in queries}
        )
        evaluation.save_qrels(qrels, args.qrels_out)
        print(f"wrote qrels -> {args.qrels_out}")
    return 0


def cmd_serve(args) -> int:
    index_dir = Path(args.index_dir)
    indices, stats = _load_index_set(index_dir, "all")
    state = ServiceState(indices=indices, stats=stats)
    server = make_server(state, host=args.host, port=args.port)
    host, port = server.server_address[:2]
    print(f"serving on http://{host}:{port} (Ctrl-C to stop)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def cmd_eval(args) -> int:
    run = evaluation.read_run(args.run)
    qrels = evaluation.load_qrels(args.qrels)
    model = None
    if args.categories:
        with open(args.categories, "r", encoding="utf-8") as fh:
            categories = json.load(fh)
        model = evaluation.build_cluster_model(
            categories, m=args.top_categories, k=args.clusters, seed=args.seed
        )
    elif args.corpus:
        corpus = records.load_corpus(args.corpus)
        categories = {}
        for rec in corpus:
            categories.setdefault(rec.source_entity, set()).update(rec.categories)
        model = evaluation.build_cluster_model(
            {e: sorted(c) for e, c in categories.items()},
            m=args.top_categories, k=args.clusters, seed=args.seed,
        )
    report = evaluation.evaluate_run(run, qrels, cluster_model=model)
    print(evaluation.format_metrics(report, label=Path(args.run).name))
    if args.json_out:
        Path(args.json_out).write_text(
            evaluation.metrics_to_json(report), encoding="utf-8"
        )
        print(f"wrote report -> {args.json_out}")
    return 0


def _add_common(p: argparse.ArgumentParser, *names: str) -> None:
    if "corpus" in names:
        p.add_argument("--corpus", help="record JSONL file")
    if "index-dir" in names:
        p.add_argument("--index-dir", required=True, help="index directory")
    if "doc-mode" in names:
        p.add_argument("--doc-mode", choices=("sentence", "context"),
                       default="context")
    if "seed" in names:
        p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sourcequote",
        description="Quote-source retrieval and expert recommendation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate records into an index directory")
    p.add_argument("--corpus", required=True)
    _add_common(p, "index-dir")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("filter", help="run the construction filters over SRL input")
    p.add_argument("--srl", required=True, help="SRL sentence JSONL")
    p.add_argument("--triggers", required=True, help="trigger verb list")
    p.add_argument("--ontology", required=True, help="allowed ontology classes")
    p.add_argument("--min-count", type=int, default=2)
    p.add_argument("--no-dedup", action="store_true")
    p.add_argument("--dedup-threshold", type=float, default=0.8)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("split", help="chronological train/valid/test split")
    p.add_argument("--corpus", required=True)
    p.add_argument("--train-end", required=True)
    p.add_argument("--valid-test-start", required=True)
    p.add_argument("--valid-fraction", type=float, default=0.5)
    _add_common(p, "seed")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("stats", help="dataset statistics report")
    p.add_argument("--corpus", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("build-sparse", help="build the BM25 index")
    _add_common(p, "corpus", "index-dir", "doc-mode")
    p.add_argument("--k1", type=float, default=0.9)
    p.add_argument("--b", type=float, default=0.4)
    p.add_argument("--no-stem", action="store_true")
    p.add_argument("--no-stopwords", action="store_true")
    p.set_defaults(func=cmd_build_sparse)

    p = sub.add_parser("build-dense", help="register embedding files")
    _add_common(p, "index-dir", "seed")
    p.add_argument("--vectors", required=True, help="document vectors (SQV1)")
    p.add_argument("--query-vectors", help="query vectors keyed by record id")
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--M", type=int, default=16)
    p.add_argument("--ef-construction", type=int, default=200)
    p.set_defaults(func=cmd_build_dense)

    p = sub.add_parser("build-lm", help="build expert language-model statistics")
    _add_common(p, "corpus", "index-dir", "doc-mode")
    p.set_defaults(func=cmd_build_lm)

    p = sub.add_parser("annotate", help="rule-based direct quote extraction")
    p.add_argument("--corpus", required=True)
    p.add_argument("--triggers", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("export-bio", help="write token/tag training data")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_bio)

    p = sub.add_parser("export-qa", help="write question-answering training data")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--source-mode", choices=annotator.SOURCE_MODES,
                   default="true_source")
    p.add_argument("--predictions", help="JSONL with record_id/source predictions")
    p.set_defaults(func=cmd_export_qa)

    p = sub.add_parser("recommend", help="rank experts for query records")
    _add_common(p, "index-dir")
    p.add_argument("--queries", required=True, help="query record JSONL")
    p.add_argument("--method", choices=METHODS, default="dr_sparse")
    p.add_argument("--query-mode", choices=("title", "keywords", "summary"),
                   default="keywords")
    p.add_argument("--w", type=int, default=None,
                   help="query word cap (expert retrieval)")
    p.add_argument("--strip-source", action="store_true")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--out", required=True)
    p.add_argument("--tag")
    p.add_argument("--qrels-out")
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("serve", help="HTTP search endpoint")
    _add_common(p, "index-dir")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("eval", help="score a run file against qrels")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--corpus", help="derive source categories for relaxed metrics")
    p.add_argument("--categories", help="JSON file: entity -> category list")
    p.add_argument("--clusters", type=int, default=40)
    p.add_argument("--top-categories", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json-out")
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SourceQuoteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
