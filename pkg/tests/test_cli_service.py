import json
import threading

import pytest
import requests

from sourcequote.cli import main
from sourcequote.dense import build_hnsw, load_vectors
from sourcequote.expert_lm import build_lm_stats
from sourcequote.records import load_corpus, save_corpus
from sourcequote.recommend import DocSpec, IndexSet, form_document
from sourcequote.service import (
    SearchRequest,
    ServiceState,
    handle_search,
    make_server,
    readiness,
)
from sourcequote.sparse import build_sparse
from sourcequote.synthetic import generate_synthetic

from conftest import DATA_DIR


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    """An index directory populated through the CLI itself."""
    root = tmp_path_factory.mktemp("cli")
    data = generate_synthetic(n_topics=5, experts_per_topic=4, n_queries=12, seed=3)
    corpus_path = root / "raw_corpus.jsonl"
    queries_path = root / "queries.jsonl"
    save_corpus(data.corpus, corpus_path)
    save_corpus(data.queries, queries_path)
    index_dir = root / "index"
    assert main(["ingest", "--corpus", str(corpus_path), "--index-dir", str(index_dir)]) == 0
    assert main(["build-sparse", "--index-dir", str(index_dir)]) == 0
    assert main(["build-lm", "--index-dir", str(index_dir)]) == 0
    return root, index_dir, queries_path, data


class TestCliFlow:
    def test_stats_table(self, synth_dir, capsys):
        root, index_dir, _, _ = synth_dir
        assert main(["stats", "--corpus", str(index_dir / "corpus.jsonl")]) == 0
        out = capsys.readouterr().out
        assert "No. of samples" in out

    def test_stats_json(self, synth_dir, capsys):
        _, index_dir, _, data = synth_dir
        assert main(["stats", "--corpus", str(index_dir / "corpus.jsonl"), "--json"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["n_samples"] == len(data.corpus)

    def test_recommend_and_eval(self, synth_dir, capsys):
        root, index_dir, queries_path, data = synth_dir
        run_path = root / "run.txt"
        qrels_path = root / "qrels.txt"
        assert main([
            "recommend", "--index-dir", str(index_dir),
            "--queries", str(queries_path),
            "--method", "dr_sparse", "--query-mode", "keywords",
            "--k", "10", "--out", str(run_path),
            "--qrels-out", str(qrels_path),
        ]) == 0
        assert main([
            "eval", "--run", str(run_path), "--qrels", str(qrels_path),
        ]) == 0
        out = capsys.readouterr().out
        assert "strict" in out and "MAP" in out

    def test_eval_with_relaxed_metrics(self, synth_dir, capsys, tmp_path):
        root, index_dir, queries_path, data = synth_dir
        run_path = root / "run_er.txt"
        qrels_path = root / "qrels_er.txt"
        assert main([
            "recommend", "--index-dir", str(index_dir),
            "--queries", str(queries_path),
            "--method", "er_document", "--query-mode", "keywords", "--w", "5",
            "--out", str(run_path), "--qrels-out", str(qrels_path),
        ]) == 0
        categories_path = tmp_path / "cats.json"
        categories_path.write_text(json.dumps(data.categories))
        json_out = tmp_path / "report.json"
        assert main([
            "eval", "--run", str(run_path), "--qrels", str(qrels_path),
            "--categories", str(categories_path), "--clusters", "5",
            "--json-out", str(json_out),
        ]) == 0
        report = json.loads(json_out.read_text())
        assert report["map_relaxed"] is not None
        assert report["map_relaxed"] >= report["map_strict"]

    def test_split_command(self, synth_dir, tmp_path, capsys):
        root, index_dir, queries_path, data = synth_dir
        merged = tmp_path / "all.jsonl"
        save_corpus(
            list(data.corpus) + list(data.queries), merged
        )
        out_dir = tmp_path / "splits"
        assert main([
            "split", "--corpus", str(merged),
            "--train-end", "2020-05-31T23:59:59Z",
            "--valid-test-start", "2020-06-21T00:00:00Z",
            "--valid-fraction", "0.5", "--seed", "7",
            "--out-dir", str(out_dir),
        ]) == 0
        train = load_corpus(out_dir / "train.jsonl")
        valid = load_corpus(out_dir / "valid.jsonl")
        test = load_corpus(out_dir / "test.jsonl")
        assert len(train) == len(data.corpus)
        assert len(valid) + len(test) == len(data.queries)

    def test_export_bio_and_qa(self, synth_dir, tmp_path, capsys):
        _, index_dir, _, _ = synth_dir
        bio = tmp_path / "out.bio"
        qa = tmp_path / "out_qa.jsonl"
        corpus = str(index_dir / "corpus.jsonl")
        assert main(["export-bio", "--corpus", corpus, "--out", str(bio)]) == 0
        assert main(["export-qa", "--corpus", corpus, "--out", str(qa)]) == 0
        assert "\t" in bio.read_text().splitlines()[0]
        first = json.loads(qa.read_text().splitlines()[0])
        assert first["question"] == "Who is the source?"

    def test_annotate_on_mini_corpus(self, tmp_path, capsys):
        # mini corpus has indirect quotes only: the annotator abstains
        triggers = tmp_path / "triggers.txt"
        triggers.write_text("said\nwarned\nannounced\nnoted\nstated\n")
        assert main([
            "annotate", "--corpus", str(DATA_DIR / "mini_corpus.jsonl"),
            "--triggers", str(triggers),
        ]) == 0
        out = capsys.readouterr().out
        assert "extracted on 0/6" in out

    def test_filter_command(self, tmp_path, capsys):
        srl = tmp_path / "srl.jsonl"
        text = "Dr. Lee said the vaccine is effective and safe."
        rows = []
        for i in range(2):  # same entity twice to pass min-count
            rows.append(json.dumps({
                "article_id": f"a{i}",
                "sentence_text": text,
                "frames": [{
                    "verb": [8, 12], "verb_lemma": "say",
                    "subject": [0, 7],
                    "object": [13, len(text) - 1],
                }],
                "entities": [{
                    "span": [0, 7], "entity": "entity/Dr_Lee",
                    "ontology_classes": ["Person"],
                }],
                "published_at": f"2020-03-0{i + 1}T00:00:00Z",
                "title": f"briefing number {i} differs a lot {'x' * (10 * i)}",
                "summary_first_sentence": f"summary text {i} {'y' * (5 * i)}",
            }))
        srl.write_text("\n".join(rows) + "\n")
        triggers = tmp_path / "triggers.txt"
        triggers.write_text("say\n")
        ontology = tmp_path / "classes.txt"
        ontology.write_text("Person\n")
        out = tmp_path / "filtered.jsonl"
        assert main([
            "filter", "--srl", str(srl), "--triggers", str(triggers),
            "--ontology", str(ontology), "--out", str(out),
        ]) == 0
        produced = load_corpus(out)
        assert len(produced) == 2
        assert produced.records[0].quote == "the vaccine is effective and safe"

    def test_dense_build_and_recommend(self, tmp_path, capsys):
        index_dir = tmp_path / "dense_index"
        corpus = str(DATA_DIR / "mini_corpus.jsonl")
        assert main(["ingest", "--corpus", corpus, "--index-dir", str(index_dir)]) == 0
        assert main([
            "build-dense", "--index-dir", str(index_dir),
            "--vectors", str(DATA_DIR / "fixture_docs.sqv"),
            "--query-vectors", str(DATA_DIR / "fixture_queries.sqv"),
            "--M", "4", "--ef-construction", "16", "--seed", "1",
        ]) == 0
        for method in ("dr_flat", "dr_hnsw"):
            run_path = tmp_path / f"{method}.run"
            assert main([
                "recommend", "--index-dir", str(index_dir),
                "--queries", corpus, "--method", method,
                "--k", "3", "--out", str(run_path),
            ]) == 0
            assert run_path.read_text().strip()

    def test_cli_error_path(self, tmp_path, capsys):
        missing = tmp_path / "none.jsonl"
        missing.write_text('{"record_id": "x"}\n')
        rc = main(["stats", "--corpus", str(missing)])
        assert rc == 1
        assert "error:" in capsys.readouterr().err


def service_state() -> ServiceState:
    data = generate_synthetic(n_topics=4, experts_per_topic=3, n_queries=6, seed=5)
    pairs = [form_document(rec, DocSpec(mode="context")) for rec in data.corpus]
    indices = IndexSet(corpus=data.corpus, sparse=build_sparse(pairs))
    stats = build_lm_stats(
        [(doc_id, text, rec.source_entity)
         for (doc_id, text), rec in zip(pairs, data.corpus)]
    )
    return ServiceState(indices=indices, stats=stats), data


class TestHandleSearch:
    def test_happy_path(self):
        state, data = service_state()
        query = " ".join(data.corpus.records[0].keywords)
        status, payload = handle_search(
            SearchRequest(query=query, method="dr_sparse", k=5), state
        )
        assert status == 200
        assert 1 <= len(payload["experts"]) <= 5
        top = payload["experts"][0]
        assert top["expert"] == data.corpus.records[0].source_entity
        assert top["supporting_quotes"]
        assert payload["took_ms"] >= 0

    def test_supporting_quotes_belong_to_expert(self):
        state, data = service_state()
        by_id = state.indices.corpus.by_id()
        query = " ".join(data.corpus.records[0].keywords)
        for method in ("dr_sparse", "er_document"):
            _, payload = handle_search(
                SearchRequest(query=query, method=method, k=5), state
            )
            for row in payload["experts"]:
                for quote in row["supporting_quotes"]:
                    assert by_id[quote["record_id"]].source_entity == row["expert"]

    def test_empty_query_400(self):
        state, _ = service_state()
        status, _ = handle_search(SearchRequest(query="  ", method="dr_sparse"), state)
        assert status == 400

    def test_unknown_method_400(self):
        state, _ = service_state()
        status, _ = handle_search(SearchRequest(query="x", method="dr_magic"), state)
        assert status == 400

    def test_k_out_of_range_400(self):
        state, _ = service_state()
        status, _ = handle_search(
            SearchRequest(query="x", method="dr_sparse", k=500), state
        )
        assert status == 400

    def test_dense_before_load_503(self):
        state, _ = service_state()
        status, _ = handle_search(
            SearchRequest(query="x", method="dr_hnsw", k=5), state
        )
        assert status == 503

    def test_identical_requests_identical_bodies(self):
        state, data = service_state()
        query = " ".join(data.corpus.records[0].keywords)
        request = SearchRequest(query=query, method="er_candidate", k=5)
        _, a = handle_search(request, state)
        _, b = handle_search(request, state)
        a.pop("took_ms")
        b.pop("took_ms")
        assert a == b

    def test_dense_ready_with_fixture(self):
        corpus = load_corpus(DATA_DIR / "mini_corpus.jsonl")
        store = load_vectors(DATA_DIR / "fixture_docs.sqv")
        queries = load_vectors(DATA_DIR / "fixture_queries.sqv")
        indices = IndexSet(
            corpus=corpus,
            dense_store=store,
            hnsw=build_hnsw(store, M=4, ef_construction=16, seed=1),
            query_vectors=queries,
        )
        state = ServiceState(indices=indices)
        status, payload = handle_search(
            SearchRequest(query="m1", method="dr_hnsw", k=3), state
        )
        assert status == 200
        assert payload["experts"]
        # unknown query id: the index is up but the id cannot be embedded
        status, _ = handle_search(
            SearchRequest(query="free text", method="dr_hnsw", k=3), state
        )
        assert status == 400


class TestLiveServer:
    def test_healthz_and_experts(self):
        state, data = service_state()
        server = make_server(state, host="127.0.0.1", port=0)
        host, port = server.server_address[:2]
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        try:
            base = f"http://{host}:{port}"
            health = requests.get(f"{base}/healthz", timeout=5).json()
            assert health["sparse"] is True
            assert health["dense"] is False
            query = " ".join(data.corpus.records[0].keywords)
            resp = requests.get(
                f"{base}/experts",
                params={"q": query, "method": "dr_sparse", "k": 3},
                timeout=5,
            )
            assert resp.status_code == 200
            assert resp.json()["experts"]
            missing = requests.get(
                f"{base}/experts",
                params={"q": query, "method": "dr_flat", "k": 3},
                timeout=5,
            )
            assert missing.status_code == 503
            assert requests.get(f"{base}/nope", timeout=5).status_code == 404
        finally:
            server.shutdown()
            server.server_close()
