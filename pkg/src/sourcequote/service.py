"""Read-only HTTP search endpoint over a loaded index set.

Routes:
    GET /experts?q=...&method=...&k=...   ranked experts with supporting quotes
    GET /healthz                          per-index readiness flags

All index building happens in the CLI beforehand; the handler never mutates
state, so one immutable :class:`ServiceState` is shared by all request
threads. Status codes: 200 on success, 400 for invalid requests, 503 when
the requested method's index is not loaded.

For dense methods the query string is resolved as a row id in the loaded
query-vector file, since this service never computes embeddings.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from .analysis import tokenize
from .errors import EmptyQuery, IndexMissing, SourceQuoteError
from .expert_lm import LmStats, rank_experts, top_documents_for_expert
from .recommend import DOC_CUT, METHODS, IndexSet, experts_from_documents, retrieve_documents

MAX_K = 100
SUPPORTING_QUOTES = 3


@dataclass(frozen=True)
class SearchRequest:
    query: str
    method: str
    k: int = 10


@dataclass
class ServiceState:
    indices: IndexSet
    stats: LmStats | None = None
    tag: str = "sourcequote"


def readiness(state: ServiceState) -> dict:
    ix = state.indices
    return {
        "corpus": ix.corpus is not None,
        "sparse": ix.sparse is not None,
        "dense": ix.dense_store is not None,
        "hnsw": ix.hnsw is not None,
        "query_vectors": ix.query_vectors is not None,
        "lm": state.stats is not None,
    }


def _method_ready(state: ServiceState, method: str) -> bool:
    ix = state.indices
    if ix.corpus is None:
        return False
    if method == "dr_sparse":
        return ix.sparse is not None
    if method == "dr_flat":
        return ix.dense_store is not None and ix.query_vectors is not None
    if method == "dr_hnsw":
        return (
            ix.dense_store is not None
            and ix.hnsw is not None
            and ix.query_vectors is not None
        )
    return state.stats is not None


def handle_search(request: SearchRequest, state: ServiceState) -> tuple[int, dict]:
    """Pure request handler; returns (status code, response payload)."""
    if not request.query.strip():
        return 400, {"error": "query must be non-empty"}
    if request.method not in METHODS:
        return 400, {"error": f"unknown method {request.method!r}"}
    if not 1 <= request.k <= MAX_K:
        return 400, {"error": f"k must be in [1, {MAX_K}]"}
    if not _method_ready(state, request.method):
        return 503, {"error": f"index for {request.method} not loaded"}

    started = time.perf_counter()
    try:
        if request.method.startswith("dr_"):
            docs = retrieve_documents(
                state.indices, request.query, request.method,
                doc_k=max(DOC_CUT, request.k),
            )
            ranking = experts_from_documents(docs, state.indices.corpus)
            entries = ranking.entries[: request.k]
            quotes = _quotes_from_documents(state, docs)
        else:
            terms = tokenize(request.query, state.stats.config)
            lm_method = "candidate" if request.method == "er_candidate" else "document"
            ranking = rank_experts(state.stats, terms, method=lm_method, k=request.k)
            entries = ranking.entries
            quotes = {
                expert: _quotes_for_expert(state, terms, expert)
                for expert, _ in entries
            }
    except EmptyQuery as exc:
        return 400, {"error": str(exc)}
    except IndexMissing as exc:
        # dense id lookup failures land here: the index is up, the id is not
        return 400, {"error": str(exc)}
    except SourceQuoteError as exc:
        return 400, {"error": str(exc)}
    took_ms = (time.perf_counter() - started) * 1000.0

    return 200, {
        "query": request.query,
        "method": request.method,
        "experts": [
            {
                "expert": expert,
                "score": score,
                "supporting_quotes": quotes.get(expert, []),
            }
            for expert, score in entries
        ],
        "took_ms": took_ms,
    }


def _quotes_from_documents(state: ServiceState, docs) -> dict[str, list[dict]]:
    by_id = state.indices.corpus.by_id()
    grouped: dict[str, list[dict]] = {}
    for doc_id, score in docs:
        record = by_id.get(doc_id)
        if record is None:
            continue
        bucket = grouped.setdefault(record.source_entity, [])
        if len(bucket) < SUPPORTING_QUOTES:
            bucket.append(
                {"record_id": doc_id, "quote": record.quote, "score": score}
            )
    return grouped


def _quotes_for_expert(state: ServiceState, terms, expert: str) -> list[dict]:
    by_id = state.indices.corpus.by_id()
    out = []
    for doc_id, score in top_documents_for_expert(
        state.stats, terms, expert, n=SUPPORTING_QUOTES
    ):
        record = by_id.get(doc_id)
        if record is not None:
            out.append({"record_id": doc_id, "quote": record.quote, "score": score})
    return out


class _Handler(BaseHTTPRequestHandler):
    state: ServiceState  # set by make_server

    def do_GET(self) -> None:  # noqa: N802 (http.server API)
        url = urlparse(self.path)
        if url.path == "/healthz":
            self._reply(200, readiness(self.state))
            return
        if url.path == "/experts":
            params = parse_qs(url.query)
            try:
                k = int(params.get("k", ["10"])[0])
            except ValueError:
                self._reply(400, {"error": "k must be an integer"})
                return
            request = SearchRequest(
                query=params.get("q", [""])[0],
                method=params.get("method", ["dr_sparse"])[0],
                k=k,
            )
            status, payload = handle_search(request, self.state)
            self._reply(status, payload)
            return
        self._reply(404, {"error": "not found"})

    def _reply(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, fmt, *args) -> None:  # quiet by default
        pass


def make_server(state: ServiceState, host: str = "127.0.0.1", port: int = 8080):
    handler = type("Handler", (_Handler,), {"state": state})
    return ThreadingHTTPServer((host, port), handler)
