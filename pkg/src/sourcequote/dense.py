"""Exact and approximate nearest-neighbor search over document embeddings.

Embeddings are consumed from files, never computed here. Similarity is the
inner product, which is cosine similarity when the store is L2-normalized.

Vector file format (magic ``SQV1``, little-endian):

    magic        4 bytes   b"SQV1"
    dim          u32
    count        u64
    table_off    u64       byte offset of the name table, 0 if absent
    vectors      count * dim float32, row-major, starting at offset 24
    name table   u64 n_entries, then n_entries strings (u32 length-prefixed
                 UTF-8). The first `count` entries are doc_ids in row order;
                 any further entries are "key=value" metadata, e.g. the
                 encoder model id, or "normalized=1" for unit-norm payloads.

Without a name table, doc_ids default to stringified row indices.
"""

from __future__ import annotations

import heapq
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .binio import Reader, Writer
from .errors import (
    BadMagic,
    DimMismatch,
    EmptyStore,
    NormalizationError,
    ParameterError,
    TruncatedFile,
)

MAGIC = b"SQV1"


@dataclass
class VectorStore:
    dim: int
    vectors: np.ndarray  # (n, dim) float32
    doc_ids: list[str]
    normalized: bool = False
    metadata: dict[str, str] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.doc_ids)


def save_vectors(store: VectorStore, path) -> None:
    w = Writer()
    w.raw(MAGIC)
    w.u32(store.dim)
    w.u64(len(store))
    table_offset_pos = w.tell()
    w.u64(0)  # patched below
    w.raw(np.ascontiguousarray(store.vectors, dtype=np.float32).tobytes())
    table_offset = w.tell()
    meta = dict(store.metadata)
    if store.normalized:
        meta["normalized"] = "1"
    else:
        meta.pop("normalized", None)
    w.u64(len(store.doc_ids) + len(meta))
    for doc_id in store.doc_ids:
        w.string(doc_id)
    for key in sorted(meta):
        w.string(f"{key}={meta[key]}")
    data = bytearray(w.getvalue())
    struct.pack_into("<Q", data, table_offset_pos, table_offset)
    with open(path, "wb") as fh:
        fh.write(bytes(data))


def load_vectors(path, normalize: bool = False) -> VectorStore:
    """Read an SQV1 file; optionally L2-normalize the vectors on load."""
    with open(path, "rb") as fh:
        r = Reader(fh.read())
    if r.raw(4) != MAGIC:
        raise BadMagic(f"{path} is not a vector file")
    dim = r.u32()
    count = r.u64()
    table_offset = r.u64()
    if count > 0 and dim == 0:
        raise DimMismatch("vector file declares zero dimension")
    payload = r.raw(count * dim * 4)
    vectors = np.frombuffer(payload, dtype="<f4").reshape(count, dim).copy()

    doc_ids = [str(i) for i in range(count)]
    metadata: dict[str, str] = {}
    if table_offset:
        r.seek(table_offset)
        n_entries = r.u64()
        if n_entries < count:
            raise TruncatedFile(
                f"name table holds {n_entries} entries for {count} vectors"
            )
        entries = [r.string() for _ in range(n_entries)]
        doc_ids = entries[:count]
        for entry in entries[count:]:
            key, _, value = entry.partition("=")
            metadata[key] = value

    normalized = metadata.get("normalized") == "1"
    if normalize:
        norms = np.linalg.norm(vectors, axis=1)
        if count and float(norms.min()) == 0.0:
            row = int(np.argmin(norms))
            raise NormalizationError(f"cannot normalize zero vector at row {row}")
        vectors = vectors / norms[:, None]
        vectors = vectors.astype(np.float32)
        normalized = True
    return VectorStore(
        dim=dim,
        vectors=vectors,
        doc_ids=doc_ids,
        normalized=normalized,
        metadata=metadata,
    )


def _as_query(store: VectorStore, query_vector) -> np.ndarray:
    q = np.asarray(query_vector, dtype=np.float32).ravel()
    if q.shape != (store.dim,):
        raise DimMismatch(f"query has dim {q.shape[0]}, store has dim {store.dim}")
    return q


def search_flat(
    store: VectorStore, query_vector, k: int
) -> list[tuple[str, float]]:
    """Exact top-k by inner product, descending; ties by ascending doc_id."""
    q = _as_query(store, query_vector)
    sims = store.vectors.astype(np.float64) @ q.astype(np.float64)
    order = sorted(range(len(store)), key=lambda i: (-sims[i], store.doc_ids[i]))
    return [(store.doc_ids[i], float(sims[i])) for i in order[:k]]


@dataclass
class HnswIndex:
    store: VectorStore
    M: int
    ef_construction: int
    layers: list[dict[int, list[int]]]  # layers[l][node] -> neighbor nodes
    entry_point: int
    levels: np.ndarray  # per-node top layer
    rng_seed: int

    @property
    def max_level(self) -> int:
        return len(self.layers) - 1


def _search_layer(
    vecs: np.ndarray,
    adj: dict[int, list[int]],
    q: np.ndarray,
    entry_points: list[int],
    ef: int,
    visited: np.ndarray,
) -> list[tuple[float, int]]:
    """Best-first beam search on one layer; returns (distance, node) ascending.

    Distance is the negated inner product. The visited scratch array is
    caller-owned and reset here.
    """
    visited[:] = False
    eps = list(dict.fromkeys(entry_points))
    for e in eps:
        visited[e] = True
    dists = -(vecs[eps] @ q)
    candidates = list(zip(dists.tolist(), eps))
    heapq.heapify(candidates)
    best = [(-d, e) for d, e in candidates]
    heapq.heapify(best)
    while len(best) > ef:
        heapq.heappop(best)
    while candidates:
        dist, node = heapq.heappop(candidates)
        if len(best) >= ef and dist > -best[0][0]:
            break
        neighbors = adj.get(node)
        if not neighbors:
            continue
        fresh = [x for x in neighbors if not visited[x]]
        if not fresh:
            continue
        visited[fresh] = True
        fresh_dists = -(vecs[fresh] @ q)
        if len(best) >= ef:
            worst = -best[0][0]
            pairs = [(d, x) for d, x in zip(fresh_dists.tolist(), fresh) if d < worst]
        else:
            pairs = list(zip(fresh_dists.tolist(), fresh))
        for d, x in pairs:
            if len(best) < ef:
                heapq.heappush(candidates, (d, x))
                heapq.heappush(best, (-d, x))
            elif d < -best[0][0]:
                heapq.heappush(candidates, (d, x))
                heapq.heapreplace(best, (-d, x))
    out = [(-neg, node) for neg, node in best]
    out.sort()
    return out


def build_hnsw(
    store: VectorStore,
    M: int = 16,
    ef_construction: int = 200,
    seed: int = 0,
) -> HnswIndex:
    """Construct the layered graph; deterministic for a given seed.

    Level draws come from a geometric distribution with mL = 1/ln(M), the
    standard choice. Per-layer degree is capped at M (2M on layer 0) by
    distance-based pruning.
    """
    n = len(store)
    if n == 0:
        raise EmptyStore("cannot build an index over an empty store")
    if M < 1:
        raise ParameterError(f"M must be positive, got {M}")
    if ef_construction < 1:
        raise ParameterError(f"ef_construction must be positive, got {ef_construction}")
    mL = 1.0 / math.log(M) if M > 1 else 0.0
    rng = np.random.Generator(np.random.PCG64(seed))
    draws = rng.random(n)
    levels = np.floor(-np.log(draws) * mL).astype(np.int64) if mL else np.zeros(n, np.int64)
    max_level = int(levels.max())
    layers: list[dict[int, list[int]]] = [dict() for _ in range(max_level + 1)]
    vecs = np.ascontiguousarray(store.vectors, dtype=np.float32)
    visited = np.zeros(n, dtype=bool)

    entry = 0
    entry_level = int(levels[0])
    for lc in range(entry_level + 1):
        layers[lc][0] = []

    for node in range(1, n):
        level = int(levels[node])
        q = vecs[node]
        eps = [entry]
        for lc in range(entry_level, level, -1):
            found = _search_layer(vecs, layers[lc], q, eps, 1, visited)
            eps = [found[0][1]]
        for lc in range(min(level, entry_level), -1, -1):
            found = _search_layer(vecs, layers[lc], q, eps, ef_construction, visited)
            cap = 2 * M if lc == 0 else M
            selected = [e for _, e in heapq.nsmallest(cap, found)]
            layers[lc][node] = list(selected)
            for other in selected:
                linked = layers[lc][other]
                linked.append(node)
                if len(linked) > cap:
                    dists = -(vecs[linked] @ vecs[other])
                    pruned = heapq.nsmallest(cap, zip(dists.tolist(), linked))
                    layers[lc][other] = [e for _, e in pruned]
            eps = [e for _, e in found]
        if level > entry_level:
            for lc in range(entry_level + 1, level + 1):
                layers[lc][node] = []
            entry = node
            entry_level = level

    return HnswIndex(
        store=store,
        M=M,
        ef_construction=ef_construction,
        layers=layers,
        entry_point=entry,
        levels=levels,
        rng_seed=seed,
    )


def search_hnsw(
    index: HnswIndex,
    query_vector,
    k: int,
    ef_search: int = 100,
) -> list[tuple[str, float]]:
    """Greedy descent then a beam of width ef_search on the bottom layer."""
    if k < 1:
        raise ParameterError(f"k must be positive, got {k}")
    if ef_search < k:
        raise ParameterError(f"ef_search ({ef_search}) must be at least k ({k})")
    store = index.store
    q = _as_query(store, query_vector)
    vecs = store.vectors
    visited = np.zeros(len(store), dtype=bool)
    eps = [index.entry_point]
    for lc in range(index.max_level, 0, -1):
        found = _search_layer(vecs, index.layers[lc], q, eps, 1, visited)
        eps = [found[0][1]]
    found = _search_layer(vecs, index.layers[0], q, eps, ef_search, visited)
    nodes = [node for _, node in found]
    sims = vecs[nodes].astype(np.float64) @ q.astype(np.float64)
    ranked = sorted(
        zip(nodes, sims.tolist()),
        key=lambda item: (-item[1], store.doc_ids[item[0]]),
    )
    return [(store.doc_ids[node], sim) for node, sim in ranked[:k]]
