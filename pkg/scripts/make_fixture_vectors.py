#!/usr/bin/env python3
"""Write an SQV1 vector file for a corpus using a hashed bag-of-words encoder.

The encoder is a deterministic stand-in for a learned sentence encoder:
tokens are feature-hashed (blake2b) into signed buckets, tf-weighted, and
L2-normalized. It keeps lexical overlap visible to the dense indexes, which
is all the tests and the synthetic benchmark need. Real runs should encode
with the external exporter instead.
"""

from __future__ import annotations

import argparse
import hashlib

import numpy as np

from sourcequote.analysis import TokenizerConfig, tokenize
from sourcequote.dense import VectorStore, save_vectors
from sourcequote.records import Corpus, load_corpus
from sourcequote.recommend import DocSpec, form_document

MODEL_ID = "hashed-bow-v1"
_CONFIG = TokenizerConfig(lowercase=True)


def _bucket(token: str, dim: int) -> tuple[int, float]:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    value = int.from_bytes(digest, "little")
    sign = 1.0 if value & 1 else -1.0
    return (value >> 1) % dim, sign


def encode_texts(texts: list[str], dim: int = 64) -> np.ndarray:
    out = np.zeros((len(texts), dim), dtype=np.float32)
    for row, text in enumerate(texts):
        for token in tokenize(text, _CONFIG):
            col, sign = _bucket(token, dim)
            out[row, col] += sign
        norm = float(np.linalg.norm(out[row]))
        if norm > 0:
            out[row] /= norm
    return out


def corpus_texts(corpus: Corpus, text_mode: str, doc_mode: str) -> list[str]:
    if text_mode == "doc":
        spec = DocSpec(mode=doc_mode)
        return [form_document(rec, spec)[1] for rec in corpus]
    if text_mode == "keywords":
        return [" ".join(rec.keywords) for rec in corpus]
    if text_mode == "title":
        return [rec.title for rec in corpus]
    return [rec.summary_first_sentence for rec in corpus]


def write_store(corpus: Corpus, out_path: str, dim: int, text_mode: str,
                doc_mode: str) -> VectorStore:
    texts = corpus_texts(corpus, text_mode, doc_mode)
    vectors = encode_texts(texts, dim=dim)
    store = VectorStore(
        dim=dim,
        vectors=vectors,
        doc_ids=[rec.record_id for rec in corpus],
        normalized=True,
        metadata={"model": MODEL_ID, "text_mode": text_mode},
    )
    save_vectors(store, out_path)
    return store


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--corpus", required=True)
    ap.add_argument("--out", required=True)
    ap.add_argument("--dim", type=int, default=64)
    ap.add_argument("--text-mode", choices=("doc", "keywords", "title", "summary"),
                    default="doc")
    ap.add_argument("--doc-mode", choices=("sentence", "context"), default="context")
    args = ap.parse_args()
    corpus = load_corpus(args.corpus)
    store = write_store(corpus, args.out, args.dim, args.text_mode, args.doc_mode)
    print(f"wrote {len(store)} vectors (dim {store.dim}) -> {args.out}")


if __name__ == "__main__":
    main()
