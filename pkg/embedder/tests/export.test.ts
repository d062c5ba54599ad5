import { execFileSync } from "child_process";
import * as fs from "fs";
import * as os from "os";
import * as path from "path";
import { afterAll, describe, expect, it } from "vitest";

import { deserializeVectors, serializeVectors } from "../src/codec";
import { documentText, readCorpus } from "../src/corpus";
import { loadEncoder, tokenize } from "../src/encoder";
import { EncodeError, ModelLoadError } from "../src/errors";
import { exportEmbeddings } from "../src/export";

const tmpDir = fs.mkdtempSync(path.join(os.tmpdir(), "sqv-embedder-"));
afterAll(() => fs.rmSync(tmpDir, { recursive: true, force: true }));

function record(id: string, main: string, left = "", right = ""): string {
  return JSON.stringify({
    record_id: id,
    left_sentence: left,
    main_sentence: main,
    right_sentence: right,
  });
}

function writeCorpus(name: string, lines: string[]): string {
  const file = path.join(tmpDir, name);
  fs.writeFileSync(file, lines.join("\n") + "\n");
  return file;
}

const TWO_RECORDS = [
  record("r1", "Dr. Lee said the vaccine is effective and safe.",
    "Officials met on Tuesday.", "The briefing ended."),
  record("r2", "Maria Gomez warned that volatility could persist."),
];

describe("codec", () => {
  it("round-trips vectors, doc ids, and metadata", () => {
    const vectors = [new Float32Array([1, 2, 3]), new Float32Array([-1, 0.5, 4])];
    const buffer = serializeVectors({
      dim: 3,
      vectors,
      docIds: ["a", "b"],
      metadata: { model: "m1", normalized: "1" },
    });
    const back = deserializeVectors(buffer);
    expect(back.dim).toBe(3);
    expect(back.docIds).toEqual(["a", "b"]);
    expect(back.metadata).toEqual({ model: "m1", normalized: "1" });
    expect(Array.from(back.vectors[1])).toEqual([-1, 0.5, 4]);
  });

  it("rejects mismatched dims", () => {
    expect(() =>
      serializeVectors({
        dim: 2,
        vectors: [new Float32Array([1, 2, 3])],
        docIds: ["a"],
        metadata: {},
      })
    ).toThrow(/dim/);
  });
});

describe("corpus", () => {
  it("reads records and forms documents", () => {
    const file = writeCorpus("corpus_docmode.jsonl", TWO_RECORDS);
    const records = readCorpus(file);
    expect(records.map((r) => r.recordId)).toEqual(["r1", "r2"]);
    expect(documentText(records[0], "sentence")).toBe(
      "Dr. Lee said the vaccine is effective and safe."
    );
    expect(documentText(records[0], "context")).toBe(
      "Officials met on Tuesday. Dr. Lee said the vaccine is effective and safe. The briefing ended."
    );
    // empty neighbors are skipped, not joined as double spaces
    expect(documentText(records[1], "context")).toBe(
      "Maria Gomez warned that volatility could persist."
    );
  });

  it("rejects duplicate record ids", () => {
    const file = writeCorpus("corpus_dup.jsonl", [
      record("x", "one sentence here."),
      record("x", "another sentence here."),
    ]);
    expect(() => readCorpus(file)).toThrow(/duplicate record_id/);
  });
});

describe("encoder registry", () => {
  it("unknown model raises ModelLoadError", () => {
    expect(() => loadEncoder("bert-large-headless")).toThrow(ModelLoadError);
  });

  it("tokenizes on non-alphanumeric runs, lowercased", () => {
    expect(tokenize('"Vaccines work," she said.')).toEqual([
      "vaccines", "work", "she", "said",
    ]);
  });

  it("encoding is a pure function of the text", () => {
    const enc = loadEncoder("hash-bow-64");
    const [a] = enc.encodeBatch(["the vaccine works"]);
    const [b] = enc.encodeBatch(["the vaccine works"]);
    expect(Array.from(a)).toEqual(Array.from(b));
  });

  it("bigram model differs from unigram model", () => {
    const uni = loadEncoder("hash-bow-256").encodeBatch(["alpha beta"])[0];
    const bi = loadEncoder("hash-ngram-256").encodeBatch(["alpha beta"])[0];
    expect(Array.from(uni)).not.toEqual(Array.from(bi));
  });
});

describe("exportEmbeddings", () => {
  const config = {
    model: "hash-bow-64",
    batchSize: 32,
    normalize: true,
    docMode: "context" as const,
  };

  it("writes one vector per record with matching doc ids", () => {
    const corpus = writeCorpus("corpus_two.jsonl", TWO_RECORDS);
    const out = path.join(tmpDir, "two.sqv");
    const result = exportEmbeddings(corpus, config, out);
    expect(result.count).toBe(2);
    expect(result.dim).toBe(64);
    const back = deserializeVectors(fs.readFileSync(out));
    expect(back.docIds).toEqual(["r1", "r2"]);
    expect(back.metadata["model"]).toBe("hash-bow-64");
    expect(back.metadata["normalized"]).toBe("1");
  });

  it("normalized vectors have unit norm on read-back", () => {
    const corpus = writeCorpus("corpus_norm.jsonl", TWO_RECORDS);
    const out = path.join(tmpDir, "norm.sqv");
    exportEmbeddings(corpus, config, out);
    const back = deserializeVectors(fs.readFileSync(out));
    for (const vector of back.vectors) {
      const norm = Math.sqrt(
        Array.from(vector).reduce((acc, x) => acc + x * x, 0)
      );
      expect(Math.abs(norm - 1)).toBeLessThan(1e-5);
    }
  });

  it("same corpus and config produce byte-identical payloads", () => {
    const corpus = writeCorpus("corpus_det.jsonl", TWO_RECORDS);
    const outA = path.join(tmpDir, "det_a.sqv");
    const outB = path.join(tmpDir, "det_b.sqv");
    exportEmbeddings(corpus, config, outA);
    exportEmbeddings(corpus, config, outB);
    expect(fs.readFileSync(outA).equals(fs.readFileSync(outB))).toBe(true);
  });

  it("batch size does not change the output", () => {
    const lines = Array.from({ length: 7 }, (_, i) =>
      record(`b${i}`, `sentence number ${i} talks about topic ${i % 3}.`)
    );
    const corpus = writeCorpus("corpus_batch.jsonl", lines);
    const outA = path.join(tmpDir, "batch_1.sqv");
    const outB = path.join(tmpDir, "batch_32.sqv");
    exportEmbeddings(corpus, { ...config, batchSize: 1 }, outA);
    exportEmbeddings(corpus, { ...config, batchSize: 32 }, outB);
    expect(fs.readFileSync(outA).equals(fs.readFileSync(outB))).toBe(true);
  });

  it("rejects batch sizes below one", () => {
    const corpus = writeCorpus("corpus_bad_batch.jsonl", TWO_RECORDS);
    expect(() =>
      exportEmbeddings(corpus, { ...config, batchSize: 0 }, path.join(tmpDir, "x.sqv"))
    ).toThrow(RangeError);
  });

  it("EncodeError names the record that cannot be normalized", () => {
    const corpus = writeCorpus("corpus_zero.jsonl", [
      record("ok1", "plenty of words in this sentence."),
      record("empty1", "... !!! ..."),
    ]);
    try {
      exportEmbeddings(corpus, config, path.join(tmpDir, "zero.sqv"));
      throw new Error("expected EncodeError");
    } catch (err) {
      expect(err).toBeInstanceOf(EncodeError);
      expect((err as EncodeError).recordId).toBe("empty1");
      expect((err as EncodeError).message).toContain("empty1");
    }
  });
});

describe("cli", () => {
  const cliPath = path.join(__dirname, "..", "dist", "cli.js");

  it("exports via the documented invocation", () => {
    const corpus = writeCorpus("corpus_cli.jsonl", TWO_RECORDS);
    const out = path.join(tmpDir, "cli.sqv");
    const stdout = execFileSync(
      "node",
      [cliPath, "export", "--corpus", corpus, "--out", out,
       "--model", "hash-bow-64", "--normalize", "--doc-mode", "context"],
      { encoding: "utf-8" }
    );
    expect(stdout).toContain("wrote 2 vectors");
    const back = deserializeVectors(fs.readFileSync(out));
    expect(back.docIds).toEqual(["r1", "r2"]);
  });

  it("fails with a usage message on a bad subcommand", () => {
    expect(() =>
      execFileSync("node", [cliPath, "embed"], { encoding: "utf-8", stdio: "pipe" })
    ).toThrow();
  });
});

describe("round-trip into the search engine", () => {
  // the acceptance contract: the engine's own loader reads exporter output
  const probe = `
import json, sys
import numpy as np
from sourcequote.dense import load_vectors
store = load_vectors(sys.argv[1])
norms = np.linalg.norm(store.vectors, axis=1)
print(json.dumps({
    "dim": store.dim,
    "count": len(store),
    "doc_ids": store.doc_ids,
    "normalized": store.normalized,
    "model": store.metadata.get("model"),
    "max_norm_err": float(np.abs(norms - 1.0).max()),
}))
`;

  it("load_vectors accepts the exported file", () => {
    const corpus = writeCorpus("corpus_rt.jsonl", TWO_RECORDS);
    const out = path.join(tmpDir, "roundtrip.sqv");
    const result = exportEmbeddings(
      corpus,
      { model: "hash-ngram-256", batchSize: 8, normalize: true, docMode: "context" },
      out
    );
    const raw = execFileSync("python3", ["-c", probe, out], { encoding: "utf-8" });
    const loaded = JSON.parse(raw);
    expect(loaded.dim).toBe(result.dim);
    expect(loaded.count).toBe(result.count);
    expect(loaded.doc_ids).toEqual(["r1", "r2"]);
    expect(loaded.normalized).toBe(true);
    expect(loaded.model).toBe("hash-ngram-256");
    expect(loaded.max_norm_err).toBeLessThan(1e-5);
  });
});
