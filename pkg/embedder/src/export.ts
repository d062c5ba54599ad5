import * as fs from "fs";

import { serializeVectors } from "./codec";
import { DocMode, documentText, readCorpus } from "./corpus";
import { EncodeError } from "./errors";
import { DEFAULT_MODEL, loadEncoder } from "./encoder";

export interface ExportConfig {
  model: string;
  batchSize: number;
  normalize: boolean;
  docMode: DocMode;
}

export const DEFAULT_CONFIG: ExportConfig = {
  model: DEFAULT_MODEL,
  batchSize: 32,
  normalize: false,
  docMode: "sentence",
};

export interface ExportResult {
  count: number;
  dim: number;
  model: string;
  outPath: string;
}

/**
 * Encode every record in corpus order and write one SQV1 file.
 *
 * Doc ids are record ids; the model id (and the normalized flag, when set)
 * go into the file's name table so the output is self-describing.
 */
export function exportEmbeddings(
  corpusPath: string,
  config: ExportConfig,
  outPath: string
): ExportResult {
  if (!Number.isInteger(config.batchSize) || config.batchSize < 1) {
    throw new RangeError(`batchSize must be a positive integer, got ${config.batchSize}`);
  }
  const encoder = loadEncoder(config.model);
  const records = readCorpus(corpusPath);

  const vectors: Float32Array[] = [];
  for (let start = 0; start < records.length; start += config.batchSize) {
    const batch = records.slice(start, start + config.batchSize);
    const encoded = encoder.encodeBatch(
      batch.map((record) => documentText(record, config.docMode))
    );
    encoded.forEach((vector, i) => {
      const record = batch[i];
      if (vector.length !== encoder.dim) {
        throw new EncodeError(
          record.recordId,
          `encoder returned dim ${vector.length}, expected ${encoder.dim}`
        );
      }
      if (config.normalize) {
        let sumSquares = 0;
        for (const x of vector) {
          sumSquares += x * x;
        }
        if (sumSquares === 0) {
          throw new EncodeError(record.recordId, "zero vector cannot be normalized");
        }
        const norm = Math.sqrt(sumSquares);
        for (let j = 0; j < vector.length; j++) {
          vector[j] /= norm;
        }
      }
      vectors.push(vector);
    });
  }

  const metadata: Record<string, string> = { model: encoder.id };
  if (config.normalize) {
    metadata["normalized"] = "1";
  }
  const buffer = serializeVectors({
    dim: encoder.dim,
    vectors,
    docIds: records.map((record) => record.recordId),
    metadata,
  });
  fs.writeFileSync(outPath, buffer);
  return {
    count: records.length,
    dim: encoder.dim,
    model: encoder.id,
    outPath,
  };
}
