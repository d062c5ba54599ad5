import * as fs from "fs";

import { CorpusError } from "./errors";

export type DocMode = "sentence" | "context";

export interface CorpusRecord {
  recordId: string;
  leftSentence: string;
  mainSentence: string;
  rightSentence: string;
}

/** Parse the newline-delimited record format shared with the search engine. */
export function readCorpus(path: string): CorpusRecord[] {
  const text = fs.readFileSync(path, "utf-8");
  const records: CorpusRecord[] = [];
  const seen = new Set<string>();
  text.split("\n").forEach((line, index) => {
    if (!line.trim()) {
      return;
    }
    let raw: unknown;
    try {
      raw = JSON.parse(line);
    } catch (err) {
      throw new CorpusError(`line ${index + 1}: invalid JSON (${err})`);
    }
    const obj = raw as Record<string, unknown>;
    for (const field of ["record_id", "main_sentence"]) {
      if (typeof obj[field] !== "string") {
        throw new CorpusError(`line ${index + 1}: missing field ${field}`);
      }
    }
    const recordId = obj["record_id"] as string;
    if (seen.has(recordId)) {
      throw new CorpusError(`line ${index + 1}: duplicate record_id ${recordId}`);
    }
    seen.add(recordId);
    records.push({
      recordId,
      leftSentence: typeof obj["left_sentence"] === "string" ? (obj["left_sentence"] as string) : "",
      mainSentence: obj["main_sentence"] as string,
      rightSentence: typeof obj["right_sentence"] === "string" ? (obj["right_sentence"] as string) : "",
    });
  });
  return records;
}

/** The text a record contributes, matching the engine's document formation. */
export function documentText(record: CorpusRecord, mode: DocMode): string {
  if (mode === "sentence") {
    return record.mainSentence;
  }
  return [record.leftSentence, record.mainSentence, record.rightSentence]
    .filter((part) => part.length > 0)
    .join(" ");
}
