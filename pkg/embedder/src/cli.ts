#!/usr/bin/env node
/**
 * Usage:
 *   sqv-embedder export --corpus PATH --out PATH [--model ID]
 *                       [--normalize] [--doc-mode sentence|context]
 *                       [--batch-size N]
 */

import { DocMode } from "./corpus";
import { availableModels, DEFAULT_MODEL } from "./encoder";
import { DEFAULT_CONFIG, exportEmbeddings } from "./export";

function usage(): never {
  console.error(
    [
      "usage: sqv-embedder export --corpus PATH --out PATH [--model ID]",
      "                           [--normalize] [--doc-mode sentence|context]",
      "                           [--batch-size N]",
      `models: ${availableModels().join(", ")} (default ${DEFAULT_MODEL})`,
    ].join("\n")
  );
  process.exit(2);
}

function parseArgs(argv: string[]) {
  if (argv[0] !== "export") {
    usage();
  }
  let corpus: string | undefined;
  let out: string | undefined;
  let model = DEFAULT_CONFIG.model;
  let normalize = false;
  let docMode: DocMode = DEFAULT_CONFIG.docMode;
  let batchSize = DEFAULT_CONFIG.batchSize;

  for (let i = 1; i < argv.length; i++) {
    const arg = argv[i];
    const next = () => {
      i += 1;
      if (i >= argv.length) {
        usage();
      }
      return argv[i];
    };
    switch (arg) {
      case "--corpus":
        corpus = next();
        break;
      case "--out":
        out = next();
        break;
      case "--model":
        model = next();
        break;
      case "--normalize":
        normalize = true;
        break;
      case "--doc-mode": {
        const value = next();
        if (value !== "sentence" && value !== "context") {
          usage();
        }
        docMode = value;
        break;
      }
      case "--batch-size":
        batchSize = Number(next());
        break;
      default:
        usage();
    }
  }
  if (!corpus || !out) {
    usage();
  }
  return { corpus, out, config: { model, normalize, docMode, batchSize } };
}

function main(): void {
  const { corpus, out, config } = parseArgs(process.argv.slice(2));
  try {
    const result = exportEmbeddings(corpus, config, out);
    console.log(
      `wrote ${result.count} vectors (dim ${result.dim}, model ${result.model}) -> ${result.outPath}`
    );
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    process.exit(1);
  }
}

main();
