export class ModelLoadError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ModelLoadError";
  }
}

export class EncodeError extends Error {
  readonly recordId: string;

  constructor(recordId: string, message: string) {
    super(`record ${recordId}: ${message}`);
    this.name = "EncodeError";
    this.recordId = recordId;
  }
}

export class CorpusError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "CorpusError";
  }
}
