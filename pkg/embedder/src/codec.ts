/**
 * SQV1 vector file codec (little-endian).
 *
 * Layout:
 *   offset 0   magic "SQV1" (4 bytes)
 *   offset 4   u32  dim
 *   offset 8   u64  count
 *   offset 16  u64  name table offset (0 = absent)
 *   offset 24  count * dim float32 vectors, row-major
 *   table      u64 entry count, then length-prefixed UTF-8 strings
 *              (u32 byte length + bytes). The first `count` entries are
 *              doc ids in row order; remaining entries are "key=value"
 *              metadata, e.g. the encoder model id or "normalized=1".
 */

const MAGIC = "SQV1";
const HEADER_SIZE = 24;

export interface VectorFile {
  dim: number;
  vectors: Float32Array[];
  docIds: string[];
  metadata: Record<string, string>;
}

export function serializeVectors(file: VectorFile): Buffer {
  const { dim, vectors, docIds, metadata } = file;
  if (vectors.length !== docIds.length) {
    throw new Error(
      `vector count ${vectors.length} != doc id count ${docIds.length}`
    );
  }
  for (const v of vectors) {
    if (v.length !== dim) {
      throw new Error(`vector of dim ${v.length} in a dim-${dim} file`);
    }
  }
  const encoder = new TextEncoder();
  const names: Uint8Array[] = [];
  for (const id of docIds) {
    names.push(encoder.encode(id));
  }
  const metaKeys = Object.keys(metadata).sort();
  for (const key of metaKeys) {
    names.push(encoder.encode(`${key}=${metadata[key]}`));
  }
  const payloadBytes = vectors.length * dim * 4;
  const tableBytes = 8 + names.reduce((acc, n) => acc + 4 + n.length, 0);
  const buffer = Buffer.alloc(HEADER_SIZE + payloadBytes + tableBytes);

  buffer.write(MAGIC, 0, "ascii");
  buffer.writeUInt32LE(dim, 4);
  buffer.writeBigUInt64LE(BigInt(vectors.length), 8);
  buffer.writeBigUInt64LE(BigInt(HEADER_SIZE + payloadBytes), 16);

  let offset = HEADER_SIZE;
  for (const v of vectors) {
    for (let i = 0; i < dim; i++) {
      buffer.writeFloatLE(v[i], offset);
      offset += 4;
    }
  }
  buffer.writeBigUInt64LE(BigInt(names.length), offset);
  offset += 8;
  for (const n of names) {
    buffer.writeUInt32LE(n.length, offset);
    offset += 4;
    buffer.set(n, offset);
    offset += n.length;
  }
  return buffer;
}

/** Reader used by the test suite to verify what was written. */
export function deserializeVectors(buffer: Buffer): VectorFile {
  if (buffer.toString("ascii", 0, 4) !== MAGIC) {
    throw new Error("not an SQV1 file");
  }
  const dim = buffer.readUInt32LE(4);
  const count = Number(buffer.readBigUInt64LE(8));
  const tableOffset = Number(buffer.readBigUInt64LE(16));

  const vectors: Float32Array[] = [];
  let offset = HEADER_SIZE;
  for (let row = 0; row < count; row++) {
    const v = new Float32Array(dim);
    for (let i = 0; i < dim; i++) {
      v[i] = buffer.readFloatLE(offset);
      offset += 4;
    }
    vectors.push(v);
  }

  let docIds = Array.from({ length: count }, (_, i) => String(i));
  const metadata: Record<string, string> = {};
  if (tableOffset > 0) {
    let pos = tableOffset;
    const entries: string[] = [];
    const n = Number(buffer.readBigUInt64LE(pos));
    pos += 8;
    for (let i = 0; i < n; i++) {
      const len = buffer.readUInt32LE(pos);
      pos += 4;
      entries.push(buffer.toString("utf-8", pos, pos + len));
      pos += len;
    }
    docIds = entries.slice(0, count);
    for (const entry of entries.slice(count)) {
      const eq = entry.indexOf("=");
      if (eq >= 0) {
        metadata[entry.slice(0, eq)] = entry.slice(eq + 1);
      }
    }
  }
  return { dim, vectors, docIds, metadata };
}
