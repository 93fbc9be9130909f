/// GTEB1 file assembly (magic "GTEB1", little-endian). The layout is the
/// grpo-tta engine's on-disk contract: a 30-byte header (magic at 0, u32
/// dim at 5, u32 classes at 9, u32 samples at 13, u32 views at 17, f64
/// temperature at 21, u8 has_labels at 29), then float32 class embeddings,
/// then per sample the original, its views, and a u32 label when labelled.
/// Everything is validated before a single byte is laid out, and the file
/// lands via temp-plus-rename so readers never observe a partial payload.

import { renameSync, rmSync, writeFileSync } from 'node:fs';

export const MAGIC = 'GTEB1';
export const HEADER_SIZE = 30;

const U32_MAX = 0xffffffff;

export class FormatError extends Error {}

export interface FileHeader {
  dim: number;
  numClasses: number;
  numSamples: number;
  viewsPerSample: number;
  temperature: number;
  hasLabels: boolean;
}

export interface SampleRecord {
  original: Float32Array;
  views: Float32Array[];
  label: number | null;
}

function checkU32(value: number, what: string): void {
  if (!Number.isInteger(value) || value < 0 || value > U32_MAX) {
    throw new FormatError(`${what} must be a u32, got ${value}`);
  }
}

export function payloadSize(header: FileHeader): number {
  const perSample =
    4 * header.dim * (1 + header.viewsPerSample) + (header.hasLabels ? 4 : 0);
  return 4 * header.numClasses * header.dim + header.numSamples * perSample;
}

/**
 * Validate and serialize class embeddings plus samples into one Buffer.
 * Rejects anything the engine's reader would reject (dimension mismatches,
 * ragged view counts, mixed labelling, out-of-range labels) before any
 * output is produced.
 */
export function encodeEmbeddingFile(
  classEmbeddings: Float32Array[],
  samples: SampleRecord[],
  temperature: number
): Buffer {
  if (classEmbeddings.length < 2) {
    throw new FormatError(`need at least 2 class embeddings, got ${classEmbeddings.length}`);
  }
  if (samples.length === 0) {
    throw new FormatError('refusing to encode a file with zero samples');
  }
  if (!(temperature > 0) || !Number.isFinite(temperature)) {
    throw new FormatError(`temperature must be finite and > 0, got ${temperature}`);
  }
  const dim = classEmbeddings[0]!.length;
  if (dim < 1) throw new FormatError('embedding dimension must be >= 1');
  classEmbeddings.forEach((emb, i) => {
    if (emb.length !== dim) {
      throw new FormatError(`class ${i}: dim ${emb.length} does not match dim ${dim}`);
    }
  });
  const viewsPerSample = samples[0]!.views.length;
  const hasLabels = samples[0]!.label !== null;
  samples.forEach((s, i) => {
    if (s.original.length !== dim) {
      throw new FormatError(`sample ${i}: original dim ${s.original.length}, expected ${dim}`);
    }
    if (s.views.length !== viewsPerSample) {
      throw new FormatError(`sample ${i}: ${s.views.length} views, expected ${viewsPerSample}`);
    }
    s.views.forEach((view, j) => {
      if (view.length !== dim) {
        throw new FormatError(`sample ${i} view ${j}: dim ${view.length}, expected ${dim}`);
      }
    });
    if ((s.label !== null) !== hasLabels) {
      throw new FormatError('labels must be present on all samples or none');
    }
    if (s.label !== null) {
      checkU32(s.label, `sample ${i} label`);
      if (s.label >= classEmbeddings.length) {
        throw new FormatError(
          `sample ${i}: label ${s.label} out of range for ${classEmbeddings.length} classes`
        );
      }
    }
  });
  const header: FileHeader = {
    dim,
    numClasses: classEmbeddings.length,
    numSamples: samples.length,
    viewsPerSample,
    temperature,
    hasLabels,
  };
  checkU32(dim, 'dim');
  checkU32(header.numSamples, 'sample count');
  checkU32(viewsPerSample, 'view count');

  const buf = Buffer.alloc(HEADER_SIZE + payloadSize(header));
  buf.write(MAGIC, 0, 'ascii');
  buf.writeUInt32LE(header.dim, 5);
  buf.writeUInt32LE(header.numClasses, 9);
  buf.writeUInt32LE(header.numSamples, 13);
  buf.writeUInt32LE(header.viewsPerSample, 17);
  buf.writeDoubleLE(header.temperature, 21);
  buf.writeUInt8(header.hasLabels ? 1 : 0, 29);

  let offset = HEADER_SIZE;
  const putVector = (vec: Float32Array) => {
    for (let i = 0; i < vec.length; i++) {
      buf.writeFloatLE(vec[i]!, offset);
      offset += 4;
    }
  };
  for (const emb of classEmbeddings) putVector(emb);
  for (const s of samples) {
    putVector(s.original);
    for (const view of s.views) putVector(view);
    if (s.label !== null) {
      buf.writeUInt32LE(s.label, offset);
      offset += 4;
    }
  }
  return buf;
}

/** Parse just the header back; used by tests and post-write sanity checks. */
export function readHeader(data: Buffer): FileHeader {
  if (data.length < HEADER_SIZE) {
    throw new FormatError(`truncated header: need ${HEADER_SIZE} bytes, got ${data.length}`);
  }
  const magic = data.toString('ascii', 0, 5);
  if (magic !== MAGIC) {
    throw new FormatError(`bad magic ${JSON.stringify(magic)} at byte offset 0`);
  }
  const hasLabels = data.readUInt8(29);
  if (hasLabels > 1) {
    throw new FormatError(`has_labels must be 0 or 1, got ${hasLabels}`);
  }
  return {
    dim: data.readUInt32LE(5),
    numClasses: data.readUInt32LE(9),
    numSamples: data.readUInt32LE(13),
    viewsPerSample: data.readUInt32LE(17),
    temperature: data.readDoubleLE(21),
    hasLabels: hasLabels === 1,
  };
}

/**
 * Write the encoded file next to its destination and rename into place.
 * The rename is atomic on POSIX, so the output path either holds the old
 * content or the complete new file, never a prefix.
 */
export function writeFileAtomic(path: string, data: Buffer): void {
  const temp = `${path}.tmp-${process.pid}`;
  writeFileSync(temp, data);
  try {
    renameSync(temp, path);
  } catch (err) {
    rmSync(temp, { force: true });
    throw err;
  }
}
