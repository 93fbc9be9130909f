/// Dataset export: resolve a model and an image directory, encode class
/// prompts and per-image view stacks, and emit one GTEB1 file the engine
/// can read directly. Also computes its own zero-shot prediction per sample
/// from exactly the float32 values written to disk, so downstream runs can
/// be cross-checked against the exporter.

import { readFileSync, readdirSync } from 'node:fs';
import { basename, join } from 'node:path';

import { CropParams, cropViews, validateCropParams } from './augment.js';
import { Encoder, resolveEncoder } from './encoder.js';
import { SampleRecord, encodeEmbeddingFile, writeFileAtomic } from './format.js';
import { decodePpm } from './image.js';
import { classEmbedding } from './prompts.js';

export class UnresolvableDatasetError extends Error {}

export interface ExportSpec {
  modelId: string;
  datasetDir: string;
  classNames: string[];
  promptTemplates: readonly string[];
  /** Augmented views per image, >= 1. */
  viewsPerSample: number;
  crop: CropParams;
  outPath: string;
  /** Softmax temperature stored in the file header. */
  temperature: number;
  /** Seed for the crop streams; same seed, same views. */
  cropSeed: number;
}

export interface DatasetEntry {
  path: string;
  label: number | null;
}

export interface SampleReport {
  path: string;
  label: number | null;
  prediction: number;
  /** Logit margin between the best and second-best class. */
  top2Gap: number;
}

export interface ExportReport {
  outPath: string;
  modelId: string;
  dim: number;
  numClasses: number;
  numSamples: number;
  viewsPerSample: number;
  temperature: number;
  hasLabels: boolean;
  samples: SampleReport[];
}

function isImageFile(name: string): boolean {
  return /\.(ppm|pgm)$/i.test(name);
}

/**
 * Enumerate images under a dataset directory. Two layouts are accepted:
 * image files directly in the directory (unlabelled), or one subdirectory
 * per class named exactly after an entry of classNames (labelled). Mixing
 * the two is rejected, as is a subdirectory that matches no class.
 */
export function resolveDataset(dir: string, classNames: string[]): DatasetEntry[] {
  let entries;
  try {
    entries = readdirSync(dir, { withFileTypes: true });
  } catch {
    throw new UnresolvableDatasetError(`cannot read dataset directory ${JSON.stringify(dir)}`);
  }
  const looseFiles = entries
    .filter((e) => e.isFile() && isImageFile(e.name))
    .map((e) => e.name)
    .sort();
  const subdirs = entries.filter((e) => e.isDirectory()).map((e) => e.name).sort();

  if (subdirs.length > 0 && looseFiles.length > 0) {
    throw new UnresolvableDatasetError(
      `dataset ${JSON.stringify(dir)} mixes class subdirectories with loose image files`
    );
  }
  if (subdirs.length > 0) {
    const byName = new Map(classNames.map((name, i) => [name, i]));
    const labelled: DatasetEntry[] = [];
    for (const sub of subdirs) {
      const label = byName.get(sub);
      if (label === undefined) {
        throw new UnresolvableDatasetError(
          `dataset subdirectory ${JSON.stringify(sub)} matches no class name`
        );
      }
      const files = readdirSync(join(dir, sub)).filter(isImageFile).sort();
      for (const f of files) labelled.push({ path: join(dir, sub, f), label });
    }
    if (labelled.length === 0) {
      throw new UnresolvableDatasetError(`dataset ${JSON.stringify(dir)} contains no .ppm/.pgm images`);
    }
    return labelled;
  }
  if (looseFiles.length === 0) {
    throw new UnresolvableDatasetError(`dataset ${JSON.stringify(dir)} contains no .ppm/.pgm images`);
  }
  return looseFiles.map((f) => ({ path: join(dir, f), label: null }));
}

/**
 * Zero-shot logits for one embedding against the class table, computed in
 * float64 from the float32 values: cosine similarity over renormalized rows,
 * divided by the temperature. Mirrors what the engine computes after reading
 * the same bytes back.
 */
export function zeroShotLogits(
  classEmbeddings: Float32Array[],
  embedding: Float32Array,
  temperature: number
): Float64Array {
  const dim = embedding.length;
  let hNorm = 0;
  for (let i = 0; i < dim; i++) hNorm += embedding[i]! * embedding[i]!;
  hNorm = Math.sqrt(hNorm);
  if (!(hNorm > 1e-12)) throw new Error('cannot score a zero embedding');
  const logits = new Float64Array(classEmbeddings.length);
  classEmbeddings.forEach((row, c) => {
    let dot = 0;
    let rowNorm = 0;
    for (let i = 0; i < dim; i++) {
      dot += row[i]! * embedding[i]!;
      rowNorm += row[i]! * row[i]!;
    }
    logits[c] = dot / (Math.sqrt(rowNorm) * hNorm * temperature);
  });
  return logits;
}

/** First-max argmax plus the gap to the runner-up. */
export function argmaxWithGap(logits: Float64Array): { index: number; gap: number } {
  if (logits.length < 2) throw new Error('need at least 2 logits');
  let best = 0;
  for (let i = 1; i < logits.length; i++) {
    if (logits[i]! > logits[best]!) best = i;
  }
  let second = -Infinity;
  for (let i = 0; i < logits.length; i++) {
    if (i !== best && logits[i]! > second) second = logits[i]!;
  }
  return { index: best, gap: logits[best]! - second };
}

export function validateSpec(spec: ExportSpec): void {
  if (!Number.isInteger(spec.viewsPerSample) || spec.viewsPerSample < 1) {
    throw new RangeError(`views per sample must be an integer >= 1, got ${spec.viewsPerSample}`);
  }
  if (spec.classNames.length < 2) {
    throw new RangeError(
      `need at least 2 classes for a readable file, got ${spec.classNames.length}`
    );
  }
  const seen = new Set<string>();
  for (const name of spec.classNames) {
    if (name.trim().length === 0) throw new RangeError('class names must be non-blank');
    if (seen.has(name)) throw new RangeError(`duplicate class name ${JSON.stringify(name)}`);
    seen.add(name);
  }
  if (spec.promptTemplates.length === 0) throw new RangeError('prompt template list is empty');
  if (!(spec.temperature > 0) || !Number.isFinite(spec.temperature)) {
    throw new RangeError(`temperature must be finite and > 0, got ${spec.temperature}`);
  }
  if (!Number.isInteger(spec.cropSeed) || spec.cropSeed < 0) {
    throw new RangeError(`crop seed must be a non-negative integer, got ${spec.cropSeed}`);
  }
  validateCropParams(spec.crop);
}

function encodeSample(
  encoder: Encoder,
  entry: DatasetEntry,
  index: number,
  spec: ExportSpec
): SampleRecord {
  const image = decodePpm(readFileSync(entry.path));
  const original = encoder.encodeImage(image);
  const views = cropViews(image, spec.viewsPerSample, spec.crop, spec.cropSeed, index).map((v) =>
    encoder.encodeImage(v)
  );
  return { original, views, label: entry.label };
}

/**
 * Run a full export. Orchestration order matters for failure behaviour:
 * the model, dataset, and every embedding are resolved and validated first,
 * the byte payload is assembled in memory, and only then does anything touch
 * the output path (atomically). A failing export never leaves a file behind.
 */
export function exportDataset(spec: ExportSpec): ExportReport {
  validateSpec(spec);
  const encoder = resolveEncoder(spec.modelId);
  const entries = resolveDataset(spec.datasetDir, spec.classNames);

  const classEmbeddings = spec.classNames.map((name) =>
    classEmbedding(encoder, name, spec.promptTemplates)
  );
  const samples: SampleRecord[] = [];
  const reports: SampleReport[] = [];
  entries.forEach((entry, index) => {
    let record;
    try {
      record = encodeSample(encoder, entry, index, spec);
    } catch (err) {
      const reason = err instanceof Error ? err.message : String(err);
      throw new UnresolvableDatasetError(`${basename(entry.path)}: ${reason}`);
    }
    samples.push(record);
    const { index: prediction, gap } = argmaxWithGap(
      zeroShotLogits(classEmbeddings, record.original, spec.temperature)
    );
    reports.push({ path: entry.path, label: entry.label, prediction, top2Gap: gap });
  });

  const encoded = encodeEmbeddingFile(classEmbeddings, samples, spec.temperature);
  writeFileAtomic(spec.outPath, encoded);
  return {
    outPath: spec.outPath,
    modelId: spec.modelId,
    dim: encoder.dim,
    numClasses: spec.classNames.length,
    numSamples: samples.length,
    viewsPerSample: spec.viewsPerSample,
    temperature: spec.temperature,
    hasLabels: samples[0]!.label !== null,
    samples: reports,
  };
}

/** Read a class-name file: one name per line, blanks skipped. */
export function parseClassFile(path: string): string[] {
  const lines = readFileSync(path, 'utf8').split('\n');
  return lines.map((l) => l.trim()).filter((l) => l.length > 0);
}

/** Read a prompt-template file: one template per line, blanks skipped. */
export function parseTemplateFile(path: string): string[] {
  const lines = readFileSync(path, 'utf8').split('\n');
  const templates = lines.map((l) => l.trim()).filter((l) => l.length > 0);
  for (const t of templates) {
    if (!t.includes('{}')) {
      throw new Error(`template ${JSON.stringify(t)} has no "{}" placeholder`);
    }
  }
  return templates;
}
