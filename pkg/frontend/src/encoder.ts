/// Embedding encoders. The only family shipped here is "proj", a seeded
/// random-projection encoder: text goes through a hashed token/bigram
/// featurizer and images through an 8x8 area-pooled raster, each projected
/// by a fixed Gaussian matrix and normalized to unit length. It needs no
/// weights on disk and no network, and a given model id always produces the
/// same bytes, which is exactly what the export tests rely on.

import { RasterImage, poolToGrid } from './image.js';
import { SplitMix64, deriveSeed, hashText } from './rng.js';

export const TEXT_FEATURES = 256;
export const IMAGE_GRID = 8;
export const IMAGE_FEATURES = IMAGE_GRID * IMAGE_GRID * 3 + 1;

const MIN_DIM = 2;
const MAX_DIM = 4096;

export class UnresolvableModelError extends Error {}

export interface Encoder {
  readonly id: string;
  readonly dim: number;
  encodeText(text: string): Float32Array;
  encodeImage(image: RasterImage): Float32Array;
}

function gaussianMatrix(rows: number, cols: number, seed: bigint): Float64Array {
  const rng = new SplitMix64(seed);
  const scale = 1 / Math.sqrt(cols);
  const m = new Float64Array(rows * cols);
  for (let i = 0; i < m.length; i++) m[i] = rng.nextGaussian() * scale;
  return m;
}

function project(matrix: Float64Array, features: Float64Array, dim: number): Float32Array {
  const cols = features.length;
  const out = new Float64Array(dim);
  for (let r = 0; r < dim; r++) {
    let acc = 0;
    const base = r * cols;
    for (let c = 0; c < cols; c++) acc += matrix[base + c]! * features[c]!;
    out[r] = acc;
  }
  let norm = 0;
  for (let r = 0; r < dim; r++) norm += out[r]! * out[r]!;
  norm = Math.sqrt(norm);
  if (!(norm > 1e-12)) throw new Error('projected embedding collapsed to zero');
  const unit = new Float32Array(dim);
  for (let r = 0; r < dim; r++) unit[r] = out[r]! / norm;
  return unit;
}

/** Lowercased alphanumeric tokens; a lone fallback token for blank text. */
export function tokenize(text: string): string[] {
  const tokens = text.toLowerCase().split(/[^a-z0-9]+/).filter((t) => t.length > 0);
  return tokens.length > 0 ? tokens : ['blank'];
}

class ProjectionEncoder implements Encoder {
  readonly id: string;
  readonly dim: number;
  private readonly textMatrix: Float64Array;
  private readonly imageMatrix: Float64Array;

  constructor(dim: number, seed: number) {
    this.id = `proj:${dim}:${seed}`;
    this.dim = dim;
    this.textMatrix = gaussianMatrix(dim, TEXT_FEATURES, deriveSeed(seed, 1));
    this.imageMatrix = gaussianMatrix(dim, IMAGE_FEATURES, deriveSeed(seed, 2));
  }

  encodeText(text: string): Float32Array {
    const features = new Float64Array(TEXT_FEATURES);
    const tokens = tokenize(text);
    const bump = (key: string) => {
      const h = hashText(key);
      const slot = h % TEXT_FEATURES;
      features[slot] = features[slot]! + (h >>> 31 ? -1 : 1);
    };
    for (let i = 0; i < tokens.length; i++) {
      bump(tokens[i]!);
      if (i + 1 < tokens.length) bump(`${tokens[i]} ${tokens[i + 1]}`);
    }
    return project(this.textMatrix, features, this.dim);
  }

  encodeImage(image: RasterImage): Float32Array {
    const pooled = poolToGrid(image, IMAGE_GRID);
    const features = new Float64Array(IMAGE_FEATURES);
    let mean = 0;
    for (let i = 0; i < pooled.length; i++) mean += pooled[i]!;
    mean /= pooled.length;
    for (let i = 0; i < pooled.length; i++) features[i] = pooled[i]! - mean;
    features[pooled.length] = 1;
    return project(this.imageMatrix, features, this.dim);
  }
}

/**
 * Resolve a model identifier to an encoder. Supported ids look like
 * "proj:<dim>:<seed>" with dim in 2..4096 and a non-negative integer seed.
 * Anything else raises UnresolvableModelError with a diagnostic.
 */
export function resolveEncoder(modelId: string): Encoder {
  const parts = modelId.split(':');
  if (parts[0] !== 'proj') {
    throw new UnresolvableModelError(
      `cannot resolve model ${JSON.stringify(modelId)}: ` +
        'only the seeded projection family "proj:<dim>:<seed>" is available'
    );
  }
  if (parts.length !== 3 || !/^[0-9]+$/.test(parts[1]!) || !/^[0-9]+$/.test(parts[2]!)) {
    throw new UnresolvableModelError(
      `malformed projection model id ${JSON.stringify(modelId)}, expected "proj:<dim>:<seed>"`
    );
  }
  const dim = parseInt(parts[1]!, 10);
  const seed = parseInt(parts[2]!, 10);
  if (dim < MIN_DIM || dim > MAX_DIM) {
    throw new UnresolvableModelError(
      `projection dim must be in ${MIN_DIM}..${MAX_DIM}, got ${dim}`
    );
  }
  return new ProjectionEncoder(dim, seed);
}
