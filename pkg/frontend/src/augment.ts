/// Random-resized-crop view generation. Each sample gets its own RNG stream
/// derived from the export seed and sample index, so views are reproducible
/// and independent of how many other samples the export touches.

import { RasterImage, cropImage } from './image.js';
import { SplitMix64, deriveSeed } from './rng.js';

export interface CropParams {
  /** Fraction of source area the crop may cover, 0 < min <= max <= 1. */
  scaleMin: number;
  scaleMax: number;
  /** Aspect ratio (width / height) bounds, sampled log-uniformly. */
  ratioMin: number;
  ratioMax: number;
}

export const DEFAULT_CROP: CropParams = {
  scaleMin: 0.08,
  scaleMax: 1.0,
  ratioMin: 3 / 4,
  ratioMax: 4 / 3,
};

export function validateCropParams(params: CropParams): void {
  const { scaleMin, scaleMax, ratioMin, ratioMax } = params;
  if (!(scaleMin > 0 && scaleMin <= scaleMax && scaleMax <= 1)) {
    throw new RangeError(`crop scale must satisfy 0 < min <= max <= 1, got (${scaleMin}, ${scaleMax})`);
  }
  if (!(ratioMin > 0 && ratioMin <= ratioMax)) {
    throw new RangeError(`crop ratio must satisfy 0 < min <= max, got (${ratioMin}, ${ratioMax})`);
  }
}

export interface CropRect {
  x: number;
  y: number;
  w: number;
  h: number;
}

/**
 * Sample one crop rectangle: pick a target area from the scale range and an
 * aspect ratio log-uniformly, then try to place it. After ten rejected
 * attempts fall back to the full frame, which also makes the degenerate
 * scale = ratio = (1, 1) setting an exact identity on square images and a
 * full-frame pass-through on everything else.
 */
export function sampleCropRect(rng: SplitMix64, width: number, height: number, params: CropParams): CropRect {
  const area = width * height;
  for (let attempt = 0; attempt < 10; attempt++) {
    const targetArea = area * (params.scaleMin + (params.scaleMax - params.scaleMin) * rng.nextFloat());
    const logMin = Math.log(params.ratioMin);
    const logMax = Math.log(params.ratioMax);
    const ratio = Math.exp(logMin + (logMax - logMin) * rng.nextFloat());
    const w = Math.round(Math.sqrt(targetArea * ratio));
    const h = Math.round(Math.sqrt(targetArea / ratio));
    if (w < 1 || h < 1 || w > width || h > height) continue;
    const x = Math.floor(rng.nextFloat() * (width - w + 1));
    const y = Math.floor(rng.nextFloat() * (height - h + 1));
    return { x, y, w, h };
  }
  return { x: 0, y: 0, w: width, h: height };
}

/** Generate n augmented views of one image, deterministically seeded. */
export function cropViews(
  img: RasterImage,
  n: number,
  params: CropParams,
  seed: number,
  sampleIndex: number
): RasterImage[] {
  if (!Number.isInteger(n) || n < 1) {
    throw new RangeError(`view count must be a positive integer, got ${n}`);
  }
  validateCropParams(params);
  const rng = new SplitMix64(deriveSeed(seed, sampleIndex));
  const views: RasterImage[] = [];
  for (let i = 0; i < n; i++) {
    const rect = sampleCropRect(rng, img.width, img.height, params);
    views.push(cropImage(img, rect.x, rect.y, rect.w, rect.h));
  }
  return views;
}
