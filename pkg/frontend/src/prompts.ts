/// Prompt-ensemble class embeddings: every template is filled with the class
/// name and encoded, the encodings are averaged, and the mean is renormalized
/// so the engine receives exactly one unit vector per class.

import { Encoder } from './encoder.js';

export const DEFAULT_PROMPT_TEMPLATES: readonly string[] = [
  'a photo of a {}.',
  'a bad photo of a {}.',
  'a photo of many {}.',
  'a low resolution photo of a {}.',
  'a cropped photo of a {}.',
  'a bright photo of a {}.',
  'a close-up photo of a {}.',
];

export function fillTemplate(template: string, className: string): string {
  if (!template.includes('{}')) {
    throw new Error(`prompt template ${JSON.stringify(template)} has no "{}" placeholder`);
  }
  return template.replaceAll('{}', className);
}

/**
 * Ensemble embedding for one class. The averaged vector is renormalized in
 * float64 before the float32 quantization, so its stored norm is 1 within
 * float32 rounding.
 */
export function classEmbedding(
  encoder: Encoder,
  className: string,
  templates: readonly string[]
): Float32Array {
  if (templates.length === 0) throw new Error('prompt template list is empty');
  const mean = new Float64Array(encoder.dim);
  for (const template of templates) {
    const emb = encoder.encodeText(fillTemplate(template, className));
    for (let i = 0; i < mean.length; i++) mean[i]! += emb[i]!;
  }
  for (let i = 0; i < mean.length; i++) mean[i]! /= templates.length;
  let norm = 0;
  for (let i = 0; i < mean.length; i++) norm += mean[i]! * mean[i]!;
  norm = Math.sqrt(norm);
  if (!(norm > 1e-12)) {
    throw new Error(`prompt ensemble for ${JSON.stringify(className)} averaged to zero`);
  }
  const unit = new Float32Array(encoder.dim);
  for (let i = 0; i < unit.length; i++) unit[i] = mean[i]! / norm;
  return unit;
}
