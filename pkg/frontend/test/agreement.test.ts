/// Cross-implementation agreement: the grpo-tta engine, reading an exported
/// file through its own CLI, must reproduce this exporter's zero-shot argmax
/// on every sample. Samples whose top-2 logit gap falls under 1e-5 are the
/// only ones allowed to differ, since a gap that small can flip across the
/// float32 round trip. The engine is driven strictly through its public
/// surface: the file on disk and `python3 -m grpo_tta`.

import { spawnSync } from 'node:child_process';
import { mkdirSync } from 'node:fs';
import { join } from 'node:path';
import { afterAll, describe, expect, it } from 'vitest';

import { DEFAULT_CROP } from '../src/augment.js';
import { ExportReport, ExportSpec, exportDataset } from '../src/exporter.js';
import { DEFAULT_PROMPT_TEMPLATES } from '../src/prompts.js';
import { makeTempDir, removeDir, writeFlatDataset, writeLabelledDataset } from './helpers.js';

const GAP_TOLERANCE = 1e-5;
const ENGINE_TIMEOUT = 120_000;
const tempDir = makeTempDir();
afterAll(() => removeDir(tempDir));

interface EngineEpisode {
  sample_id: number;
  label: number | null;
  zero_shot_prediction: number;
  adapted_prediction: number;
  failed: boolean;
}

interface EnginePayload {
  top1_zero_shot: number | null;
  top1_adapted: number | null;
  episodes: EngineEpisode[];
}

function runEngine(args: string[]): EnginePayload {
  const result = spawnSync('python3', ['-m', 'grpo_tta', ...args], {
    encoding: 'utf8',
    timeout: ENGINE_TIMEOUT,
  });
  expect(result.error, 'engine process failed to start').toBeUndefined();
  expect(result.status, `engine rejected the run: ${result.stderr}`).toBe(0);
  return JSON.parse(result.stdout) as EnginePayload;
}

function spec(datasetDir: string, outPath: string, classNames: string[]): ExportSpec {
  return {
    modelId: 'proj:64:7',
    datasetDir,
    classNames,
    promptTemplates: DEFAULT_PROMPT_TEMPLATES,
    viewsPerSample: 8,
    crop: DEFAULT_CROP,
    outPath,
    temperature: 0.01,
    cropSeed: 0,
  };
}

/** Engine argmax must equal exporter argmax outside the gap tolerance. */
function compareAgainstEngine(report: ExportReport, payload: EnginePayload): number {
  expect(payload.episodes).toHaveLength(report.samples.length);
  let compared = 0;
  for (const episode of payload.episodes) {
    const mine = report.samples[episode.sample_id]!;
    expect(episode.failed).toBe(false);
    if (mine.top2Gap < GAP_TOLERANCE) continue;
    expect(
      episode.zero_shot_prediction,
      `sample ${episode.sample_id} (${mine.path}): engine disagrees with exporter`
    ).toBe(mine.prediction);
    compared++;
  }
  return compared;
}

describe('engine agreement', () => {
  const birds = ['heron', 'kingfisher', 'cormorant', 'sandpiper', 'avocet'];

  it('matches the engine zero-shot argmax on a 10-image smoke export', { timeout: ENGINE_TIMEOUT }, () => {
    const dir = join(tempDir, 'smoke');
    mkdirSync(dir);
    writeFlatDataset(dir, 10);
    const report = exportDataset(spec(dir, join(tempDir, 'smoke.gteb'), birds));
    expect(report.numSamples).toBe(10);

    const payload = engineZeroShotCheck(report);
    expect(payload.top1_zero_shot).toBeNull();
  });

  it('agrees on labelled accuracy as well as per-sample argmax', { timeout: ENGINE_TIMEOUT }, () => {
    const dir = join(tempDir, 'labelled');
    mkdirSync(dir);
    writeLabelledDataset(dir, birds, 2);
    const report = exportDataset(spec(dir, join(tempDir, 'labelled.gteb'), birds));
    expect(report.hasLabels).toBe(true);

    const payload = engineZeroShotCheck(report);
    const agreeing = report.samples.filter((s) => s.prediction === s.label).length;
    expect(payload.top1_zero_shot).toBeCloseTo(agreeing / report.numSamples, 12);
  });

  it('exported files drive a full adaptation run without format errors', { timeout: ENGINE_TIMEOUT }, () => {
    const dir = join(tempDir, 'adapt');
    mkdirSync(dir);
    writeFlatDataset(dir, 4);
    const report = exportDataset(spec(dir, join(tempDir, 'adapt.gteb'), birds));
    const payload = runEngine(['adapt', report.outPath, '--k', '3', '--steps', '2']);
    expect(payload.episodes).toHaveLength(4);
    for (const episode of payload.episodes) {
      expect(episode.failed).toBe(false);
      expect(episode.adapted_prediction).toBeGreaterThanOrEqual(0);
      expect(episode.adapted_prediction).toBeLessThan(birds.length);
    }
  });

  function engineZeroShotCheck(report: ExportReport): EnginePayload {
    const payload = runEngine(['zeroshot', report.outPath]);
    const compared = compareAgainstEngine(report, payload);
    expect(compared).toBe(report.numSamples);
    return payload;
  }
});
