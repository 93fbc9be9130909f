#!/usr/bin/env node
/// Command line front end. One subcommand:
///
///   embed-export export --model proj:64:0 --data <dir> --classes <file> \
///       --views 63 --out <path>
///
/// Exit codes: 0 success, 1 usage error, 2 unresolvable model/dataset or
/// malformed input data.

import { parseArgs } from 'node:util';

import { DEFAULT_CROP } from './augment.js';
import { UnresolvableModelError } from './encoder.js';
import { FormatError } from './format.js';
import { ImageFormatError } from './image.js';
import {
  ExportSpec,
  UnresolvableDatasetError,
  exportDataset,
  parseClassFile,
  parseTemplateFile,
} from './exporter.js';
import { DEFAULT_PROMPT_TEMPLATES } from './prompts.js';

export const VERSION = '0.1.0';

const USAGE = `usage: embed-export export --model <id> --data <dir> --classes <file> --out <path>
                           [--views N] [--tau T] [--prompts <file>]
                           [--crop-scale MIN,MAX] [--crop-ratio MIN,MAX] [--crop-seed N]

Encode class prompts plus per-image augmented views into a GTEB1 file.

  --model      encoder id, e.g. proj:64:0 (seeded projection encoder)
  --data       directory of .ppm/.pgm images, flat or one subdirectory per class
  --classes    text file with one class name per line
  --out        output file path (written atomically)
  --views      augmented views per image (default 63)
  --tau        softmax temperature stored in the header (default 0.01)
  --prompts    template file, one "{}" template per line (default: built-in set)
  --crop-scale crop area fraction range (default 0.08,1)
  --crop-ratio crop aspect ratio range (default 0.75,1.3333)
  --crop-seed  seed for view sampling (default 0)
`;

export interface CliIo {
  out: (line: string) => void;
  err: (line: string) => void;
}

class UsageError extends Error {}

function parseNumber(text: string, what: string): number {
  const value = Number(text);
  if (!Number.isFinite(value)) throw new UsageError(`${what} must be a number, got ${JSON.stringify(text)}`);
  return value;
}

function parseInteger(text: string, what: string): number {
  const value = parseNumber(text, what);
  if (!Number.isInteger(value)) throw new UsageError(`${what} must be an integer, got ${text}`);
  return value;
}

function parsePair(text: string, what: string): [number, number] {
  const parts = text.split(',');
  if (parts.length !== 2) throw new UsageError(`${what} must be "min,max", got ${JSON.stringify(text)}`);
  return [parseNumber(parts[0]!, what), parseNumber(parts[1]!, what)];
}

function buildSpec(args: string[]): ExportSpec {
  let parsed;
  try {
    parsed = parseArgs({
      args,
      allowPositionals: false,
      options: {
        model: { type: 'string' },
        data: { type: 'string' },
        classes: { type: 'string' },
        out: { type: 'string' },
        views: { type: 'string', default: '63' },
        tau: { type: 'string', default: '0.01' },
        prompts: { type: 'string' },
        'crop-scale': { type: 'string' },
        'crop-ratio': { type: 'string' },
        'crop-seed': { type: 'string', default: '0' },
      },
    });
  } catch (err) {
    throw new UsageError(err instanceof Error ? err.message : String(err));
  }
  const v = parsed.values;
  for (const required of ['model', 'data', 'classes', 'out'] as const) {
    if (v[required] === undefined) throw new UsageError(`--${required} is required`);
  }
  const scale = v['crop-scale'] ? parsePair(v['crop-scale'], '--crop-scale') : null;
  const ratio = v['crop-ratio'] ? parsePair(v['crop-ratio'], '--crop-ratio') : null;
  return {
    modelId: v.model!,
    datasetDir: v.data!,
    classNames: parseClassFile(v.classes!),
    promptTemplates: v.prompts ? parseTemplateFile(v.prompts) : DEFAULT_PROMPT_TEMPLATES,
    viewsPerSample: parseInteger(v.views!, '--views'),
    crop: {
      scaleMin: scale ? scale[0] : DEFAULT_CROP.scaleMin,
      scaleMax: scale ? scale[1] : DEFAULT_CROP.scaleMax,
      ratioMin: ratio ? ratio[0] : DEFAULT_CROP.ratioMin,
      ratioMax: ratio ? ratio[1] : DEFAULT_CROP.ratioMax,
    },
    outPath: v.out!,
    temperature: parseNumber(v.tau!, '--tau'),
    cropSeed: parseInteger(v['crop-seed']!, '--crop-seed'),
  };
}

/** Parse argv (without the node/script prefix) and run. Returns exit code. */
export function run(argv: string[], io: CliIo): number {
  if (argv.includes('--help') || argv.includes('-h')) {
    io.out(USAGE);
    return 0;
  }
  if (argv.includes('--version')) {
    io.out(`embed-export ${VERSION}`);
    return 0;
  }
  const [command, ...rest] = argv;
  if (command === undefined) {
    io.err(USAGE);
    return 1;
  }
  if (command !== 'export') {
    io.err(`embed-export: unknown command ${JSON.stringify(command)}\n${USAGE}`);
    return 1;
  }
  let spec: ExportSpec;
  try {
    spec = buildSpec(rest);
  } catch (err) {
    if (err instanceof UsageError || err instanceof RangeError) {
      io.err(`embed-export: error: ${err.message}`);
      return 1;
    }
    io.err(`embed-export: error: ${err instanceof Error ? err.message : String(err)}`);
    return 2;
  }
  try {
    const report = exportDataset(spec);
    const labelled = report.hasLabels ? 'labelled' : 'unlabelled';
    io.out(
      `wrote ${report.outPath}: dim=${report.dim} classes=${report.numClasses} ` +
        `samples=${report.numSamples} views=${report.viewsPerSample} ${labelled}`
    );
    return 0;
  } catch (err) {
    if (err instanceof RangeError) {
      io.err(`embed-export: error: ${err.message}`);
      return 1;
    }
    if (
      err instanceof UnresolvableModelError ||
      err instanceof UnresolvableDatasetError ||
      err instanceof ImageFormatError ||
      err instanceof FormatError
    ) {
      io.err(`embed-export: error: ${err.message}`);
      return 2;
    }
    throw err;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined && import.meta.url === `file://${process.argv[1]}`;
if (invokedDirectly) {
  const io: CliIo = {
    out: (line) => process.stdout.write(`${line}\n`),
    err: (line) => process.stderr.write(`${line}\n`),
  };
  process.exit(run(process.argv.slice(2), io));
}
