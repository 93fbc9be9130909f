/// Public API surface.

export { SplitMix64, deriveSeed, hashText } from './rng.js';
export {
  ImageFormatError,
  RasterImage,
  cropImage,
  decodePpm,
  poolToGrid,
} from './image.js';
export {
  Encoder,
  IMAGE_FEATURES,
  IMAGE_GRID,
  TEXT_FEATURES,
  UnresolvableModelError,
  resolveEncoder,
  tokenize,
} from './encoder.js';
export {
  FileHeader,
  FormatError,
  HEADER_SIZE,
  MAGIC,
  SampleRecord,
  encodeEmbeddingFile,
  payloadSize,
  readHeader,
  writeFileAtomic,
} from './format.js';
export {
  CropParams,
  CropRect,
  DEFAULT_CROP,
  cropViews,
  sampleCropRect,
  validateCropParams,
} from './augment.js';
export { DEFAULT_PROMPT_TEMPLATES, classEmbedding, fillTemplate } from './prompts.js';
export {
  DatasetEntry,
  ExportReport,
  ExportSpec,
  SampleReport,
  UnresolvableDatasetError,
  argmaxWithGap,
  exportDataset,
  parseClassFile,
  parseTemplateFile,
  resolveDataset,
  validateSpec,
  zeroShotLogits,
} from './exporter.js';
export { run, VERSION } from './cli.js';
