/// Raster images and binary PPM/PGM (P5, P6) decoding. Pixels are stored as
/// interleaved RGB float64 in [0, 1]; grayscale input is expanded to three
/// equal channels so the rest of the pipeline sees one layout.

export interface RasterImage {
  width: number;
  height: number;
  /** Interleaved RGB, length width * height * 3, values in [0, 1]. */
  pixels: Float64Array;
}

export class ImageFormatError extends Error {}

function isSpace(byte: number): boolean {
  return byte === 0x20 || byte === 0x09 || byte === 0x0a || byte === 0x0d || byte === 0x0c;
}

/**
 * Pull the next whitespace-delimited header token, skipping '#' comments
 * that run to end of line. Returns the token and the offset just past it.
 */
function nextToken(data: Buffer, offset: number): { token: string; offset: number } {
  let i = offset;
  for (;;) {
    while (i < data.length && isSpace(data[i]!)) i++;
    if (i < data.length && data[i] === 0x23) {
      while (i < data.length && data[i] !== 0x0a) i++;
      continue;
    }
    break;
  }
  if (i >= data.length) throw new ImageFormatError('unexpected end of file in header');
  const start = i;
  while (i < data.length && !isSpace(data[i]!) && data[i] !== 0x23) i++;
  return { token: data.toString('ascii', start, i), offset: i };
}

function headerInt(data: Buffer, offset: number, what: string): { value: number; offset: number } {
  const { token, offset: next } = nextToken(data, offset);
  if (!/^[0-9]+$/.test(token)) {
    throw new ImageFormatError(`${what} must be a decimal integer, got ${JSON.stringify(token)}`);
  }
  return { value: parseInt(token, 10), offset: next };
}

/**
 * Decode a binary PPM (P6) or PGM (P5) buffer. Handles comments and
 * 1- or 2-byte samples (maxval up to 65535, two-byte samples big-endian).
 */
export function decodePpm(data: Buffer): RasterImage {
  if (data.length < 2) throw new ImageFormatError('file too short for a PNM header');
  const magic = data.toString('ascii', 0, 2);
  if (magic !== 'P5' && magic !== 'P6') {
    throw new ImageFormatError(`unsupported magic ${JSON.stringify(magic)}, expected P5 or P6`);
  }
  const channels = magic === 'P6' ? 3 : 1;
  let cursor = 2;
  const w = headerInt(data, cursor, 'width');
  const h = headerInt(data, w.offset, 'height');
  const m = headerInt(data, h.offset, 'maxval');
  const [width, height, maxval] = [w.value, h.value, m.value];
  if (width < 1 || height < 1) {
    throw new ImageFormatError(`image dimensions must be positive, got ${width}x${height}`);
  }
  if (maxval < 1 || maxval > 65535) {
    throw new ImageFormatError(`maxval must be in 1..65535, got ${maxval}`);
  }
  let offset = m.offset;
  if (offset >= data.length || !isSpace(data[offset]!)) {
    throw new ImageFormatError('expected a single whitespace byte after maxval');
  }
  offset += 1;
  const bytesPerSample = maxval > 255 ? 2 : 1;
  const expected = width * height * channels * bytesPerSample;
  const got = data.length - offset;
  if (got !== expected) {
    throw new ImageFormatError(`pixel payload is ${got} bytes, expected ${expected}`);
  }
  const pixels = new Float64Array(width * height * 3);
  for (let p = 0; p < width * height; p++) {
    for (let c = 0; c < 3; c++) {
      const sample = Math.min(c, channels - 1);
      const at = offset + (p * channels + sample) * bytesPerSample;
      const raw = bytesPerSample === 2 ? data.readUInt16BE(at) : data[at]!;
      pixels[p * 3 + c] = raw / maxval;
    }
  }
  return { width, height, pixels };
}

/** Extract a sub-image; the rectangle must lie inside the source. */
export function cropImage(img: RasterImage, x: number, y: number, w: number, h: number): RasterImage {
  if (!Number.isInteger(x) || !Number.isInteger(y) || !Number.isInteger(w) || !Number.isInteger(h)) {
    throw new RangeError(`crop rectangle must be integral, got (${x}, ${y}, ${w}, ${h})`);
  }
  if (w < 1 || h < 1 || x < 0 || y < 0 || x + w > img.width || y + h > img.height) {
    throw new RangeError(
      `crop (${x}, ${y}, ${w}x${h}) outside image ${img.width}x${img.height}`
    );
  }
  const pixels = new Float64Array(w * h * 3);
  for (let row = 0; row < h; row++) {
    const src = ((y + row) * img.width + x) * 3;
    pixels.set(img.pixels.subarray(src, src + w * 3), row * w * 3);
  }
  return { width: w, height: h, pixels };
}

/**
 * Area-average the image onto a grid x grid raster, exact fractional
 * coverage at cell boundaries. Returns interleaved RGB of length
 * grid * grid * 3. A grid matching the source size copies pixels verbatim.
 */
export function poolToGrid(img: RasterImage, grid: number): Float64Array {
  if (!Number.isInteger(grid) || grid < 1) {
    throw new RangeError(`grid must be a positive integer, got ${grid}`);
  }
  const out = new Float64Array(grid * grid * 3);
  const sx = img.width / grid;
  const sy = img.height / grid;
  for (let gy = 0; gy < grid; gy++) {
    const y0 = gy * sy;
    const y1 = (gy + 1) * sy;
    for (let gx = 0; gx < grid; gx++) {
      const x0 = gx * sx;
      const x1 = (gx + 1) * sx;
      let accR = 0;
      let accG = 0;
      let accB = 0;
      for (let py = Math.floor(y0); py < Math.ceil(y1); py++) {
        const wy = Math.min(py + 1, y1) - Math.max(py, y0);
        if (wy <= 0) continue;
        for (let px = Math.floor(x0); px < Math.ceil(x1); px++) {
          const wx = Math.min(px + 1, x1) - Math.max(px, x0);
          if (wx <= 0) continue;
          const at = (py * img.width + px) * 3;
          accR += wx * wy * img.pixels[at]!;
          accG += wx * wy * img.pixels[at + 1]!;
          accB += wx * wy * img.pixels[at + 2]!;
        }
      }
      const area = (x1 - x0) * (y1 - y0);
      const at = (gy * grid + gx) * 3;
      out[at] = accR / area;
      out[at + 1] = accG / area;
      out[at + 2] = accB / area;
    }
  }
  return out;
}
