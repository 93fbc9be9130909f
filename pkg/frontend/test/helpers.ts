/// Shared fixtures: temp directories and synthetic PPM images.

import { mkdirSync, mkdtempSync, rmSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';

export function makeTempDir(): string {
  return mkdtempSync(join(tmpdir(), 'embed-export-'));
}

export function removeDir(dir: string): void {
  rmSync(dir, { recursive: true, force: true });
}

export type PixelFn = (x: number, y: number) => [number, number, number];

/** Raw binary P6 bytes for a width x height image, 8-bit channels. */
export function p6Bytes(width: number, height: number, fn: PixelFn): Buffer {
  const head = Buffer.from(`P6\n${width} ${height}\n255\n`, 'ascii');
  const pixels = Buffer.alloc(width * height * 3);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const [r, g, b] = fn(x, y);
      const at = (y * width + x) * 3;
      pixels[at] = r & 0xff;
      pixels[at + 1] = g & 0xff;
      pixels[at + 2] = b & 0xff;
    }
  }
  return Buffer.concat([head, pixels]);
}

/** Raw binary P5 (grayscale) bytes. */
export function p5Bytes(width: number, height: number, fn: (x: number, y: number) => number): Buffer {
  const head = Buffer.from(`P5\n${width} ${height}\n255\n`, 'ascii');
  const pixels = Buffer.alloc(width * height);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      pixels[y * width + x] = fn(x, y) & 0xff;
    }
  }
  return Buffer.concat([head, pixels]);
}

/** A deterministic test pattern that varies with the image index. */
export function patternPixel(index: number): PixelFn {
  return (x, y) => [
    (x * 8 + index * 25) % 256,
    (y * 8 + index * 40) % 256,
    (x * y + index * 11) % 256,
  ];
}

/** Write count pattern images into dir, flat layout, sorted names. */
export function writeFlatDataset(dir: string, count: number, size = 32): string[] {
  const names: string[] = [];
  for (let i = 0; i < count; i++) {
    const name = `img${String(i).padStart(2, '0')}.ppm`;
    writeFileSync(join(dir, name), p6Bytes(size, size, patternPixel(i)));
    names.push(name);
  }
  return names;
}

/** Write a labelled dataset: one subdirectory per class, two images each. */
export function writeLabelledDataset(dir: string, classNames: string[], perClass = 2, size = 32): void {
  classNames.forEach((name, c) => {
    const sub = join(dir, name);
    mkdirSync(sub);
    for (let i = 0; i < perClass; i++) {
      writeFileSync(join(sub, `s${i}.ppm`), p6Bytes(size, size, patternPixel(c * 10 + i)));
    }
  });
}
