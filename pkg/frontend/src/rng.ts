/// Deterministic random number generation. Every stochastic choice in the
/// exporter (projection weights, crop geometry) flows through SplitMix64 so
/// a fixed seed reproduces a byte-identical export.

const MASK64 = (1n << 64n) - 1n;
const GOLDEN = 0x9e3779b97f4a7c15n;

export class SplitMix64 {
  private state: bigint;

  constructor(seed: bigint | number) {
    this.state = BigInt(seed) & MASK64;
  }

  nextUint64(): bigint {
    this.state = (this.state + GOLDEN) & MASK64;
    let z = this.state;
    z = ((z ^ (z >> 30n)) * 0xbf58476d1ce4e5b9n) & MASK64;
    z = ((z ^ (z >> 27n)) * 0x94d049bb133111ebn) & MASK64;
    return z ^ (z >> 31n);
  }

  /** Uniform double in [0, 1) with 53 bits of precision. */
  nextFloat(): number {
    return Number(this.nextUint64() >> 11n) / 2 ** 53;
  }

  /** Standard normal via Box-Muller; consumes two uniforms per call. */
  nextGaussian(): number {
    const u = Math.max(this.nextFloat(), Number.MIN_VALUE);
    const v = this.nextFloat();
    return Math.sqrt(-2 * Math.log(u)) * Math.cos(2 * Math.PI * v);
  }
}

/**
 * Mix extra words into a base seed to derive an independent substream.
 * Used to give each sample its own crop stream so dataset order and view
 * count of one sample never perturb another.
 */
export function deriveSeed(base: bigint | number, ...words: number[]): bigint {
  let s = (BigInt(base) & MASK64) ^ 0x6a09e667f3bcc909n;
  for (const w of words) {
    s = (s + GOLDEN + (BigInt(w >>> 0) << 1n)) & MASK64;
    s = ((s ^ (s >> 29n)) * 0xff51afd7ed558ccdn) & MASK64;
    s = s ^ (s >> 32n);
  }
  return s;
}

/** FNV-1a. Stable 32-bit hash of UTF-8 text, for feature bucketing. */
export function hashText(text: string): number {
  let h = 0x811c9dc5;
  const bytes = Buffer.from(text, 'utf8');
  for (const byte of bytes) {
    h ^= byte;
    h = Math.imul(h, 0x01000193) >>> 0;
  }
  return h >>> 0;
}
