// False-color lookup table, mirroring the server's convention exactly:
// piecewise-linear blue -> cyan -> yellow -> red with integer floor
// interpolation, and floor-binning of temperatures onto [0, 255].

const ANCHORS: Array<[number, [number, number, number]]> = [
  [0, [0, 0, 255]],
  [85, [0, 255, 255]],
  [170, [255, 255, 0]],
  [255, [255, 0, 0]],
];

export function buildLut(): Uint8ClampedArray {
  const lut = new Uint8ClampedArray(256 * 3);
  for (let a = 0; a + 1 < ANCHORS.length; a++) {
    const [i0, c0] = ANCHORS[a];
    const [i1, c1] = ANCHORS[a + 1];
    const span = i1 - i0;
    for (let i = i0; i <= i1; i++) {
      for (let ch = 0; ch < 3; ch++) {
        lut[i * 3 + ch] = c0[ch] + Math.floor(((c1[ch] - c0[ch]) * (i - i0)) / span);
      }
    }
  }
  return lut;
}

export const LUT = buildLut();

/**
 * Floor-bin one temperature onto the 256-entry scale.  The server runs
 * this arithmetic in float32; Math.fround reproduces it step for step so
 * pixel indices agree exactly.
 */
export function lutIndex(value: number, lo: number, hi: number): number {
  if (!(lo < hi)) throw new RangeError(`inverted color range [${lo}, ${hi}]`);
  const lo32 = Math.fround(lo);
  const hi32 = Math.fround(hi);
  const denom = Math.fround(hi - lo);
  const clamped = Math.min(Math.max(Math.fround(value), lo32), hi32);
  const frac = Math.fround(Math.fround(clamped - lo32) / denom);
  const scaled = Math.fround(frac * 255.0);
  const idx = Math.floor(scaled);
  return idx < 0 ? 0 : idx > 255 ? 255 : idx;
}

/** Recolorize a raw temperature grid into RGBA pixels for a canvas. */
export function colorizeToRgba(
  temps: Float32Array,
  lo: number,
  hi: number,
  out?: Uint8ClampedArray,
): Uint8ClampedArray {
  const rgba = out ?? new Uint8ClampedArray(temps.length * 4);
  for (let i = 0; i < temps.length; i++) {
    const k = lutIndex(temps[i], lo, hi) * 3;
    rgba[i * 4] = LUT[k];
    rgba[i * 4 + 1] = LUT[k + 1];
    rgba[i * 4 + 2] = LUT[k + 2];
    rgba[i * 4 + 3] = 255;
  }
  return rgba;
}
