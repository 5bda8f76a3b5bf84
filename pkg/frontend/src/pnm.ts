// Decoders for the portal's raster payloads: binary PGM (P5), binary PPM
// (P6), and the TMAP1 temperature grid.

export interface GrayRaster {
  width: number;
  height: number;
  data: Uint8Array;
}

export interface RgbRaster {
  width: number;
  height: number;
  data: Uint8Array; // packed rgb
}

export interface ThermalRaster {
  width: number;
  height: number;
  temps: Float32Array; // row-major
}

function parseHeader(bytes: Uint8Array, magic: string): [number, number, number] {
  const m = new TextDecoder().decode(bytes.subarray(0, 2));
  if (m !== magic) throw new Error(`expected ${magic}, got ${m}`);
  let pos = 2;
  const fields: number[] = [];
  while (fields.length < 3) {
    while (pos < bytes.length && isSpace(bytes[pos])) pos++;
    if (bytes[pos] === 0x23) {
      // comment
      while (pos < bytes.length && bytes[pos] !== 0x0a) pos++;
      continue;
    }
    let start = pos;
    while (pos < bytes.length && !isSpace(bytes[pos])) pos++;
    fields.push(parseInt(new TextDecoder().decode(bytes.subarray(start, pos)), 10));
  }
  pos += 1; // single whitespace after maxval
  const [w, h, maxval] = fields;
  if (maxval !== 255) throw new Error(`unsupported maxval ${maxval}`);
  if (!(w >= 1 && h >= 1)) throw new Error(`bad dimensions ${w}x${h}`);
  return [w, h, pos];
}

function isSpace(b: number): boolean {
  return b === 0x20 || b === 0x09 || b === 0x0a || b === 0x0d;
}

export function decodePgm(buf: ArrayBuffer): GrayRaster {
  const bytes = new Uint8Array(buf);
  const [width, height, offset] = parseHeader(bytes, "P5");
  if (bytes.length - offset < width * height) throw new Error("truncated PGM");
  return { width, height, data: bytes.slice(offset, offset + width * height) };
}

export function decodePpm(buf: ArrayBuffer): RgbRaster {
  const bytes = new Uint8Array(buf);
  const [width, height, offset] = parseHeader(bytes, "P6");
  if (bytes.length - offset < width * height * 3) throw new Error("truncated PPM");
  return { width, height, data: bytes.slice(offset, offset + width * height * 3) };
}

export function decodeTmap(buf: ArrayBuffer): ThermalRaster {
  const bytes = new Uint8Array(buf);
  const magic = new TextDecoder().decode(bytes.subarray(0, 6));
  if (magic !== "TMAP1\n") throw new Error("not a TMAP1 payload");
  let nl = 6;
  while (nl < bytes.length && bytes[nl] !== 0x0a) nl++;
  const dims = new TextDecoder().decode(bytes.subarray(6, nl)).trim().split(/\s+/);
  const width = parseInt(dims[0], 10);
  const height = parseInt(dims[1], 10);
  const offset = nl + 1;
  if (bytes.length - offset < 4 * width * height) throw new Error("truncated TMAP1");
  // payload is little-endian float32; align by copying
  const temps = new Float32Array(width * height);
  const view = new DataView(buf, offset);
  for (let i = 0; i < temps.length; i++) temps[i] = view.getFloat32(i * 4, true);
  return { width, height, temps };
}

export function grayToRgba(gray: GrayRaster): Uint8ClampedArray {
  const out = new Uint8ClampedArray(gray.width * gray.height * 4);
  for (let i = 0; i < gray.data.length; i++) {
    const v = gray.data[i];
    out[i * 4] = v;
    out[i * 4 + 1] = v;
    out[i * 4 + 2] = v;
    out[i * 4 + 3] = 255;
  }
  return out;
}
