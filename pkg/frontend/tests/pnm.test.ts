import { describe, expect, it } from "vitest";
import { decodePgm, decodePpm, decodeTmap, grayToRgba } from "../src/pnm.js";

function pgmBytes(w: number, h: number, fill: number): ArrayBuffer {
  const header = new TextEncoder().encode(`P5\n${w} ${h}\n255\n`);
  const buf = new Uint8Array(header.length + w * h);
  buf.set(header);
  buf.fill(fill, header.length);
  return buf.buffer;
}

describe("raster decoding", () => {
  it("decodes P5 grayscale", () => {
    const g = decodePgm(pgmBytes(4, 3, 77));
    expect([g.width, g.height]).toEqual([4, 3]);
    expect(g.data.every((v) => v === 77)).toBe(true);
  });

  it("handles header comments", () => {
    const header = new TextEncoder().encode("P5\n# made by tests\n2 2\n255\n");
    const buf = new Uint8Array(header.length + 4);
    buf.set(header);
    const g = decodePgm(buf.buffer);
    expect([g.width, g.height]).toEqual([2, 2]);
  });

  it("rejects a truncated payload", () => {
    const header = new TextEncoder().encode("P5\n8 8\n255\n");
    const buf = new Uint8Array(header.length + 3);
    buf.set(header);
    expect(() => decodePgm(buf.buffer)).toThrow(/truncated/);
  });

  it("rejects a wrong magic", () => {
    expect(() => decodePpm(pgmBytes(2, 2, 0))).toThrow(/expected P6/);
  });

  it("decodes TMAP1 little-endian floats", () => {
    const header = new TextEncoder().encode("TMAP1\n3 2\n");
    const temps = new Float32Array([30, 40, 50, 60, 70, 800]);
    const buf = new Uint8Array(header.length + temps.byteLength);
    buf.set(header);
    buf.set(new Uint8Array(temps.buffer), header.length);
    const t = decodeTmap(buf.buffer);
    expect([t.width, t.height]).toEqual([3, 2]);
    expect(Array.from(t.temps)).toEqual([30, 40, 50, 60, 70, 800]);
  });

  it("expands grayscale to opaque RGBA", () => {
    const g = decodePgm(pgmBytes(2, 1, 9));
    const rgba = grayToRgba(g);
    expect(Array.from(rgba)).toEqual([9, 9, 9, 255, 9, 9, 9, 255]);
  });
});
