// Session-service client.  Read-only: the console consumes manifests,
// tiles, raw thermal grids, detection documents and the fleet snapshot.

import { decodePgm, decodePpm, decodeTmap, GrayRaster, RgbRaster, ThermalRaster } from "./pnm.js";
import { StreamInfo } from "./sync.js";
import { PyramidMeta, TileRef } from "./tiles.js";

export interface Manifest {
  version: string;
  session_id: string;
  created: number;
  streams: Record<string, StreamInfo>;
  detections: Record<string, string>;
  pyramids: Record<string, string>;
}

export interface SessionListing {
  session_id: string;
  created: number;
}

export interface Detections {
  wagon_id?: {
    found: boolean;
    id_box: Box | null;
    char_boxes: Box[];
  };
  pantograph?: {
    found: boolean;
    p_bbox: Box | null;
    inlier_count: number;
  };
  thermal?: Record<string, unknown>;
}

export interface Box {
  x: number;
  y: number;
  w: number;
  h: number;
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

async function getJson<T>(url: string): Promise<T> {
  const resp = await fetch(url);
  if (!resp.ok) throw new ApiError(resp.status, `${url}: HTTP ${resp.status}`);
  return (await resp.json()) as T;
}

async function getBytes(url: string): Promise<ArrayBuffer> {
  const resp = await fetch(url);
  if (!resp.ok) throw new ApiError(resp.status, `${url}: HTTP ${resp.status}`);
  return await resp.arrayBuffer();
}

export class SessionClient {
  constructor(readonly base: string = "") {}

  listSessions(): Promise<SessionListing[]> {
    return getJson(`${this.base}/sessions`);
  }

  manifest(sessionId: string): Promise<Manifest> {
    return getJson(`${this.base}/sessions/${sessionId}/manifest`);
  }

  detections(sessionId: string): Promise<Detections> {
    return getJson(`${this.base}/sessions/${sessionId}/detections`);
  }

  async pyramidMeta(sessionId: string, role: string): Promise<PyramidMeta> {
    // pyramid metadata rides along as a bundle artifact
    return getJson(`${this.base}/sessions/${sessionId}/files/tiles/${role}/pyramid.json`);
  }

  async tile(sessionId: string, role: string, ref: TileRef,
             channels: number): Promise<GrayRaster | RgbRaster> {
    const url = `${this.base}/sessions/${sessionId}/tiles/${role}/` +
      `${ref.level}/${ref.tx}_${ref.ty}`;
    const buf = await getBytes(url);
    return channels === 1 ? decodePgm(buf) : decodePpm(buf);
  }

  async thermalRaw(sessionId: string, side: "left" | "right"): Promise<ThermalRaster> {
    return decodeTmap(await getBytes(
      `${this.base}/sessions/${sessionId}/thermal/${side}/raw`));
  }

  async frontalFrame(sessionId: string, streamPath: string,
                     index: number): Promise<GrayRaster> {
    const name = `frame_${String(index).padStart(5, "0")}.pgm`;
    return decodePgm(await getBytes(
      `${this.base}/sessions/${sessionId}/files/${streamPath}/${name}`));
  }

  fleet(): Promise<{ sensors: Record<string, Record<string, unknown>> }> {
    return getJson(`${this.base}/fleet`);
  }
}
