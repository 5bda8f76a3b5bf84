// Viewport -> tile planning and a deduplicating tile cache.  The console
// never requests the full-resolution image: it fetches exactly the tiles
// intersecting the viewport at the chosen level plus a one-tile prefetch
// ring.

export interface PyramidMeta {
  tile_size: number;
  channels: number;
  levels: Array<[number, number]>; // (w, h) per level, 0 = full resolution
}

export interface Viewport {
  level: number;
  x: number; // level-space pixel origin
  y: number;
  w: number; // level-space extent
  h: number;
}

export interface TileRef {
  level: number;
  tx: number;
  ty: number;
}

export function gridDims(meta: PyramidMeta, level: number): [number, number] {
  const [w, h] = meta.levels[level];
  return [Math.ceil(w / meta.tile_size), Math.ceil(h / meta.tile_size)];
}

/**
 * Pick the shallowest level whose full extent, displayed at `scale`
 * (screen px per level-0 px), needs no upsampling: each level halves.
 */
export function levelForScale(meta: PyramidMeta, scale: number): number {
  let level = 0;
  let s = scale;
  while (level + 1 < meta.levels.length && s <= 0.5) {
    level += 1;
    s *= 2;
  }
  return level;
}

/**
 * Tiles intersecting the viewport, expanded by a one-tile prefetch ring,
 * clamped to the level's grid.
 */
export function planTiles(meta: PyramidMeta, view: Viewport): TileRef[] {
  const ts = meta.tile_size;
  const [gx, gy] = gridDims(meta, view.level);
  const tx0 = Math.max(0, Math.floor(view.x / ts) - 1);
  const ty0 = Math.max(0, Math.floor(view.y / ts) - 1);
  const tx1 = Math.min(gx - 1, Math.floor((view.x + view.w - 1) / ts) + 1);
  const ty1 = Math.min(gy - 1, Math.floor((view.y + view.h - 1) / ts) + 1);
  const out: TileRef[] = [];
  for (let ty = ty0; ty <= ty1; ty++) {
    for (let tx = tx0; tx <= tx1; tx++) {
      out.push({ level: view.level, tx, ty });
    }
  }
  return out;
}

export function tileKey(role: string, ref: TileRef): string {
  return `${role}/${ref.level}/${ref.tx}_${ref.ty}`;
}

export type TileFetcher<T> = (role: string, ref: TileRef) => Promise<T>;

/**
 * Cache with in-flight deduplication: a tile is fetched at most once even
 * when pan/zoom replans while its request is still pending.
 */
export class TileCache<T> {
  private cache = new Map<string, T>();
  private inflight = new Map<string, Promise<T>>();
  readonly fetchLog: string[] = [];

  constructor(private fetcher: TileFetcher<T>, private capacity = 512) {}

  get(role: string, ref: TileRef): Promise<T> {
    const key = tileKey(role, ref);
    const hit = this.cache.get(key);
    if (hit !== undefined) return Promise.resolve(hit);
    const pending = this.inflight.get(key);
    if (pending !== undefined) return pending;
    this.fetchLog.push(key);
    const promise = this.fetcher(role, ref).then((value) => {
      this.inflight.delete(key);
      this.cache.set(key, value);
      if (this.cache.size > this.capacity) {
        const oldest = this.cache.keys().next().value as string;
        this.cache.delete(oldest);
      }
      return value;
    });
    this.inflight.set(key, promise);
    return promise;
  }

  has(role: string, ref: TileRef): boolean {
    return this.cache.has(tileKey(role, ref));
  }
}
