// Operator console: session loading, synchronized timeline scrubbing,
// thermal false-color with adjustable range and side selector, pan/zoom
// tiled mosaic with detection overlays, and a live fleet widget.

import { Detections, Manifest, SessionClient } from "./api.js";
import { colorizeToRgba } from "./lut.js";
import { GrayRaster, grayToRgba, RgbRaster, ThermalRaster } from "./pnm.js";
import { Store, ThermalSide, ViewState } from "./store.js";
import { sessionDuration, timeToPosition } from "./sync.js";
import { levelForScale, planTiles, PyramidMeta, TileCache } from "./tiles.js";

const MARKER_COLOR = "#00e5ff";

interface PanelContext {
  canvas: HTMLCanvasElement;
  ctx: CanvasRenderingContext2D;
}

function panel(id: string): PanelContext {
  const canvas = document.getElementById(id) as HTMLCanvasElement;
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error(`no 2d context for #${id}`);
  return { canvas, ctx };
}

function rasterToCanvas(rgba: Uint8ClampedArray, w: number,
                        h: number): HTMLCanvasElement {
  const c = document.createElement("canvas");
  c.width = w;
  c.height = h;
  const ctx = c.getContext("2d")!;
  const img = ctx.createImageData(w, h);
  img.data.set(rgba);
  ctx.putImageData(img, 0, 0);
  return c;
}

export class Console {
  readonly store = new Store();
  private client: SessionClient;
  private manifest: Manifest | null = null;
  private detections: Detections | null = null;
  private thermal: Record<ThermalSide, ThermalRaster | null> = {
    left: null,
    right: null,
  };
  private pyramids = new Map<string, PyramidMeta>();
  private tileCanvas = new Map<string, HTMLCanvasElement>();
  private tiles: TileCache<GrayRaster | RgbRaster>;
  private frames = new Map<number, HTMLCanvasElement>();
  private frontal: PanelContext;
  private thermalPanel: PanelContext;
  private mosaic: PanelContext;
  private redrawQueued = false;

  constructor(base = "") {
    this.client = new SessionClient(base);
    this.tiles = new TileCache((role, ref) => {
      const meta = this.pyramids.get(role);
      const channels = meta ? meta.channels : 1;
      return this.client.tile(this.store.get().sessionId!, role, ref, channels);
    });
    this.frontal = panel("frontal-canvas");
    this.thermalPanel = panel("thermal-canvas");
    this.mosaic = panel("mosaic-canvas");
    this.wireControls();
    this.store.subscribe(() => this.queueRedraw());
    void this.refreshSessionList();
    void this.pollFleet();
  }

  // -- session lifecycle ----------------------------------------------------

  async refreshSessionList(): Promise<void> {
    try {
      const listing = await this.client.listSessions();
      const select = document.getElementById("session-select") as HTMLSelectElement;
      select.innerHTML = "";
      for (const item of listing) {
        const opt = document.createElement("option");
        opt.value = item.session_id;
        opt.textContent = item.session_id;
        select.appendChild(opt);
      }
      if (listing.length && !this.store.get().sessionId) {
        await this.loadSession(listing[listing.length - 1].session_id);
      }
    } catch (err) {
      this.banner(`session service unreachable: ${err}`);
    }
  }

  async loadSession(sessionId: string): Promise<void> {
    try {
      const manifest = await this.client.manifest(sessionId);
      const detections = await this.client.detections(sessionId);
      this.manifest = manifest;
      this.detections = detections;
      this.pyramids.clear();
      this.tileCanvas.clear();
      this.frames.clear();
      for (const role of Object.keys(manifest.pyramids)) {
        this.pyramids.set(role, await this.client.pyramidMeta(sessionId, role));
      }
      this.thermal.left = manifest.streams["thermal-left"]
        ? await this.client.thermalRaw(sessionId, "left") : null;
      this.thermal.right = manifest.streams["thermal-right"]
        ? await this.client.thermalRaw(sessionId, "right") : null;

      const grid = this.thermal.left ?? this.thermal.right;
      let range: [number, number] = [30, 800];
      if (grid) {
        let lo = Infinity;
        let hi = -Infinity;
        for (const v of grid.temps) {
          if (v < lo) lo = v;
          if (v > hi) hi = v;
        }
        range = lo < hi ? [lo, hi] : [lo, lo + 1];
      }
      const meta = this.pyramids.get("side-low");
      const top = meta ? meta.levels.length - 1 : 0;
      this.store.update({
        sessionId,
        banner: null,
        playhead: 0,
        duration: sessionDuration(manifest.streams),
        thermalRange: range,
        mosaicRole: "side-low",
        viewport: meta
          ? { level: top, x: 0, y: 0,
              w: meta.levels[top][0], h: meta.levels[top][1] }
          : { level: 0, x: 0, y: 0, w: 1, h: 1 },
      });
      this.applyOverlayAvailability();
      this.syncRangeInputs();
    } catch (err) {
      // console stays usable on a missing session
      this.banner(`cannot load session ${sessionId}: ${err}`);
    }
  }

  private applyOverlayAvailability(): void {
    const pgToggle = document.getElementById("overlay-pantograph") as HTMLInputElement;
    const note = document.getElementById("overlay-note")!;
    const available = Boolean(this.detections?.pantograph?.found);
    pgToggle.disabled = !available;
    note.textContent = available
      ? ""
      : "apparatus overlay unavailable: no detection in this session";
  }

  private banner(message: string): void {
    this.store.update({ banner: message });
    const el = document.getElementById("banner")!;
    el.textContent = message;
    el.classList.add("visible");
  }

  // -- controls ---------------------------------------------------------------

  private wireControls(): void {
    const select = document.getElementById("session-select") as HTMLSelectElement;
    select.addEventListener("change", () => void this.loadSession(select.value));

    const timeline = document.getElementById("timeline") as HTMLInputElement;
    timeline.addEventListener("input", () => {
      const t = (Number(timeline.value) / 1000) * this.store.get().duration;
      this.store.scrub(t);
    });

    for (const side of ["left", "right"] as const) {
      document.getElementById(`side-${side}`)!.addEventListener("click", () => {
        this.store.selectSide(side);
      });
    }

    const lo = document.getElementById("range-lo") as HTMLInputElement;
    const hi = document.getElementById("range-hi") as HTMLInputElement;
    document.getElementById("range-apply")!.addEventListener("click", () => {
      const ok = this.store.setThermalRange(Number(lo.value), Number(hi.value));
      document.getElementById("range-note")!.textContent =
        ok ? "" : "rejected: low bound must stay below high bound";
    });

    for (const [id, key] of [["overlay-wagon", "wagonId"],
                             ["overlay-pantograph", "pantograph"]] as const) {
      const box = document.getElementById(id) as HTMLInputElement;
      box.addEventListener("change", () => {
        const overlays = { ...this.store.get().overlays, [key]: box.checked };
        this.store.update({ overlays });
      });
    }

    const roleSelect = document.getElementById("mosaic-role") as HTMLSelectElement;
    roleSelect.addEventListener("change", () => {
      this.store.update({ mosaicRole: roleSelect.value as "side-low" | "side-high" });
      this.resetViewport();
    });

    this.wirePanZoom();
  }

  private syncRangeInputs(): void {
    const [lo, hi] = this.store.get().thermalRange;
    (document.getElementById("range-lo") as HTMLInputElement).value =
      lo.toFixed(1);
    (document.getElementById("range-hi") as HTMLInputElement).value =
      hi.toFixed(1);
  }

  private resetViewport(): void {
    const meta = this.pyramids.get(this.store.get().mosaicRole);
    if (!meta) return;
    const top = meta.levels.length - 1;
    this.store.update({
      viewport: { level: top, x: 0, y: 0,
                  w: meta.levels[top][0], h: meta.levels[top][1] },
    });
  }

  private wirePanZoom(): void {
    const canvas = this.mosaic.canvas;
    let dragging = false;
    let last: [number, number] = [0, 0];
    canvas.addEventListener("pointerdown", (ev) => {
      dragging = true;
      last = [ev.offsetX, ev.offsetY];
      canvas.setPointerCapture(ev.pointerId);
    });
    canvas.addEventListener("pointermove", (ev) => {
      if (!dragging) return;
      const v = this.store.get().viewport;
      const sx = v.w / canvas.width;
      const dx = (ev.offsetX - last[0]) * sx;
      const dy = (ev.offsetY - last[1]) * sx;
      last = [ev.offsetX, ev.offsetY];
      this.setViewport({ ...v, x: v.x - dx, y: v.y - dy });
    });
    canvas.addEventListener("pointerup", () => (dragging = false));
    canvas.addEventListener("wheel", (ev) => {
      ev.preventDefault();
      const meta = this.pyramids.get(this.store.get().mosaicRole);
      if (!meta) return;
      const factor = ev.deltaY > 0 ? 1.25 : 0.8;
      const v = this.store.get().viewport;
      // zoom about the pointer in level-0 coordinates
      const scale0 = 2 ** v.level;
      const cx = (v.x + (ev.offsetX / this.mosaic.canvas.width) * v.w) * scale0;
      const cy = (v.y + (ev.offsetY / this.mosaic.canvas.height) * v.h) * scale0;
      const w0 = v.w * scale0 * factor;
      const screenScale = this.mosaic.canvas.width / w0;
      const level = levelForScale(meta, screenScale);
      const scaleL = 2 ** level;
      const w = Math.min(w0 / scaleL, meta.levels[level][0]);
      const h = (w * this.mosaic.canvas.height) / this.mosaic.canvas.width;
      this.setViewport({
        level,
        x: cx / scaleL - (ev.offsetX / this.mosaic.canvas.width) * w,
        y: cy / scaleL - (ev.offsetY / this.mosaic.canvas.height) * h,
        w,
        h,
      });
    }, { passive: false });
  }

  private setViewport(v: ViewState["viewport"]): void {
    const meta = this.pyramids.get(this.store.get().mosaicRole);
    if (!meta) return;
    const [lw, lh] = meta.levels[v.level];
    const x = Math.min(Math.max(v.x, 0), Math.max(0, lw - v.w));
    const y = Math.min(Math.max(v.y, 0), Math.max(0, lh - v.h));
    this.store.update({ viewport: { ...v, x, y } });
  }

  // -- rendering -----------------------------------------------------------

  private queueRedraw(): void {
    if (this.redrawQueued) return;
    this.redrawQueued = true;
    requestAnimationFrame(() => {
      this.redrawQueued = false;
      void this.redraw();
    });
  }

  private async redraw(): Promise<void> {
    if (!this.manifest) return;
    await Promise.all([
      this.drawFrontal(),
      this.drawThermal(),
      this.drawMosaic(),
    ]);
  }

  private async drawFrontal(): Promise<void> {
    const state = this.store.get();
    const info = this.manifest?.streams["frontal"];
    if (!info || !state.sessionId) return;
    const t = Math.max(state.playhead, info.start_time);
    const index = timeToPosition(info, t);
    let frame = this.frames.get(index);
    if (!frame) {
      const raster = await this.client.frontalFrame(state.sessionId, info.path, index);
      frame = rasterToCanvas(grayToRgba(raster), raster.width, raster.height);
      this.frames.set(index, frame);
      if (this.frames.size > 64) {
        this.frames.delete(this.frames.keys().next().value as number);
      }
    }
    const { canvas, ctx } = this.frontal;
    ctx.drawImage(frame, 0, 0, canvas.width, canvas.height);
    ctx.fillStyle = "#fff";
    ctx.font = "12px monospace";
    ctx.fillText(`frame ${index}  t=${state.playhead.toFixed(3)}s`, 8, 16);
  }

  private async drawThermal(): Promise<void> {
    const state = this.store.get();
    const grid = this.thermal[state.thermalSide];
    const info = this.manifest?.streams[`thermal-${state.thermalSide}`];
    const { canvas, ctx } = this.thermalPanel;
    if (!grid || !info) {
      ctx.fillStyle = "#222";
      ctx.fillRect(0, 0, canvas.width, canvas.height);
      ctx.fillStyle = "#ccc";
      ctx.fillText(`no thermal-${state.thermalSide} stream`, 10, 20);
      return;
    }
    const [lo, hi] = state.thermalRange;
    const rgba = colorizeToRgba(grid.temps, lo, hi);
    const off = rasterToCanvas(rgba, grid.width, grid.height);
    ctx.imageSmoothingEnabled = false;
    ctx.drawImage(off, 0, 0, canvas.width, canvas.height);

    const t = Math.max(state.playhead, info.start_time);
    const column = timeToPosition(info, t);
    const x = (column / grid.width) * canvas.width;
    ctx.strokeStyle = MARKER_COLOR;
    ctx.beginPath();
    ctx.moveTo(x, 0);
    ctx.lineTo(x, canvas.height);
    ctx.stroke();
    ctx.fillStyle = MARKER_COLOR;
    ctx.font = "11px monospace";
    ctx.fillText(`${state.playhead.toFixed(2)}s`, Math.min(x + 4, canvas.width - 52), 12);
  }

  private async drawMosaic(): Promise<void> {
    const state = this.store.get();
    const role = state.mosaicRole;
    const meta = this.pyramids.get(role);
    const info = this.manifest?.streams[role];
    if (!meta || !info) return;
    const { canvas, ctx } = this.mosaic;
    const v = state.viewport;
    const refs = planTiles(meta, v);
    const scale = canvas.width / v.w;
    ctx.fillStyle = "#111";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
    await Promise.all(refs.map(async (ref) => {
      const key = `${role}/${ref.level}/${ref.tx}_${ref.ty}`;
      let off = this.tileCanvas.get(key);
      if (!off) {
        const raster = await this.tiles.get(role, ref);
        const rgba = "data" in raster && raster.data.length === raster.width * raster.height
          ? grayToRgba(raster as GrayRaster)
          : rgbToRgba(raster as RgbRaster);
        off = rasterToCanvas(rgba, raster.width, raster.height);
        this.tileCanvas.set(key, off);
      }
      const px = (ref.tx * meta.tile_size - v.x) * scale;
      const py = (ref.ty * meta.tile_size - v.y) * scale;
      ctx.imageSmoothingEnabled = scale < 1;
      ctx.drawImage(off, px, py, off.width * scale, off.height * scale);
    }));

    const levelScale = 2 ** v.level;
    const toScreenX = (x0: number) => ((x0 / levelScale) - v.x) * scale;
    const toScreenY = (y0: number) => ((y0 / levelScale) - v.y) * scale;

    if (state.overlays.wagonId && role === "side-low"
        && this.detections?.wagon_id?.found) {
      ctx.strokeStyle = "#3f3";
      const id = this.detections.wagon_id.id_box!;
      ctx.strokeRect(toScreenX(id.x), toScreenY(id.y),
                     (id.w / levelScale) * scale, (id.h / levelScale) * scale);
      ctx.strokeStyle = "rgba(120,255,120,0.7)";
      for (const b of this.detections.wagon_id.char_boxes) {
        ctx.strokeRect(toScreenX(b.x), toScreenY(b.y),
                       (b.w / levelScale) * scale, (b.h / levelScale) * scale);
      }
    }
    if (state.overlays.pantograph && role === "side-high"
        && this.detections?.pantograph?.found) {
      const b = this.detections.pantograph.p_bbox!;
      ctx.strokeStyle = "#fa3";
      ctx.lineWidth = 2;
      ctx.strokeRect(toScreenX(b.x), toScreenY(b.y),
                     (b.w / levelScale) * scale, (b.h / levelScale) * scale);
      ctx.lineWidth = 1;
    }

    const t = Math.max(state.playhead, info.start_time);
    const column = timeToPosition(info, t);
    const mx = toScreenX(column);
    if (mx >= 0 && mx <= canvas.width) {
      ctx.strokeStyle = MARKER_COLOR;
      ctx.beginPath();
      ctx.moveTo(mx, 0);
      ctx.lineTo(mx, canvas.height);
      ctx.stroke();
    }
  }

  // -- fleet widget -----------------------------------------------------------

  private async pollFleet(): Promise<void> {
    const el = document.getElementById("fleet")!;
    try {
      const fleet = await this.client.fleet();
      const rows = Object.entries(fleet.sensors).map(([sid, s]) =>
        `<tr><td>${sid}</td><td>${s["lifecycle"]}</td>` +
        `<td>${s["stale"] ? "stale" : "fresh"}</td></tr>`).join("");
      el.innerHTML = `<table><tr><th>sensor</th><th>state</th><th>hb</th></tr>${rows}</table>`;
    } catch {
      el.textContent = "fleet: manager unreachable";
    }
    setTimeout(() => void this.pollFleet(), 2000);
  }
}

function rgbToRgba(rgb: RgbRaster): Uint8ClampedArray {
  const out = new Uint8ClampedArray(rgb.width * rgb.height * 4);
  for (let i = 0; i < rgb.width * rgb.height; i++) {
    out[i * 4] = rgb.data[i * 3];
    out[i * 4 + 1] = rgb.data[i * 3 + 1];
    out[i * 4 + 2] = rgb.data[i * 3 + 2];
    out[i * 4 + 3] = 255;
  }
  return out;
}
