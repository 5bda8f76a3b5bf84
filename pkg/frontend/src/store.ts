// Console view state: one store, synchronous serialized updates,
// listeners notified after each accepted change.  Control invariants
// (playhead within the session, thermal lo < hi, viewport within bounds)
// are enforced here so panels never see an illegal state.

export type ThermalSide = "left" | "right";

export interface ViewState {
  sessionId: string | null;
  playhead: number;
  duration: number;
  thermalSide: ThermalSide;
  thermalRange: [number, number];
  overlays: { wagonId: boolean; pantograph: boolean };
  mosaicRole: "side-low" | "side-high";
  viewport: { level: number; x: number; y: number; w: number; h: number };
  banner: string | null;
}

export function initialState(): ViewState {
  return {
    sessionId: null,
    playhead: 0,
    duration: 0,
    thermalSide: "left",
    thermalRange: [30, 800],
    overlays: { wagonId: true, pantograph: true },
    mosaicRole: "side-low",
    viewport: { level: 0, x: 0, y: 0, w: 1, h: 1 },
    banner: null,
  };
}

type Listener = (state: ViewState) => void;

export class Store {
  private state = initialState();
  private listeners = new Set<Listener>();
  private notifying = false;

  get(): ViewState {
    return this.state;
  }

  subscribe(fn: Listener): () => void {
    this.listeners.add(fn);
    return () => this.listeners.delete(fn);
  }

  update(patch: Partial<ViewState>): void {
    if (this.notifying) {
      throw new Error("re-entrant store update from a listener");
    }
    this.state = { ...this.state, ...patch };
    this.notifying = true;
    try {
      for (const fn of this.listeners) fn(this.state);
    } finally {
      this.notifying = false;
    }
  }

  scrub(t: number): void {
    const clamped = Math.min(Math.max(t, 0), this.state.duration);
    this.update({ playhead: clamped });
  }

  /** Inverted or empty ranges are rejected at the control. */
  setThermalRange(lo: number, hi: number): boolean {
    if (!(lo < hi)) return false;
    this.update({ thermalRange: [lo, hi] });
    return true;
  }

  selectSide(side: ThermalSide): void {
    // the range setting survives side switches
    this.update({ thermalSide: side });
  }
}
