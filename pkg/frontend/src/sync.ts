// Stream timeline synchronization: the same time-to-position mapping the
// session service applies, so client markers land on identical columns.

export interface StreamInfo {
  role: string;
  start_time: number;
  rate_hz: number;
  dims: [number, number];
  path: string;
  count?: number | null;
}

export function streamExtent(info: StreamInfo): number {
  return info.count ?? info.dims[0];
}

export function timeToPosition(info: StreamInfo, t: number): number {
  if (t < info.start_time) {
    throw new RangeError(`t=${t} precedes stream start ${info.start_time}`);
  }
  const idx = Math.floor((t - info.start_time) * info.rate_hz);
  return Math.min(idx, streamExtent(info) - 1);
}

export function sessionDuration(streams: Record<string, StreamInfo>): number {
  let end = 0;
  for (const info of Object.values(streams)) {
    end = Math.max(end, info.start_time + streamExtent(info) / info.rate_hz);
  }
  return end;
}

/** Clamp an arbitrary playhead into a stream's valid time span. */
export function clampToStream(info: StreamInfo, t: number): number {
  return Math.max(info.start_time, t);
}
