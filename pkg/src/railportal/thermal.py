"""Thermal line-scan monitoring.

Assembles 256-sample thermal lines into mosaics, computes per-block
mean/max statistics, raises over-temperature alarms, cross-validates the
two independent thermal chains against each other, and renders false-color
previews.  Temperatures are degrees Celsius clamped to the sensor range.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

SENSOR_MIN_C = 30.0
SENSOR_MAX_C = 800.0
LINE_SAMPLES = 256

DEFAULT_BLOCK = 16          # square block side for subregion statistics
DEFAULT_ALARM_C = 150.0     # alarm threshold, configurable per run
DEFAULT_CROSS_TOL_C = 5.0   # chain cross-validation tolerance


class ThermalFormatError(ValueError):
    """Malformed .tmap payload or inconsistent line data."""


@dataclass(frozen=True)
class ThermalLine:
    """One acquired line: exactly 256 temperatures plus its timestamp in
    microseconds since acquisition start."""

    samples: np.ndarray
    timestamp_us: int

    def __post_init__(self) -> None:
        s = np.asarray(self.samples, dtype=np.float32)
        if s.shape != (LINE_SAMPLES,):
            raise ThermalFormatError(f"expected {LINE_SAMPLES} samples, got {s.shape}")
        object.__setattr__(self, "samples", s)


@dataclass
class ThermalMosaic:
    """Temperature grid: one column per line, 256 rows."""

    temps: np.ndarray                 # (256, width) float32, already clamped
    start_time: float = 0.0           # seconds, acquisition epoch
    line_period: float = 1.0 / 512.0  # seconds between lines
    clamped_count: int = 0             # samples forced into the sensor range

    def __post_init__(self) -> None:
        t = np.asarray(self.temps, dtype=np.float32)
        if t.ndim != 2 or t.shape[0] != LINE_SAMPLES or t.shape[1] < 1:
            raise ThermalFormatError(f"bad mosaic shape {t.shape}")
        self.temps = t

    @property
    def width(self) -> int:
        return self.temps.shape[1]

    @property
    def height(self) -> int:
        return self.temps.shape[0]


@dataclass
class BlockStats:
    block_w: int
    block_h: int
    mean: np.ndarray        # (rows, cols) float64
    max: np.ndarray         # (rows, cols) float32
    global_min: float
    global_max: float


@dataclass(frozen=True)
class Alarm:
    block_row: int
    block_col: int
    max_c: float
    threshold_c: float


@dataclass
class CrossCheck:
    passed: bool
    min_delta: float
    max_delta: float
    tol: float


@dataclass
class ThermalReport:
    alarms: list[Alarm] = field(default_factory=list)
    cross_check: CrossCheck | None = None
    clamped_count: int = 0


def build_mosaic(lines: Sequence[ThermalLine] | Iterable[ThermalLine]) -> ThermalMosaic:
    """Concatenate lines into a mosaic, clamping out-of-range samples.

    Timestamps must be non-decreasing; the line period is estimated from
    the first/last timestamps.
    """
    lines = list(lines)
    if not lines:
        raise ThermalFormatError("no lines to assemble")
    ts = np.array([ln.timestamp_us for ln in lines], dtype=np.int64)
    if (np.diff(ts) < 0).any():
        raise ThermalFormatError("timestamps must be non-decreasing")
    raw = np.stack([ln.samples for ln in lines], axis=1)
    clamped = np.clip(raw, SENSOR_MIN_C, SENSOR_MAX_C)
    n_clamped = int((raw != clamped).sum())
    period = (float(ts[-1] - ts[0]) / 1e6 / (len(lines) - 1)
              if len(lines) > 1 else 1.0 / 512.0)
    return ThermalMosaic(temps=clamped, start_time=float(ts[0]) / 1e6,
                         line_period=period, clamped_count=n_clamped)


def block_stats(mosaic: ThermalMosaic, block_w: int = DEFAULT_BLOCK,
                block_h: int = DEFAULT_BLOCK) -> BlockStats:
    """Per-block arithmetic mean and max; edge blocks cover what remains."""
    if block_w < 1 or block_h < 1:
        raise ValueError("block dims must be >= 1")
    t = mosaic.temps
    h, w = t.shape
    row_idx = np.arange(0, h, block_h)
    col_idx = np.arange(0, w, block_w)
    sums = np.add.reduceat(np.add.reduceat(t.astype(np.float64), row_idx, axis=0),
                           col_idx, axis=1)
    row_counts = np.minimum(row_idx + block_h, h) - row_idx
    col_counts = np.minimum(col_idx + block_w, w) - col_idx
    mean = sums / np.outer(row_counts, col_counts)
    mx = np.maximum.reduceat(np.maximum.reduceat(t, row_idx, axis=0),
                             col_idx, axis=1)
    return BlockStats(block_w=block_w, block_h=block_h, mean=mean, max=mx,
                      global_min=float(t.min()), global_max=float(t.max()))


def detect_alarms(stats: BlockStats, threshold_c: float = DEFAULT_ALARM_C) -> list[Alarm]:
    """Blocks whose max reaches the threshold, hottest first."""
    if not (SENSOR_MIN_C <= threshold_c <= SENSOR_MAX_C):
        raise ValueError(f"threshold {threshold_c} outside sensor range")
    hot = np.argwhere(stats.max >= threshold_c)
    alarms = [Alarm(block_row=int(r), block_col=int(c),
                    max_c=float(stats.max[r, c]), threshold_c=threshold_c)
              for r, c in hot]
    alarms.sort(key=lambda a: (-a.max_c, a.block_row, a.block_col))
    return alarms


def cross_validate(stats_a: BlockStats, stats_b: BlockStats,
                   tol: float = DEFAULT_CROSS_TOL_C) -> CrossCheck:
    """Compare global extrema of the two chains; symmetric in (a, b)."""
    dmin = abs(stats_a.global_min - stats_b.global_min)
    dmax = abs(stats_a.global_max - stats_b.global_max)
    return CrossCheck(passed=bool(dmin <= tol and dmax <= tol),
                      min_delta=dmin, max_delta=dmax, tol=tol)


# ---------------------------------------------------------------------------
# False-color rendering
# ---------------------------------------------------------------------------

def _build_lut() -> np.ndarray:
    """Fixed 256-entry blue-to-red lookup table.

    Piecewise-linear through blue, cyan, yellow, red anchors; integer
    interpolation so every entry is reproducible exactly from the anchor
    list (the operator console rebuilds the same table client-side).
    """
    anchors = [(0, (0, 0, 255)), (85, (0, 255, 255)),
               (170, (255, 255, 0)), (255, (255, 0, 0))]
    lut = np.zeros((256, 3), dtype=np.uint8)
    for (i0, c0), (i1, c1) in zip(anchors, anchors[1:]):
        span = i1 - i0
        for i in range(i0, i1 + 1):
            f_num = i - i0
            for ch in range(3):
                lut[i, ch] = c0[ch] + (c1[ch] - c0[ch]) * f_num // span
    return lut


LUT = _build_lut()


def lut_index(temps: np.ndarray, range_lo: float, range_hi: float) -> np.ndarray:
    """Map temperatures onto [0, 255]: floor of the linear position in the
    range, with everything at or below lo pinned to 0 and at or above hi
    pinned to 255."""
    frac = (np.clip(temps, range_lo, range_hi) - range_lo) / (range_hi - range_lo)
    return np.floor(frac * 255.0).astype(np.uint8)


def colorize(mosaic: ThermalMosaic, range_lo: float | None = None,
             range_hi: float | None = None) -> np.ndarray:
    """False-color RGB preview.  The default range spans the mosaic's own
    min and max values."""
    lo = float(mosaic.temps.min()) if range_lo is None else float(range_lo)
    hi = float(mosaic.temps.max()) if range_hi is None else float(range_hi)
    if lo >= hi:
        if range_lo is None and range_hi is None:
            hi = lo + 1.0   # degenerate uniform mosaic
        else:
            raise ValueError(f"inverted color range [{lo}, {hi}]")
    return LUT[lut_index(mosaic.temps, lo, hi)]


# ---------------------------------------------------------------------------
# .tmap raster format
# ---------------------------------------------------------------------------

_TMAP_MAGIC = b"TMAP1"


def write_tmap(mosaic: ThermalMosaic, path: str | Path) -> None:
    header = (_TMAP_MAGIC + b"\n"
              + f"{mosaic.width} {mosaic.height}\n".encode())
    body = mosaic.temps.astype("<f4").tobytes()
    Path(path).write_bytes(header + body)


def read_tmap(path: str | Path, start_time: float = 0.0,
              line_period: float = 1.0 / 512.0) -> ThermalMosaic:
    data = Path(path).read_bytes()
    if not data.startswith(_TMAP_MAGIC + b"\n"):
        raise ThermalFormatError("not a TMAP1 file")
    nl = data.index(b"\n", len(_TMAP_MAGIC) + 1)
    try:
        w_s, h_s = data[len(_TMAP_MAGIC) + 1:nl].split()
        w, h = int(w_s), int(h_s)
    except ValueError as exc:
        raise ThermalFormatError("bad .tmap dimension header") from exc
    body = data[nl + 1:]
    if len(body) < 4 * w * h:
        raise ThermalFormatError("truncated .tmap payload")
    temps = np.frombuffer(body, dtype="<f4", count=w * h).reshape(h, w)
    return ThermalMosaic(temps=temps.copy(), start_time=start_time,
                         line_period=line_period)


def report_from_mosaics(mosaic_a: ThermalMosaic, mosaic_b: ThermalMosaic | None,
                        block: int = DEFAULT_BLOCK,
                        threshold_c: float = DEFAULT_ALARM_C,
                        tol: float = DEFAULT_CROSS_TOL_C) -> tuple[ThermalReport, BlockStats]:
    """Convenience wrapper: stats + alarms on chain A, cross-check against
    chain B when it is available."""
    stats_a = block_stats(mosaic_a, block, block)
    report = ThermalReport(alarms=detect_alarms(stats_a, threshold_c),
                           clamped_count=mosaic_a.clamped_count)
    if mosaic_b is not None:
        stats_b = block_stats(mosaic_b, block, block)
        report.cross_check = cross_validate(stats_a, stats_b, tol)
    return report, stats_a
