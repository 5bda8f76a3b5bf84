"""Pixel-level primitives shared by the analysis pipelines.

Grayscale/binary raster types, adaptive (Otsu) thresholding, Canny edge
detection, disk dilation, hole filling and connected-component labeling,
plus binary PGM/PPM I/O.

All operations are pure functions of their inputs; callers may run them on
distinct images in parallel.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy import ndimage

# 4- and 8-connectivity structuring elements for labeling.
_CONN4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_CONN8 = np.ones((3, 3), dtype=bool)

# Gaussian pre-smooth used by the edge detector (canonical default).
CANNY_SIGMA = 1.4


class ImageFormatError(ValueError):
    """Raised for malformed raster files or inconsistent dimensions."""


@dataclass
class GrayImage:
    """8-bit grayscale raster, row-major."""

    data: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.data)
        if a.ndim != 2:
            raise ImageFormatError(f"expected 2-D raster, got shape {a.shape}")
        if a.shape[0] < 1 or a.shape[1] < 1:
            raise ImageFormatError(f"empty raster {a.shape}")
        if a.dtype != np.uint8:
            if a.min() < 0 or a.max() > 255:
                raise ImageFormatError("intensities out of [0,255]")
            a = a.astype(np.uint8)
        self.data = a

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass
class BinaryImage:
    """Boolean raster, row-major; same dimension contract as GrayImage."""

    mask: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.mask)
        if m.ndim != 2:
            raise ImageFormatError(f"expected 2-D mask, got shape {m.shape}")
        if m.shape[0] < 1 or m.shape[1] < 1:
            raise ImageFormatError(f"empty mask {m.shape}")
        self.mask = m.astype(bool)

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    @property
    def height(self) -> int:
        return self.mask.shape[0]


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box: top-left (x, y), extent (w, h), w,h >= 1."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self) -> None:
        if self.w < 1 or self.h < 1:
            raise ValueError(f"degenerate box {self}")

    @property
    def x2(self) -> int:
        """One past the right edge."""
        return self.x + self.w

    @property
    def y2(self) -> int:
        """One past the bottom edge."""
        return self.y + self.h

    @property
    def bottom_right(self) -> tuple[int, int]:
        """Bottom-right corner (x+w, y+h), the voting anchor."""
        return (self.x + self.w, self.y + self.h)

    @property
    def area(self) -> int:
        return self.w * self.h

    def contains_box(self, other: "BBox") -> bool:
        return (self.x <= other.x and self.y <= other.y
                and other.x2 <= self.x2 and other.y2 <= self.y2)

    def intersection_area(self, other: "BBox") -> int:
        iw = min(self.x2, other.x2) - max(self.x, other.x)
        ih = min(self.y2, other.y2) - max(self.y, other.y)
        return max(0, iw) * max(0, ih)

    def iou(self, other: "BBox") -> float:
        inter = self.intersection_area(other)
        union = self.area + other.area - inter
        return inter / union if union else 0.0


@dataclass
class LabeledComponents:
    """Connected-component labeling result.

    labels: per-pixel component id, 0 = background, ids 1..n in
    first-encounter raster order. boxes[i] / areas[i] belong to id i+1.
    """

    labels: np.ndarray
    boxes: list[BBox] = field(default_factory=list)
    areas: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def count(self) -> int:
        return len(self.boxes)


class OtsuResult(NamedTuple):
    threshold: int
    degenerate: bool


def otsu_threshold(img: GrayImage) -> OtsuResult:
    """Intensity threshold minimizing intra-class variance.

    Equivalent to maximizing between-class variance over all 256 candidate
    thresholds; ties broken by the smallest threshold.  A single-intensity
    image is flagged degenerate and returns that intensity (callers treat
    the image as all-background).
    """
    hist = np.bincount(img.data.ravel(), minlength=256).astype(np.float64)
    nonzero = np.nonzero(hist)[0]
    if len(nonzero) == 1:
        return OtsuResult(int(nonzero[0]), True)

    total = hist.sum()
    # Class split at t: background = intensities <= t, foreground = > t.
    w0 = np.cumsum(hist)
    w1 = total - w0
    cum_mean = np.cumsum(hist * np.arange(256))
    grand_mean = cum_mean[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        mu0 = cum_mean / w0
        mu1 = (grand_mean - cum_mean) / w1
    between = w0 * w1 * (mu0 - mu1) ** 2
    between[~np.isfinite(between)] = -1.0
    # argmax returns the first (smallest) index on ties.
    return OtsuResult(int(np.argmax(between)), False)


def _sobel_gradients(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    kx = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float32)
    gx = ndimage.convolve(img, kx, mode="nearest")
    gy = ndimage.convolve(img, kx.T, mode="nearest")
    return gx, gy


def _nonmax_suppress(mag: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Keep local maxima of `mag` along the gradient direction.

    Direction is quantized to 4 bins (mod pi).  On a two-pixel plateau the
    asymmetric >=/> comparison keeps exactly one pixel, so step edges stay
    one pixel thin.
    """
    angle = np.arctan2(gy, gx)  # [-pi, pi]
    bins = np.round(angle / (np.pi / 4.0)).astype(np.int8) % 4  # mod pi
    offsets = {0: (0, 1), 1: (1, 1), 2: (1, 0), 3: (1, -1)}  # (dy, dx) per bin

    padded = np.pad(mag, 1, mode="constant")
    keep = np.zeros(mag.shape, dtype=bool)
    h, w = mag.shape
    for b, (dy, dx) in offsets.items():
        plus = padded[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]
        minus = padded[1 - dy:1 - dy + h, 1 - dx:1 - dx + w]
        keep |= (bins == b) & (mag >= minus) & (mag > plus)
    return keep


def canny_edges(img: GrayImage, t_high: float, t_low: float) -> BinaryImage:
    """Canny edge detection: Gaussian smooth, Sobel gradients, non-maximum
    suppression, hysteresis.

    Thresholds apply to the Sobel gradient magnitude.  Every returned edge
    pixel lies on an 8-connected chain of >= t_low pixels containing at
    least one >= t_high seed.
    """
    if not (0 <= t_low <= t_high <= 4 * 255):
        raise ValueError(f"bad hysteresis thresholds low={t_low} high={t_high}")
    smoothed = ndimage.gaussian_filter(
        img.data.astype(np.float32), CANNY_SIGMA, mode="nearest")
    gx, gy = _sobel_gradients(smoothed)
    mag = np.hypot(gx, gy)
    thin = _nonmax_suppress(mag, gx, gy)

    low = thin & (mag >= t_low) if t_low > 0 else thin & (mag > 0)
    high = low & (mag >= t_high)
    if not high.any():
        return BinaryImage(np.zeros(img.data.shape, dtype=bool))
    lbl, n = ndimage.label(low, structure=_CONN8)
    seeded = np.zeros(n + 1, dtype=bool)
    seeded[np.unique(lbl[high])] = True
    seeded[0] = False
    return BinaryImage(seeded[lbl])


def disk_offsets(radius: int) -> np.ndarray:
    """Integer offsets of the discrete disk {(dx,dy): dx^2+dy^2 <= r^2}."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    r = int(radius)
    dy, dx = np.mgrid[-r:r + 1, -r:r + 1]
    good = dy * dy + dx * dx <= r * r
    return np.stack([dy[good], dx[good]], axis=1)


def dilate_disk(img: BinaryImage, r_d: int) -> BinaryImage:
    """Morphological dilation by a Euclidean disk of radius r_d.

    Output pixel is set iff some input pixel lies within distance r_d.
    Pixels outside the image are background.
    """
    if r_d == 0:
        return BinaryImage(img.mask.copy())
    mask = img.mask
    h, w = mask.shape
    out = np.zeros_like(mask)
    for dy, dx in disk_offsets(r_d):
        ys = slice(max(0, dy), min(h, h + dy))
        yd = slice(max(0, -dy), min(h, h - dy))
        xs = slice(max(0, dx), min(w, w + dx))
        xd = slice(max(0, -dx), min(w, w - dx))
        out[yd, xd] |= mask[ys, xs]
    return BinaryImage(out)


def fill_holes(img: BinaryImage) -> BinaryImage:
    """Fill background regions not 4-connected to the image border.

    Background connectivity is 4 (dual of the 8-connected foreground),
    which avoids topological paradoxes.
    """
    bg = ~img.mask
    lbl, n = ndimage.label(bg, structure=_CONN4)
    if n == 0:
        return BinaryImage(img.mask.copy())
    border_labels = np.zeros(n + 1, dtype=bool)
    border_labels[np.unique(lbl[0, :])] = True
    border_labels[np.unique(lbl[-1, :])] = True
    border_labels[np.unique(lbl[:, 0])] = True
    border_labels[np.unique(lbl[:, -1])] = True
    border_labels[0] = False
    # Holes = background components that never touch the border.
    hole = bg & ~border_labels[lbl]
    return BinaryImage(img.mask | hole)


def connected_components(img: BinaryImage) -> LabeledComponents:
    """8-connected component labeling with tight boxes and pixel areas.

    Components are numbered 1..n in raster order of their first-encountered
    pixel.  The labeling core is scipy.ndimage.label; numbering is enforced
    here so the contract does not depend on scipy internals.
    """
    raw, n = ndimage.label(img.mask, structure=_CONN8)
    if n == 0:
        return LabeledComponents(labels=np.zeros(img.mask.shape, dtype=np.int32))

    flat = raw.ravel()
    values, first_idx = np.unique(flat, return_index=True)
    if values[0] == 0:
        values, first_idx = values[1:], first_idx[1:]
    order = np.argsort(first_idx, kind="stable")
    remap = np.zeros(n + 1, dtype=np.int32)
    remap[values[order]] = np.arange(1, n + 1, dtype=np.int32)
    labels = remap[raw]

    areas = np.bincount(labels.ravel(), minlength=n + 1)[1:].astype(np.int64)
    slices = ndimage.find_objects(labels)
    boxes = []
    for sl in slices:
        ys, xs = sl
        boxes.append(BBox(x=int(xs.start), y=int(ys.start),
                          w=int(xs.stop - xs.start), h=int(ys.stop - ys.start)))
    return LabeledComponents(labels=labels, boxes=boxes, areas=areas)


# ---------------------------------------------------------------------------
# Raster I/O: binary PGM (P5) / PPM (P6), bit-exact round trip.
# ---------------------------------------------------------------------------

def _read_pnm_header(data: bytes, magic: bytes) -> tuple[int, int, int, int]:
    """Parse a PNM header; returns (width, height, maxval, data offset)."""
    if not data.startswith(magic):
        raise ImageFormatError(f"not a {magic.decode()} file")
    pos = len(magic)
    fields: list[int] = []
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ImageFormatError("truncated header")
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace byte after maxval
    w, h, maxval = fields
    return w, h, maxval, pos


def read_pgm(path: str | Path) -> GrayImage:
    data = Path(path).read_bytes()
    w, h, maxval, pos = _read_pnm_header(data, b"P5")
    if maxval != 255:
        raise ImageFormatError(f"unsupported maxval {maxval}")
    if len(data) - pos < w * h:
        raise ImageFormatError("truncated raster")
    raster = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=pos)
    return GrayImage(raster.reshape(h, w).copy())


def write_pgm(img: GrayImage, path: str | Path) -> None:
    header = f"P5\n{img.width} {img.height}\n255\n".encode()
    Path(path).write_bytes(header + img.data.tobytes())


def read_binary_pgm(path: str | Path) -> BinaryImage:
    gray = read_pgm(path)
    vals = np.unique(gray.data)
    if not np.isin(vals, (0, 255)).all():
        raise ImageFormatError("binary PGM must contain only {0, 255}")
    return BinaryImage(gray.data == 255)


def write_binary_pgm(img: BinaryImage, path: str | Path) -> None:
    write_pgm(GrayImage(np.where(img.mask, 255, 0).astype(np.uint8)), path)


def read_ppm(path: str | Path) -> np.ndarray:
    """Read a binary PPM (P6) into an (h, w, 3) uint8 array."""
    data = Path(path).read_bytes()
    w, h, maxval, pos = _read_pnm_header(data, b"P6")
    if maxval != 255:
        raise ImageFormatError(f"unsupported maxval {maxval}")
    if len(data) - pos < w * h * 3:
        raise ImageFormatError("truncated raster")
    raster = np.frombuffer(data, dtype=np.uint8, count=w * h * 3, offset=pos)
    return raster.reshape(h, w, 3).copy()


def write_ppm(rgb: np.ndarray, path: str | Path) -> None:
    rgb = np.asarray(rgb, dtype=np.uint8)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ImageFormatError(f"expected (h, w, 3) array, got {rgb.shape}")
    h, w = rgb.shape[:2]
    header = f"P6\n{w} {h}\n255\n".encode()
    Path(path).write_bytes(header + rgb.tobytes())
