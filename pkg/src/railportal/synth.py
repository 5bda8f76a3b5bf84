"""Synthetic train-passage generator.

Renders the raw streams a real portal would record — side-view line-scan
mosaics with a painted 12-character identifier, a roof-view mosaic with an
optional pantograph, two thermal line chains, frontal frames — plus a
ground-truth document with exact glyph boxes, hotspot geometry and
pantograph placement.  Everything is deterministic per seed.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .imgcore import BBox, GrayImage, write_pgm
from .thermal import SENSOR_MAX_C, SENSOR_MIN_C, ThermalMosaic, write_tmap

ID_LENGTH = 12

# 5x7 bitmap font for the identifier digits; glyph pixels are '#'.
FONT_5X7: dict[str, tuple[str, ...]] = {
    "0": (".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."),
    "1": ("..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."),
    "2": (".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"),
    "3": ("#####", "...#.", "..#..", "...#.", "....#", "#...#", ".###."),
    "4": ("...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."),
    "5": ("#####", "#....", "####.", "....#", "....#", "#...#", ".###."),
    "6": ("..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."),
    "7": ("#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."),
    "8": (".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."),
    "9": (".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."),
}


class ScenarioError(ValueError):
    """Invalid scenario description."""


@dataclass(frozen=True)
class HotspotSpec:
    u: float            # horizontal position along the passage, 0..1
    v: float            # vertical position on the thermal line, 0..1
    radius_px: int = 12
    temp_c: float = 300.0


@dataclass(frozen=True)
class PantographSpec:
    present: bool = True
    u: float = 0.5
    gain: float = 1.0        # illumination multiplier on the pasted template
    shear_deg: float = 0.0
    rotate_deg: float = 0.0
    scale: float = 1.0


@dataclass(frozen=True)
class WagonSpec:
    id_string: str = "918540652003"
    glyph_scale: int = 8
    id_u: float = 0.45        # identifier anchor within the wagon span
    id_v: float = 0.55


@dataclass(frozen=True)
class ScenarioSpec:
    seed: int = 0
    duration_s: float = 2.0
    wagons: tuple[WagonSpec, ...] = (WagonSpec(),)
    distractors: int = 30
    noise_sigma: float = 8.0
    side_width: int = 8192
    side_height: int = 1024
    roof_width: int = 2048
    roof_height: int = 512
    thermal_rate_hz: float = 512.0
    thermal_noise_c: float = 1.0
    frontal_rate_hz: float = 25.0
    frontal_size: tuple[int, int] = (640, 480)   # (w, h)
    hotspots: tuple[HotspotSpec, ...] = (HotspotSpec(u=0.5, v=0.5),)
    pantograph: PantographSpec = PantographSpec()

    def __post_init__(self) -> None:
        for wagon in self.wagons:
            if len(wagon.id_string) != ID_LENGTH:
                raise ScenarioError(
                    f"identifier {wagon.id_string!r} must have {ID_LENGTH} characters")
            bad = [c for c in wagon.id_string if c not in FONT_5X7]
            if bad:
                raise ScenarioError(f"unrenderable identifier characters {bad}")
        for spot in self.hotspots:
            if not (SENSOR_MIN_C <= spot.temp_c <= SENSOR_MAX_C):
                raise ScenarioError(f"hotspot {spot.temp_c} outside sensor range")
        if self.duration_s <= 0:
            raise ScenarioError("duration must be positive")


@dataclass
class SideTruth:
    glyph_boxes: list[BBox] = field(default_factory=list)
    glyph_chars: list[str] = field(default_factory=list)
    distractor_boxes: list[BBox] = field(default_factory=list)
    id_box: BBox | None = None


def render_glyph(char: str, scale: int) -> np.ndarray:
    """Boolean raster of one font glyph scaled up by an integer factor."""
    rows = FONT_5X7[char]
    bitmap = np.array([[c == "#" for c in row] for row in rows], dtype=bool)
    return np.kron(bitmap, np.ones((scale, scale), dtype=bool))


def _tight_box(mask: np.ndarray, x0: int, y0: int) -> BBox:
    ys, xs = np.nonzero(mask)
    return BBox(x=x0 + int(xs.min()), y=y0 + int(ys.min()),
                w=int(xs.max() - xs.min()) + 1, h=int(ys.max() - ys.min()) + 1)


def _stamp_id(img: np.ndarray, wagon: WagonSpec, span_x0: int, span_w: int,
              truth: SideTruth, intensity: int,
              touching_pair: int | None = None) -> None:
    scale = wagon.glyph_scale
    gap = 2 * scale
    glyph_w, glyph_h = 5 * scale, 7 * scale
    gaps = [gap] * (ID_LENGTH - 1)
    if touching_pair is not None:
        gaps[touching_pair] = 0     # reproduce the merged-characters failure
    total_w = ID_LENGTH * glyph_w + sum(gaps)
    x = span_x0 + int(wagon.id_u * (span_w - total_w))
    y = int(wagon.id_v * (img.shape[0] - glyph_h))
    boxes = []
    for i, ch in enumerate(wagon.id_string):
        g = render_glyph(ch, scale)
        img[y:y + glyph_h, x:x + glyph_w][g] = intensity
        boxes.append(_tight_box(g, x, y))
        truth.glyph_chars.append(ch)
        x += glyph_w + (gaps[i] if i < ID_LENGTH - 1 else 0)
    truth.glyph_boxes.extend(boxes)
    x1 = min(b.x for b in boxes)
    y1 = min(b.y for b in boxes)
    x2 = max(b.x2 for b in boxes)
    y2 = max(b.y2 for b in boxes)
    truth.id_box = BBox(x1, y1, x2 - x1, y2 - y1)


def _boxes_share_window(a: BBox, b: BBox, window: int) -> bool:
    """Whether corners of the two boxes could fall into one sweep window."""
    dx = max(a.x - b.x2, b.x - a.x2, 0)
    dy = max(a.y - b.y2, b.y - a.y2, 0)
    return dx < window and dy < window


def _place_distractors(img: np.ndarray, rng: np.random.Generator, count: int,
                       keep_out: list[BBox], truth: SideTruth,
                       window: int = 512, min_spacing: int = 420) -> None:
    h, w = img.shape
    placed: list[BBox] = []
    attempts = 0
    while len(placed) < count and attempts < count * 200:
        attempts += 1
        bw = int(rng.integers(14, 96))
        bh = int(rng.integers(14, 96))
        x = int(rng.integers(8, max(9, w - bw - 8)))
        y = int(rng.integers(8, max(9, h - bh - 8)))
        box = BBox(x, y, bw, bh)
        if any(_boxes_share_window(box, ko, window) for ko in keep_out):
            continue
        if any(_boxes_share_window(box, p, min_spacing) for p in placed):
            continue
        dark = rng.random() < 0.7
        val = int(rng.integers(25, 120)) if dark else int(rng.integers(205, 245))
        kind = int(rng.integers(0, 3))
        if kind == 0:
            img[y:y + bh, x:x + bw] = val
        elif kind == 1:
            yy, xx = np.mgrid[0:bh, 0:bw]
            ell = (((xx - bw / 2) / (bw / 2)) ** 2
                   + ((yy - bh / 2) / (bh / 2)) ** 2) <= 1.0
            img[y:y + bh, x:x + bw][ell] = val
        else:
            bar = max(4, bh // 4)
            img[y:y + bar, x:x + bw] = val
            img[y + bh - bar:y + bh, x:x + bw] = val
            img[y:y + bh, x:x + bar] = val
        placed.append(box)
    truth.distractor_boxes.extend(placed)


def render_side_mosaic(spec: ScenarioSpec,
                       touching_pair: int | None = None) -> tuple[GrayImage, SideTruth]:
    """Side-view line-scan mosaic with identifier, distractors and noise.

    `touching_pair` renders the identifier with a zero gap between glyphs
    i and i+1 so that pair merges into one blob downstream.
    """
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0x51DE]))
    w, h = spec.side_width, spec.side_height
    xx = np.linspace(0, 2 * np.pi, w, dtype=np.float32)
    base = 170.0 + 6.0 * np.sin(xx + rng.uniform(0, 2 * np.pi))
    img = np.tile(base, (h, 1)).astype(np.float32)
    img += np.linspace(-4, 4, h, dtype=np.float32)[:, None]
    # faint panel seams: visible texture, too weak to raise edges
    for v in (0.08, 0.92):
        row = int(v * h)
        img[row:row + 3, :] -= 12.0

    truth = SideTruth()
    span_w = w // len(spec.wagons)
    for wi, wagon in enumerate(spec.wagons):
        _stamp_id(img, wagon, wi * span_w, span_w, truth, intensity=30,
                  touching_pair=touching_pair)
    keep_out = [truth.id_box] if truth.id_box else []
    _place_distractors(img, rng, spec.distractors, keep_out, truth)

    if spec.noise_sigma > 0:
        img += rng.normal(0.0, spec.noise_sigma, size=img.shape).astype(np.float32)
    return GrayImage(np.clip(np.round(img), 0, 255).astype(np.uint8)), truth


# ---------------------------------------------------------------------------
# Roof view and pantograph compositing
# ---------------------------------------------------------------------------

TEMPLATE_SIZE = 256


def pantograph_template(size: int = TEMPLATE_SIZE) -> GrayImage:
    """Deterministic roof-apparatus template used for feature modeling.

    A diamond frame with diagonal struts, a contact bar and mounting
    blocks over a grained background; the grain makes local descriptors
    distinctive.
    """
    rng = np.random.default_rng(np.random.SeedSequence([0x9A27]))
    s = size
    yy, xx = np.mgrid[0:s, 0:s].astype(np.float32)
    img = 150.0 + 18.0 * np.sin(xx * 0.11 + 1.3) * np.cos(yy * 0.085 + 0.4)
    img += rng.normal(0, 7.0, size=(s, s)).astype(np.float32)

    def line(x0, y0, x1, y1, thick, val):
        steps = int(max(abs(x1 - x0), abs(y1 - y0)) * 2) + 1
        for t in np.linspace(0, 1, steps):
            cx, cy = x0 + (x1 - x0) * t, y0 + (y1 - y0) * t
            x_lo, x_hi = int(cx - thick), int(cx + thick) + 1
            y_lo, y_hi = int(cy - thick), int(cy + thick) + 1
            img[max(0, y_lo):y_hi, max(0, x_lo):x_hi] = val

    m = s / 256.0
    line(20 * m, 230 * m, 128 * m, 60 * m, 4 * m, 40)     # left arm
    line(236 * m, 230 * m, 128 * m, 60 * m, 4 * m, 40)    # right arm
    line(60 * m, 230 * m, 128 * m, 120 * m, 3 * m, 55)    # lower struts
    line(196 * m, 230 * m, 128 * m, 120 * m, 3 * m, 55)
    line(30 * m, 56 * m, 226 * m, 56 * m, 5 * m, 25)      # contact bar
    line(30 * m, 44 * m, 226 * m, 44 * m, 2 * m, 70)      # wear strip
    for bx in (40, 128, 216):                             # mounting blocks
        x0, y0 = int(bx * m - 10 * m), int(236 * m)
        img[y0:y0 + int(14 * m), max(0, x0):x0 + int(20 * m)] = 60
    for bx, by in ((80, 140), (176, 140), (128, 88)):     # pivot bolts
        cy0, cx0 = int(by * m), int(bx * m)
        r = int(6 * m)
        dyy, dxx = np.mgrid[-r:r + 1, -r:r + 1]
        disk = dyy ** 2 + dxx ** 2 <= r * r
        img[cy0 - r:cy0 + r + 1, cx0 - r:cx0 + r + 1][disk] = 230
    return GrayImage(np.clip(np.round(img), 0, 255).astype(np.uint8))


def placement_homography(spec: PantographSpec, template_size: int,
                         center_xy: tuple[float, float]) -> np.ndarray:
    """Template -> scene homography for the configured paste."""
    s = template_size
    shear = np.tan(np.radians(spec.shear_deg))
    rot = np.radians(spec.rotate_deg)
    c, snr = np.cos(rot), np.sin(rot)
    to_origin = np.array([[1, 0, -s / 2], [0, 1, -s / 2], [0, 0, 1.0]])
    shear_m = np.array([[1, shear, 0], [0, 1, 0], [0, 0, 1.0]])
    rot_m = np.array([[c, -snr, 0], [snr, c, 0], [0, 0, 1.0]])
    scale_m = np.diag([spec.scale, spec.scale, 1.0])
    to_scene = np.array([[1, 0, center_xy[0]], [0, 1, center_xy[1]], [0, 0, 1.0]])
    return to_scene @ rot_m @ shear_m @ scale_m @ to_origin


def warp_corners(h_mat: np.ndarray, w: int, h: int) -> np.ndarray:
    """Images of the four (0,0)-(w,h) rectangle corners under a homography."""
    corners = np.array([[0, 0, 1], [w, 0, 1], [w, h, 1], [0, h, 1]], dtype=np.float64)
    mapped = corners @ h_mat.T
    return mapped[:, :2] / mapped[:, 2:3]


def paste_warped(scene: np.ndarray, template: np.ndarray, h_mat: np.ndarray,
                 gain: float = 1.0) -> None:
    """Composite a projectively warped template into the scene in place.

    Inverse-map bilinear sampling over the warped footprint's bounding
    box; pixels mapping outside the template keep the scene value.
    """
    th, tw = template.shape
    corners = warp_corners(h_mat, tw, th)
    x0 = max(0, int(np.floor(corners[:, 0].min())))
    y0 = max(0, int(np.floor(corners[:, 1].min())))
    x1 = min(scene.shape[1], int(np.ceil(corners[:, 0].max())) + 1)
    y1 = min(scene.shape[0], int(np.ceil(corners[:, 1].max())) + 1)
    if x1 <= x0 or y1 <= y0:
        return
    h_inv = np.linalg.inv(h_mat)
    yy, xx = np.mgrid[y0:y1, x0:x1].astype(np.float64)
    ones = np.ones_like(xx)
    src = np.stack([xx, yy, ones], axis=-1) @ h_inv.T
    sx = src[..., 0] / src[..., 2]
    sy = src[..., 1] / src[..., 2]
    inside = (sx >= 0) & (sx <= tw - 1) & (sy >= 0) & (sy <= th - 1)
    sxc = np.clip(sx, 0, tw - 1.0001)
    syc = np.clip(sy, 0, th - 1.0001)
    ix, iy = sxc.astype(int), syc.astype(int)
    fx, fy = sxc - ix, syc - iy
    t = template.astype(np.float32)
    sampled = ((1 - fy) * ((1 - fx) * t[iy, ix] + fx * t[iy, ix + 1])
               + fy * ((1 - fx) * t[iy + 1, ix] + fx * t[iy + 1, ix + 1]))
    sampled = np.clip(sampled * gain, 0, 255)
    region = scene[y0:y1, x0:x1]
    region[inside] = sampled[inside]


@dataclass
class RoofTruth:
    present: bool
    corners: np.ndarray | None = None     # warped template corners, scene coords
    bbox: BBox | None = None              # axis-aligned bound clipped to scene
    homography: np.ndarray | None = None


def render_roof_mosaic(spec: ScenarioSpec) -> tuple[GrayImage, RoofTruth]:
    """Roof-view mosaic: sky gradient, catenary cables, optional pantograph."""
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0x800F]))
    w, h = spec.roof_width, spec.roof_height
    img = np.tile(np.linspace(188, 205, h, dtype=np.float32)[:, None], (1, w))
    for _ in range(3):                      # catenary cables
        y = int(rng.integers(h // 8, h // 3))
        img[y:y + 2, :] = 95.0
    for _ in range(4):                      # roof ribs
        x = int(rng.integers(0, w - 4))
        img[h - h // 6:, x:x + 3] = 120.0

    pg = spec.pantograph
    truth = RoofTruth(present=pg.present)
    if pg.present:
        template = pantograph_template()
        margin = int(TEMPLATE_SIZE * pg.scale * 0.8) + 8
        cx = margin + pg.u * (w - 2 * margin)
        cy = h / 2.0
        h_mat = placement_homography(pg, TEMPLATE_SIZE, (cx, cy))
        paste_warped(img, template.data, h_mat, gain=pg.gain)
        corners = warp_corners(h_mat, TEMPLATE_SIZE, TEMPLATE_SIZE)
        x0 = max(0.0, corners[:, 0].min())
        y0 = max(0.0, corners[:, 1].min())
        x1 = min(float(w), corners[:, 0].max())
        y1 = min(float(h), corners[:, 1].max())
        truth.corners = corners
        truth.bbox = BBox(int(x0), int(y0),
                          max(1, int(np.ceil(x1 - x0))), max(1, int(np.ceil(y1 - y0))))
        truth.homography = h_mat
    if spec.noise_sigma > 0:
        img += rng.normal(0, 5.0, size=img.shape).astype(np.float32)
    return GrayImage(np.clip(np.round(img), 0, 255).astype(np.uint8)), truth


# ---------------------------------------------------------------------------
# Thermal chains and frontal frames
# ---------------------------------------------------------------------------

@dataclass
class ThermalTruth:
    hotspots: list[dict] = field(default_factory=list)   # per-spot geometry


def render_thermal_chain(spec: ScenarioSpec, chain: str,
                         max_perturb_c: float = 0.0) -> tuple[ThermalMosaic, ThermalTruth]:
    """One thermal chain's mosaic for the passage.

    Both chains share the deterministic scene layout and differ by
    independent noise; `max_perturb_c` shifts the hottest structure to
    simulate a faulty chain.
    """
    chain_tag = {"left": 1, "right": 2}[chain]
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0x7E41, chain_tag]))
    width = int(round(spec.duration_s * spec.thermal_rate_hz))
    h = 256
    temps = np.full((h, width), 40.0, dtype=np.float32)
    temps += np.linspace(0, 4, h, dtype=np.float32)[:, None]    # warmer low body
    engine_cols = max(4, width // 12)
    temps[:, :engine_cols] = 85.0                               # locomotive block
    wheel_rows = slice(h - 24, h)
    for k in range(6):                                          # axle boxes
        c = int((k + 0.5) * width / 6)
        temps[wheel_rows, max(0, c - 6):c + 6] = 68.0

    truth = ThermalTruth()
    for spot in spec.hotspots:
        cx = int(spot.u * (width - 1))
        cy = int(spot.v * (h - 1))
        r = spot.radius_px
        yy, xx = np.mgrid[max(0, cy - r):min(h, cy + r + 1),
                          max(0, cx - r):min(width, cx + r + 1)]
        disk = (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
        temps[max(0, cy - r):min(h, cy + r + 1),
              max(0, cx - r):min(width, cx + r + 1)][disk] = spot.temp_c + max_perturb_c
        truth.hotspots.append({"cx": cx, "cy": cy, "radius": r,
                               "temp_c": spot.temp_c})
    if spec.thermal_noise_c > 0:
        temps += rng.uniform(-spec.thermal_noise_c, spec.thermal_noise_c,
                             size=temps.shape).astype(np.float32)
    temps = np.clip(temps, SENSOR_MIN_C, SENSOR_MAX_C)
    start = {"left": 0.010, "right": 0.015}[chain]
    return (ThermalMosaic(temps=temps, start_time=start,
                          line_period=1.0 / spec.thermal_rate_hz), truth)


def render_frontal_frame(spec: ScenarioSpec, index: int) -> GrayImage:
    """One frontal frame: approaching silhouette grows with time."""
    w, h = spec.frontal_size
    total = frontal_frame_count(spec)
    frac = index / max(1, total - 1)
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0xF0A, index]))
    img = np.tile(np.linspace(120, 190, h, dtype=np.float32)[:, None], (1, w))
    half = int((0.12 + 0.3 * frac) * w / 2)
    top = int(h * (0.35 - 0.1 * frac))
    img[top:h - h // 8, w // 2 - half:w // 2 + half] = 60.0
    img[top:top + 8, w // 2 - half:w // 2 + half] = 220.0      # headlight band
    img += rng.normal(0, 3.0, size=img.shape).astype(np.float32)
    return GrayImage(np.clip(np.round(img), 0, 255).astype(np.uint8))


def frontal_frame_count(spec: ScenarioSpec) -> int:
    return int(np.floor(spec.duration_s * spec.frontal_rate_hz))


# ---------------------------------------------------------------------------
# Full scenario bundle
# ---------------------------------------------------------------------------

STREAM_START = {"frontal": 0.0, "side-low": 0.02, "side-high": 0.02,
                "thermal-left": 0.010, "thermal-right": 0.015}


def _box_dict(b: BBox) -> dict:
    return {"x": b.x, "y": b.y, "w": b.w, "h": b.h}


def write_scenario(spec: ScenarioSpec, out_dir: str | Path,
                   touching_pair: int | None = None) -> Path:
    """Render and persist every raw stream plus ground truth.

    Layout: side_low.pgm, side_high.pgm, thermal_left.tmap,
    thermal_right.tmap, frontal/frame_NNNNN.pgm, truth.json, scenario.json.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    side, side_truth = render_side_mosaic(spec, touching_pair=touching_pair)
    write_pgm(side, out / "side_low.pgm")
    roof, roof_truth = render_roof_mosaic(spec)
    write_pgm(roof, out / "side_high.pgm")
    th_l, th_truth = render_thermal_chain(spec, "left")
    th_r, _ = render_thermal_chain(spec, "right")
    write_tmap(th_l, out / "thermal_left.tmap")
    write_tmap(th_r, out / "thermal_right.tmap")
    frames_dir = out / "frontal"
    frames_dir.mkdir(exist_ok=True)
    for i in range(frontal_frame_count(spec)):
        write_pgm(render_frontal_frame(spec, i), frames_dir / f"frame_{i:05d}.pgm")

    line_rate = spec.side_width / spec.duration_s
    scenario_doc = {
        "version": "SISS1",
        "spec": asdict(spec),
        "streams": {
            "frontal": {"rate_hz": spec.frontal_rate_hz,
                        "start_time": STREAM_START["frontal"],
                        "dims": list(spec.frontal_size),
                        "count": frontal_frame_count(spec)},
            "side-low": {"rate_hz": line_rate,
                         "start_time": STREAM_START["side-low"],
                         "dims": [spec.side_width, spec.side_height]},
            "side-high": {"rate_hz": spec.roof_width / spec.duration_s,
                          "start_time": STREAM_START["side-high"],
                          "dims": [spec.roof_width, spec.roof_height]},
            "thermal-left": {"rate_hz": spec.thermal_rate_hz,
                             "start_time": STREAM_START["thermal-left"],
                             "dims": [th_l.width, 256]},
            "thermal-right": {"rate_hz": spec.thermal_rate_hz,
                              "start_time": STREAM_START["thermal-right"],
                              "dims": [th_r.width, 256]},
        },
    }
    truth_doc = {
        "version": "SISS1",
        "id_strings": [w.id_string for w in spec.wagons],
        "glyph_boxes": [_box_dict(b) for b in side_truth.glyph_boxes],
        "glyph_chars": side_truth.glyph_chars,
        "id_box": _box_dict(side_truth.id_box) if side_truth.id_box else None,
        "distractor_boxes": [_box_dict(b) for b in side_truth.distractor_boxes],
        "pantograph": {
            "present": roof_truth.present,
            "bbox": _box_dict(roof_truth.bbox) if roof_truth.bbox else None,
            "corners": (roof_truth.corners.tolist()
                        if roof_truth.corners is not None else None),
        },
        "hotspots": th_truth.hotspots,
    }
    (out / "scenario.json").write_text(
        json.dumps(scenario_doc, indent=2, sort_keys=True) + "\n")
    (out / "truth.json").write_text(
        json.dumps(truth_doc, indent=2, sort_keys=True) + "\n")
    return out


def corpus_spec(seed: int, **overrides) -> ScenarioSpec:
    """Desk-scale evaluation scenario with seed-varied identifier and layout."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xC0]))
    digits = "".join(str(d) for d in rng.integers(0, 10, size=ID_LENGTH))
    wagon = WagonSpec(id_string=digits,
                      id_u=float(rng.uniform(0.15, 0.8)),
                      id_v=float(rng.uniform(0.25, 0.7)))
    base = ScenarioSpec(seed=seed, wagons=(wagon,),
                        distractors=int(30 + rng.integers(0, 9)),
                        hotspots=(HotspotSpec(u=float(rng.uniform(0.2, 0.8)),
                                              v=float(rng.uniform(0.2, 0.8))),),
                        pantograph=PantographSpec(
                            u=float(rng.uniform(0.2, 0.8)),
                            gain=float(rng.uniform(0.8, 1.2)),
                            shear_deg=float(rng.uniform(-10, 10)),
                            rotate_deg=float(rng.uniform(-5, 5)),
                            scale=float(rng.uniform(0.92, 1.08))))
    return replace(base, **overrides) if overrides else base
