"""Session bundles: tiled pyramids, stream sync, manifest persistence.

A processed passage is stored as a directory bundle: frontal frames, two
thermal mosaics, side mosaics, detection documents, plus 256-px tile
pyramids for the console's pan/zoom views and a time-to-position model
that synchronizes the playhead across streams.  Sessions are immutable
after save.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .imgcore import GrayImage, read_pgm, read_ppm, write_pgm, write_ppm

TILE_SIZE = 256
MANIFEST_VERSION = "SISS1"
STREAM_ROLES = ("frontal", "thermal-left", "thermal-right", "side-low", "side-high")


class SessionFormatError(ValueError):
    """Malformed or incomplete session bundle."""


# ---------------------------------------------------------------------------
# Tile pyramids
# ---------------------------------------------------------------------------

def downscale_2x(img: np.ndarray) -> np.ndarray:
    """2x2 box-filter halving with round-half-up integer means.

    Odd right/bottom edges average the 1x2 / 2x1 / 1x1 remainder blocks,
    so output dims are always ceil(input / 2).
    """
    h, w = img.shape[:2]
    h2, w2 = -(-h // 2), -(-w // 2)
    shape = (h2, w2) + img.shape[2:]
    acc = np.zeros(shape, dtype=np.uint32)
    cnt = np.zeros((h2, w2) + (1,) * (img.ndim - 2), dtype=np.uint32)
    for dy in (0, 1):
        for dx in (0, 1):
            sub = img[dy::2, dx::2]
            acc[:sub.shape[0], :sub.shape[1]] += sub
            cnt[:sub.shape[0], :sub.shape[1]] += 1
    return ((acc + cnt // 2) // cnt).astype(np.uint8)


@dataclass
class TilePyramid:
    """Disk-backed multi-resolution tiling: level 0 is the full-resolution
    image cut into 256-px tiles; each next level halves until the longest
    side fits one tile.  Tiles live at <root>/<level>/<tx>_<ty>.pgm (or
    .ppm for three-channel pyramids)."""

    root: Path
    levels: list[tuple[int, int]]       # (w, h) per level
    channels: int = 1
    tile_size: int = TILE_SIZE

    @property
    def suffix(self) -> str:
        return ".pgm" if self.channels == 1 else ".ppm"

    def grid(self, level: int) -> tuple[int, int]:
        w, h = self.levels[level]
        return (-(-w // self.tile_size), -(-h // self.tile_size))

    def tile_path(self, level: int, tx: int, ty: int) -> Path:
        return self.root / str(level) / f"{tx}_{ty}{self.suffix}"

    def meta_dict(self) -> dict:
        return {"tile_size": self.tile_size, "channels": self.channels,
                "levels": [list(lv) for lv in self.levels]}

    def save_meta(self) -> None:
        (self.root / "pyramid.json").write_text(
            json.dumps(self.meta_dict(), sort_keys=True) + "\n")

    @classmethod
    def load(cls, root: str | Path) -> "TilePyramid":
        root = Path(root)
        meta_path = root / "pyramid.json"
        if not meta_path.exists():
            raise SessionFormatError(f"missing pyramid metadata {meta_path}")
        meta = json.loads(meta_path.read_text())
        return cls(root=root, levels=[tuple(lv) for lv in meta["levels"]],
                   channels=meta["channels"], tile_size=meta["tile_size"])


def _write_level_tiles(arr: np.ndarray, level_dir: Path, channels: int) -> None:
    level_dir.mkdir(parents=True, exist_ok=True)
    h, w = arr.shape[:2]
    for ty in range(-(-h // TILE_SIZE)):
        for tx in range(-(-w // TILE_SIZE)):
            tile = arr[ty * TILE_SIZE:(ty + 1) * TILE_SIZE,
                       tx * TILE_SIZE:(tx + 1) * TILE_SIZE]
            if channels == 1:
                write_pgm(GrayImage(tile), level_dir / f"{tx}_{ty}.pgm")
            else:
                write_ppm(tile, level_dir / f"{tx}_{ty}.ppm")


def build_pyramid(image: GrayImage | np.ndarray, root: str | Path) -> TilePyramid:
    """Tile an image (grayscale or RGB) into a pyramid under `root`.

    Level 0 reassembles bit-exactly; higher levels are box-filter
    downscales.  Only the current level's raster is held in memory.
    """
    arr = image.data if isinstance(image, GrayImage) else np.asarray(image)
    channels = 1 if arr.ndim == 2 else arr.shape[2]
    root = Path(root)
    levels: list[tuple[int, int]] = []
    level = 0
    while True:
        levels.append((arr.shape[1], arr.shape[0]))
        _write_level_tiles(arr, root / str(level), channels)
        if max(arr.shape[:2]) <= TILE_SIZE:
            break
        arr = downscale_2x(arr)
        level += 1
    pyramid = TilePyramid(root=root, levels=levels, channels=channels)
    pyramid.save_meta()
    return pyramid


def tile(pyramid: TilePyramid, level: int, tx: int, ty: int) -> np.ndarray:
    """Fetch one stored tile; constant-cost, independent of image size."""
    if not (0 <= level < len(pyramid.levels)):
        raise IndexError(f"level {level} outside 0..{len(pyramid.levels) - 1}")
    gx, gy = pyramid.grid(level)
    if not (0 <= tx < gx and 0 <= ty < gy):
        raise IndexError(f"tile ({tx},{ty}) outside {gx}x{gy} grid at level {level}")
    path = pyramid.tile_path(level, tx, ty)
    if pyramid.channels == 1:
        return read_pgm(path).data
    return read_ppm(path)


def reassemble_level(pyramid: TilePyramid, level: int) -> np.ndarray:
    """Stitch a level back together (test/inspection helper)."""
    w, h = pyramid.levels[level]
    gx, gy = pyramid.grid(level)
    shape = (h, w) if pyramid.channels == 1 else (h, w, pyramid.channels)
    out = np.zeros(shape, dtype=np.uint8)
    for ty in range(gy):
        for tx in range(gx):
            t = tile(pyramid, level, tx, ty)
            out[ty * TILE_SIZE:ty * TILE_SIZE + t.shape[0],
                tx * TILE_SIZE:tx * TILE_SIZE + t.shape[1]] = t
    return out


# ---------------------------------------------------------------------------
# Stream synchronization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StreamInfo:
    role: str
    start_time: float
    rate_hz: float
    dims: tuple[int, int]           # (w, h)
    path: str                       # bundle-relative artifact path
    count: int | None = None        # frame count for frame-directory streams

    def __post_init__(self) -> None:
        if self.role not in STREAM_ROLES:
            raise SessionFormatError(f"unknown stream role {self.role!r}")
        if self.rate_hz <= 0:
            raise SessionFormatError(f"stream {self.role}: rate must be > 0")

    @property
    def extent(self) -> int:
        """Number of addressable positions: frames, or mosaic columns."""
        return self.count if self.count is not None else self.dims[0]


@dataclass
class SyncModel:
    streams: dict[str, StreamInfo]

    def time_to_position(self, role: str, t: float) -> int:
        """Column or frame index for stream time t (seconds)."""
        info = self.streams.get(role)
        if info is None:
            raise SessionFormatError(f"no stream with role {role!r}")
        if t < info.start_time:
            raise ValueError(f"t={t} precedes stream start {info.start_time}")
        idx = int(np.floor((t - info.start_time) * info.rate_hz))
        return min(idx, info.extent - 1)

    def duration(self) -> float:
        """Latest stream end time across the session."""
        return max(s.start_time + s.extent / s.rate_hz
                   for s in self.streams.values())


def time_to_position(sync: SyncModel, role: str, t: float) -> int:
    return sync.time_to_position(role, t)


# ---------------------------------------------------------------------------
# Manifest persistence
# ---------------------------------------------------------------------------

@dataclass
class SessionManifest:
    session_id: str
    created: float
    streams: dict[str, StreamInfo]
    detections: dict[str, str] = field(default_factory=dict)
    pyramids: dict[str, str] = field(default_factory=dict)
    version: str = MANIFEST_VERSION

    def sync_model(self) -> SyncModel:
        return SyncModel(streams=self.streams)

    def to_json(self) -> str:
        doc = {
            "version": self.version,
            "session_id": self.session_id,
            "created": self.created,
            "streams": {r: asdict(s) for r, s in sorted(self.streams.items())},
            "detections": dict(sorted(self.detections.items())),
            "pyramids": dict(sorted(self.pyramids.items())),
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def session_dir(root: str | Path, session_id: str) -> Path:
    return Path(root) / session_id


def save_session(manifest: SessionManifest, root: str | Path) -> Path:
    """Write the manifest into its bundle directory; every referenced
    artifact must already exist there."""
    bundle = session_dir(root, manifest.session_id)
    bundle.mkdir(parents=True, exist_ok=True)
    _validate_paths(manifest, bundle)
    (bundle / "manifest.json").write_text(manifest.to_json())
    return bundle


def _validate_paths(manifest: SessionManifest, bundle: Path) -> None:
    for info in manifest.streams.values():
        if not (bundle / info.path).exists():
            raise SessionFormatError(
                f"stream {info.role}: missing artifact {bundle / info.path}")
    for name, rel in manifest.detections.items():
        if not (bundle / rel).exists():
            raise SessionFormatError(
                f"detection {name}: missing document {bundle / rel}")
    for role, rel in manifest.pyramids.items():
        if not (bundle / rel / "pyramid.json").exists():
            raise SessionFormatError(
                f"pyramid {role}: missing tile directory {bundle / rel}")


def load_session(root: str | Path, session_id: str) -> SessionManifest:
    bundle = session_dir(root, session_id)
    path = bundle / "manifest.json"
    if not path.exists():
        raise SessionFormatError(f"no manifest at {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SessionFormatError(f"malformed manifest {path}: {exc}") from exc
    if doc.get("version") != MANIFEST_VERSION:
        raise SessionFormatError(
            f"manifest version {doc.get('version')!r}, expected {MANIFEST_VERSION!r}")
    streams = {}
    for role, s in doc["streams"].items():
        streams[role] = StreamInfo(role=s["role"], start_time=s["start_time"],
                                   rate_hz=s["rate_hz"], dims=tuple(s["dims"]),
                                   path=s["path"], count=s.get("count"))
    manifest = SessionManifest(session_id=doc["session_id"], created=doc["created"],
                               streams=streams, detections=doc["detections"],
                               pyramids=doc["pyramids"], version=doc["version"])
    _validate_paths(manifest, bundle)
    return manifest


def list_sessions(root: str | Path) -> list[SessionManifest]:
    """All loadable sessions under a root, ordered by creation time."""
    root = Path(root)
    manifests = []
    if root.exists():
        for child in root.iterdir():
            if (child / "manifest.json").exists():
                manifests.append(load_session(root, child.name))
    manifests.sort(key=lambda m: (m.created, m.session_id))
    return manifests
