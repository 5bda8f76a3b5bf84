"""Wagon identifier segmentation.

Locates the 12-character identifier painted on a wagon side inside a huge
line-scan mosaic: edge-based blob extraction, sliding-window RANSAC line
voting over blob bottom-right corners, exponential alignment weighting of
the votes, and a final crop around the surviving character regions.

Very wide mosaics are processed in overlapping vertical strips so float
intermediates never cover the whole image at once; results are identical
to whole-image processing as long as no connected structure, edge chain or
hole is wider than the strip overlap.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

import numpy as np

from .imgcore import (
    BBox,
    BinaryImage,
    GrayImage,
    LabeledComponents,
    canny_edges,
    connected_components,
    dilate_disk,
    fill_holes,
    otsu_threshold,
)


class SegmentationError(Exception):
    code = "segmentation_error"


class NoCandidatesError(SegmentationError):
    """No component received a single vote."""
    code = "no_candidates"


class LowConfidenceError(SegmentationError):
    """Fewer character regions survived than a plausible identifier has."""
    code = "low_confidence"


@dataclass(frozen=True)
class SegmentationParams:
    r_d: int = 3                    # dilation radius
    d: int = 512                    # sliding sub-window side
    s: int = 128                    # sliding step
    ransac_iters: int = 200
    ransac_inlier_tol: float = 5.0
    min_window_points: int = 5
    top_k: int = 20                 # regions kept for alignment weighting
    min_component_area: int = 20    # noise gate, pixels
    max_component_height_frac: float = 0.25
    min_char_boxes: int = 6         # below this the ID is implausible

    def __post_init__(self) -> None:
        if self.d <= 0 or not (0 < self.s <= self.d):
            raise ValueError(f"need 0 < s <= d, got s={self.s} d={self.d}")
        if self.ransac_inlier_tol <= 0:
            raise ValueError("ransac_inlier_tol must be > 0")
        if self.top_k < 2:
            raise ValueError("top_k must be >= 2")
        if self.r_d < 0:
            raise ValueError("r_d must be >= 0")


@dataclass
class VoteVector:
    votes: np.ndarray                      # per-component window-inlier counts
    weighted: np.ndarray | None = None     # filled by weight_votes

    @property
    def count(self) -> int:
        return len(self.votes)


@dataclass
class IdSegmentation:
    id_box: BBox
    char_boxes: list[BBox]
    votes: VoteVector
    fitted_line: tuple[float, float]       # (slope, intercept), y = m*x + b


def select_cc(components: LabeledComponents, j: int, k: int, d: int) -> np.ndarray:
    """Indices of components whose bottom-right corner lies in the half-open
    window [j, j+d) x [k, k+d)."""
    if not components.boxes:
        return np.zeros(0, dtype=np.int64)
    corners = np.array([b.bottom_right for b in components.boxes], dtype=np.int64)
    inside = ((corners[:, 0] >= j) & (corners[:, 0] < j + d)
              & (corners[:, 1] >= k) & (corners[:, 1] < k + d))
    return np.nonzero(inside)[0]


def _point_line_distances(points: np.ndarray, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    d = q - p
    norm = float(np.hypot(d[0], d[1]))
    if norm == 0.0:
        return np.hypot(points[:, 0] - p[0], points[:, 1] - p[1])
    return np.abs(d[0] * (points[:, 1] - p[1]) - d[1] * (points[:, 0] - p[0])) / norm


def ransac_fit_line(points: np.ndarray, iters: int, tol: float,
                    rng_seed: int) -> np.ndarray:
    """Largest set of points within perpendicular distance `tol` of a
    two-point candidate line, sampled `iters` times.

    Deterministic given the seed; ties broken by the first-found candidate.
    A degenerate sample (two equal points) measures plain Euclidean distance
    to the point, so an all-identical input yields all inliers.  Fewer than
    two points yield an empty set.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    if n < 2:
        return np.zeros(0, dtype=np.int64)
    rng = np.random.default_rng(np.random.PCG64(rng_seed))
    pairs = rng.integers(0, n, size=(iters, 2))

    p = pts[pairs[:, 0]]                       # (iters, 2)
    dvec = pts[pairs[:, 1]] - p
    norms = np.hypot(dvec[:, 0], dvec[:, 1])   # (iters,)
    dx = pts[None, :, 0] - p[:, 0, None]
    dy = pts[None, :, 1] - p[:, 1, None]
    cross = np.abs(dvec[:, 0, None] * dy - dvec[:, 1, None] * dx)
    with np.errstate(divide="ignore", invalid="ignore"):
        dist = cross / norms[:, None]
    degenerate = norms == 0.0
    if degenerate.any():
        dist[degenerate] = np.hypot(dx[degenerate], dy[degenerate])

    counts = (dist <= tol).sum(axis=1)
    best = int(np.argmax(counts))              # first max wins
    return np.nonzero(dist[best] <= tol)[0].astype(np.int64)


def _window_seed(rng_seed: int, rel_points: np.ndarray) -> int:
    """Seed derived from window-relative point geometry.

    Tying the stream to relative coordinates (not the window index) makes
    the sweep translation-equivariant: a window seeing the same geometry
    anywhere in the image samples the same candidates.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(int(rng_seed).to_bytes(8, "little", signed=True))
    h.update(np.ascontiguousarray(rel_points, dtype="<i8").tobytes())
    return int.from_bytes(h.digest(), "little")


def vote_sweep(components: LabeledComponents, image_dims: tuple[int, int],
               params: SegmentationParams, rng_seed: int,
               eligible: np.ndarray | None = None) -> VoteVector:
    """Accumulate one vote per window per RANSAC line inlier.

    Windows of side d slide with step s over [0, w] x [0, h] (inclusive,
    mirroring the sweep loops); windows holding fewer than
    min_window_points corners contribute nothing.  `eligible` optionally
    restricts which components may vote (size-gated callers); the returned
    vector is always indexed over all components.
    """
    w, h = image_dims
    votes = np.zeros(components.count, dtype=np.int64)
    if components.count == 0:
        return VoteVector(votes=votes)
    idx = (np.arange(components.count, dtype=np.int64)
           if eligible is None else np.asarray(eligible, dtype=np.int64))
    if len(idx) == 0:
        return VoteVector(votes=votes)
    corners = np.array([components.boxes[i].bottom_right for i in idx],
                       dtype=np.int64)

    d, s = params.d, params.s
    for j in range(0, w + 1, s):
        jmask = (corners[:, 0] >= j) & (corners[:, 0] < j + d)
        if jmask.sum() < params.min_window_points:
            continue
        sub_j = np.nonzero(jmask)[0]
        ys = corners[sub_j, 1]
        for k in range(0, h + 1, s):
            kmask = (ys >= k) & (ys < k + d)
            if kmask.sum() < params.min_window_points:
                continue
            sub = sub_j[kmask]
            pts = corners[sub]
            rel = pts - np.array([j, k], dtype=np.int64)
            order = np.lexsort((rel[:, 1], rel[:, 0]))
            seed = _window_seed(rng_seed, rel[order])
            inl = ransac_fit_line(rel[order].astype(np.float64),
                                  params.ransac_iters,
                                  params.ransac_inlier_tol, seed)
            votes[idx[sub[order[inl]]]] += 1
    return VoteVector(votes=votes)


def weight_votes(components: LabeledComponents, votes: VoteVector, top_k: int,
                 image_dims: tuple[int, int]) -> VoteVector:
    """Weight raw votes by alignment with the top-k set.

    The top_k voted components (ranked by vote, ties by larger area, then
    leftmost) are kept; each gets weighted = (exp(-D_x) + exp(-D_y)) *
    votes where D_x, D_y are that component's bottom-right-corner
    deviations from the selected set's median corner, normalized by the
    image dimensions.  Everything else gets weighted 0; components without
    a vote never enter the selection, so they cannot skew the median.
    """
    if votes.count == 0 or not (votes.votes > 0).any():
        raise NoCandidatesError("no component received any vote")
    w, h = image_dims
    areas = np.asarray(components.areas, dtype=np.int64)
    xs = np.array([b.x for b in components.boxes], dtype=np.int64)
    voted = np.nonzero(votes.votes > 0)[0]
    order = voted[np.lexsort((xs[voted], -areas[voted], -votes.votes[voted]))]
    selected = order[:top_k]

    corners = np.array([components.boxes[i].bottom_right for i in selected],
                       dtype=np.float64)
    med = np.median(corners, axis=0)
    d_x = np.abs(corners[:, 0] - med[0]) / w
    d_y = np.abs(corners[:, 1] - med[1]) / h
    weighted = np.zeros(votes.count, dtype=np.float64)
    weighted[selected] = (np.exp(-d_x) + np.exp(-d_y)) * votes.votes[selected]
    return VoteVector(votes=votes.votes.copy(), weighted=weighted)


# ---------------------------------------------------------------------------
# Whole-image / strip-wise preprocessing
# ---------------------------------------------------------------------------

# Spatial reach of the local pixel operators (Gaussian tail + Sobel + NMS),
# before dilation is added on top.
_FILTER_HALO = 16


@dataclass
class _StripComponent:
    box: BBox
    area: int
    first_pixel: tuple[int, int]   # (y, x) of first raster-order pixel


def _preprocess_region(sub: np.ndarray, t_high: float, r_d: int) -> BinaryImage:
    edges = canny_edges(GrayImage(sub), t_high, 0.5 * t_high)
    return fill_holes(dilate_disk(edges, r_d))


def _component_records(filled: BinaryImage, x_offset: int) -> list[_StripComponent]:
    cc = connected_components(filled)
    out = []
    for i, box in enumerate(cc.boxes, start=1):
        row = cc.labels[box.y, box.x:box.x2]
        fx = box.x + int(np.argmax(row == i))
        out.append(_StripComponent(
            box=BBox(box.x + x_offset, box.y, box.w, box.h),
            area=int(cc.areas[i - 1]),
            first_pixel=(box.y, fx + x_offset)))
    return out


def extract_id_components(img: GrayImage, params: SegmentationParams,
                          strip_width: int | None = None) -> LabeledComponents:
    """Edge/dilate/fill/label preprocessing, optionally in vertical strips.

    Strips overlap by max(2*d, 2*halo) columns; a component is kept by the
    first strip that contains it away from interior strip edges, so the
    merged list matches whole-image processing whenever structures are
    narrower than the overlap.  The returned LabeledComponents carries no
    pixel label map in strip mode (boxes and areas only), which is all the
    voting stages consume.
    """
    t_high = float(otsu_threshold(img).threshold)
    w = img.width
    halo = _FILTER_HALO + params.r_d

    if strip_width is None or strip_width >= w:
        filled = _preprocess_region(img.data, t_high, params.r_d)
        return connected_components(filled)

    overlap = max(2 * params.d, 2 * halo)
    if strip_width <= overlap:
        raise ValueError(f"strip_width {strip_width} must exceed overlap {overlap}")
    step = strip_width - overlap

    merged: dict[tuple[int, int, int, int, int], _StripComponent] = {}
    start = 0
    while True:
        end = min(w, start + strip_width)
        lo = max(0, start - halo)
        hi = min(w, end + halo)
        filled = _preprocess_region(img.data[:, lo:hi], t_high, params.r_d)
        mask = filled.mask[:, start - lo:end - lo]
        for rec in _component_records(BinaryImage(mask), start):
            touches_left = start > 0 and rec.box.x == start
            touches_right = end < w and rec.box.x2 == end
            if touches_left or touches_right:
                continue
            key = (rec.box.x, rec.box.y, rec.box.w, rec.box.h, rec.area)
            merged.setdefault(key, rec)
        if end >= w:
            break
        start += step

    recs = sorted(merged.values(), key=lambda r: r.first_pixel)
    return LabeledComponents(
        labels=np.zeros((0, 0), dtype=np.int32),
        boxes=[r.box for r in recs],
        areas=np.array([r.area for r in recs], dtype=np.int64))


def _gate_components(components: LabeledComponents, image_h: int,
                     params: SegmentationParams) -> np.ndarray:
    """Indices allowed to vote: drops specks and towering structures."""
    keep = []
    max_h = params.max_component_height_frac * image_h
    for i, box in enumerate(components.boxes):
        if components.areas[i] < params.min_component_area:
            continue
        if box.h > max_h:
            continue
        keep.append(i)
    return np.array(keep, dtype=np.int64)


def segment_wagon_id(img: GrayImage, params: SegmentationParams, rng_seed: int,
                     strip_width: int | None = None) -> IdSegmentation:
    """Full identifier segmentation over a side-view mosaic.

    Raises NoCandidatesError when voting finds nothing and
    LowConfidenceError when fewer than params.min_char_boxes regions
    survive the weighting.
    """
    components = extract_id_components(img, params, strip_width=strip_width)
    eligible = _gate_components(components, img.height, params)
    votes = vote_sweep(components, (img.width, img.height), params, rng_seed,
                       eligible=eligible)
    weighted = weight_votes(components, votes, params.top_k,
                            (img.width, img.height))

    chosen = np.nonzero(weighted.weighted > 0)[0]
    if len(chosen) < params.min_char_boxes:
        raise LowConfidenceError(
            f"only {len(chosen)} character regions survived "
            f"(need >= {params.min_char_boxes})")
    char_boxes = sorted((components.boxes[i] for i in chosen), key=lambda b: b.x)

    x1 = max(0, min(b.x for b in char_boxes) - params.r_d)
    y1 = max(0, min(b.y for b in char_boxes) - params.r_d)
    x2 = min(img.width, max(b.x2 for b in char_boxes) + params.r_d)
    y2 = min(img.height, max(b.y2 for b in char_boxes) + params.r_d)
    id_box = BBox(x1, y1, x2 - x1, y2 - y1)

    corners = np.array([b.bottom_right for b in char_boxes], dtype=np.float64)
    if np.ptp(corners[:, 0]) == 0:
        slope, intercept = 0.0, float(corners[:, 1].mean())
    else:
        slope, intercept = np.polyfit(corners[:, 0], corners[:, 1], 1)
    return IdSegmentation(id_box=id_box, char_boxes=char_boxes, votes=weighted,
                          fitted_line=(float(slope), float(intercept)))


# ---------------------------------------------------------------------------
# Evaluation harness
# ---------------------------------------------------------------------------

@dataclass
class MetricRow:
    tp: int = 0
    fn: int = 0
    fp: int = 0

    @property
    def accuracy(self) -> float:
        total = self.tp + self.fn
        return 100.0 * self.tp / total if total else 0.0

    @property
    def fn_rate(self) -> float:
        total = self.tp + self.fn
        return 100.0 * self.fn / total if total else 0.0

    @property
    def fp_rate(self) -> float:
        total = self.tp + self.fn
        return 100.0 * self.fp / total if total else 0.0

    def add(self, other: "MetricRow") -> None:
        self.tp += other.tp
        self.fn += other.fn
        self.fp += other.fp


@dataclass
class SegmentationMetrics:
    per_image_char: list[MetricRow] = field(default_factory=list)
    per_image_full: list[MetricRow] = field(default_factory=list)
    char: MetricRow = field(default_factory=MetricRow)
    full_id: MetricRow = field(default_factory=MetricRow)


def _image_metrics(regions: list[BBox], glyphs: list[BBox]) -> tuple[MetricRow, MetricRow]:
    covered = [False] * len(glyphs)
    char = MetricRow()
    empty_regions = 0
    for r in regions:
        inside = [gi for gi, g in enumerate(glyphs) if r.contains_box(g)]
        if inside:
            char.tp += 1
            char.fn += len(inside) - 1      # merged extras count as misses
            for gi in inside:
                covered[gi] = True
        else:
            char.fp += 1
            empty_regions += 1
    char.fn += covered.count(False)

    full = MetricRow(fp=empty_regions)
    if glyphs and all(covered):
        full.tp = 1
    else:
        full.fn = 1
    return char, full


def evaluate_segmentation(predictions: list[IdSegmentation | None],
                          ground_truth: list[list[BBox]]) -> SegmentationMetrics:
    """Character-level and full-ID counts.

    A detected region containing at least one truth glyph is a character
    true positive; a region containing none is a false positive; a glyph
    inside no region is a false negative, and a region merging k glyphs
    adds k-1 false negatives.  Full-ID: an image is a true positive iff
    every glyph is covered.  Rates are percentages of TP+FN.
    """
    if len(predictions) != len(ground_truth):
        raise ValueError(f"{len(predictions)} predictions vs "
                         f"{len(ground_truth)} ground-truth entries")
    metrics = SegmentationMetrics()
    for pred, glyphs in zip(predictions, ground_truth):
        regions = pred.char_boxes if pred is not None else []
        char, full = _image_metrics(regions, glyphs)
        metrics.per_image_char.append(char)
        metrics.per_image_full.append(full)
        metrics.char.add(char)
        metrics.full_id.add(full)
    return metrics


def default_params(**overrides) -> SegmentationParams:
    return replace(SegmentationParams(), **overrides)
