"""Pantograph detection in roof-view mosaics.

Offline, a feature model is built from an apparatus template: keypoints,
unit-norm descriptors and a 2-NN index.  Online, scene descriptors are
matched against the template under the nearest-neighbor ratio test, a
projective model is fitted with RANSAC, and a geometric consistency check
accepts or rejects the estimated homography.  Wide mosaics are scanned in
overlapping windows of twice the template width.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .imgcore import BBox, GrayImage
from .sift import DESCRIPTOR_DIM, Keypoint, SiftConfig, extract_features

RATIO_TEST_DEFAULT = 0.67     # d1/d2 acceptance bound


class ModelFormatError(ValueError):
    """Malformed feature-model payload."""


class InsufficientMatchesError(ValueError):
    """Fewer than four matches; no projective fit possible."""


@dataclass
class FeatureModel:
    """Template keypoints, descriptors and their 2-NN index.

    The index (scipy cKDTree) answers exact nearest neighbors; `eps` may
    relax it to approximate search online.  Ties are re-sorted by corpus
    index so query results do not depend on tree internals.
    """

    template_w: int
    template_h: int
    keypoints: list[Keypoint]
    descriptors: np.ndarray
    _tree: cKDTree | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        d = np.asarray(self.descriptors, dtype=np.float32)
        if d.ndim != 2 or d.shape[1] != DESCRIPTOR_DIM:
            raise ModelFormatError(f"descriptors must be (n, {DESCRIPTOR_DIM})")
        if len(self.keypoints) != len(d):
            raise ModelFormatError("keypoint/descriptor count mismatch")
        self.descriptors = d

    @property
    def count(self) -> int:
        return len(self.keypoints)

    def tree(self) -> cKDTree:
        if self._tree is None:
            self._tree = cKDTree(self.descriptors.astype(np.float64))
        return self._tree

    def query_2nn(self, queries: np.ndarray,
                  eps: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
        """Two nearest template descriptors per query row.

        Returns (distances, indices), each (n, 2); equal distances are
        ordered by ascending index.  eps=0 is exact.
        """
        q = np.asarray(queries, dtype=np.float64)
        if q.ndim != 2 or q.shape[1] != DESCRIPTOR_DIM:
            raise ModelFormatError(f"queries must be (n, {DESCRIPTOR_DIM})")
        k = min(4, self.count)
        dist, idx = self.tree().query(q, k=k, eps=eps)
        dist = np.atleast_2d(dist)
        idx = np.atleast_2d(idx)
        order = np.lexsort((idx, dist), axis=1)
        rows = np.arange(len(q))[:, None]
        dist, idx = dist[rows, order], idx[rows, order]
        return dist[:, :2], idx[:, :2]


def build_index(keypoints: list[Keypoint], descriptors: np.ndarray,
                template_dims: tuple[int, int]) -> FeatureModel:
    if len(descriptors) < 2:
        raise ModelFormatError("need at least 2 descriptors to build an index")
    return FeatureModel(template_w=template_dims[0], template_h=template_dims[1],
                        keypoints=list(keypoints),
                        descriptors=np.asarray(descriptors, dtype=np.float32))


def build_model(template: GrayImage,
                sift_cfg: SiftConfig = SiftConfig()) -> FeatureModel:
    """Offline phase: extract template features and index them."""
    kps, descs = extract_features(template, sift_cfg)
    return build_index(kps, descs, (template.width, template.height))


@dataclass
class MatchSet:
    """Ratio-test survivors: scene descriptor -> best template descriptor."""

    template_idx: np.ndarray      # (n,) int
    scene_idx: np.ndarray         # (n,) int
    d1: np.ndarray                # (n,) nearest distance
    d2: np.ndarray                # (n,) second distance

    def __len__(self) -> int:
        return len(self.template_idx)


def match_descriptors(model: FeatureModel, scene_descriptors: np.ndarray,
                      tau_d: float = RATIO_TEST_DEFAULT,
                      eps: float = 0.0) -> MatchSet:
    """Keep each scene descriptor's nearest template neighbor iff
    d1/d2 <= tau_d; a zero second distance (exact duplicates) passes."""
    if not (0 < tau_d <= 1):
        raise ValueError(f"tau_d must be in (0, 1], got {tau_d}")
    if len(scene_descriptors) == 0:
        empty = np.zeros(0, dtype=np.int64)
        return MatchSet(empty, empty, empty.astype(float), empty.astype(float))
    dist, idx = model.query_2nn(scene_descriptors, eps=eps)
    keep = (dist[:, 0] <= tau_d * dist[:, 1]) | (dist[:, 1] == 0.0)
    rows = np.nonzero(keep)[0]
    return MatchSet(template_idx=idx[rows, 0].astype(np.int64),
                    scene_idx=rows.astype(np.int64),
                    d1=dist[rows, 0], d2=dist[rows, 1])


# ---------------------------------------------------------------------------
# Homography estimation
# ---------------------------------------------------------------------------

def _normalize_points(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    mean_dist = np.hypot(centered[:, 0], centered[:, 1]).mean()
    scale = np.sqrt(2.0) / mean_dist if mean_dist > 1e-12 else 1.0
    t_mat = np.array([[scale, 0, -scale * centroid[0]],
                      [0, scale, -scale * centroid[1]],
                      [0, 0, 1.0]])
    return centered * scale, t_mat


def estimate_homography(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Normalized DLT: least-squares homography mapping src -> dst.

    Raises np.linalg.LinAlgError on degenerate input; the result always
    has h33 == 1.
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    sp, t_src = _normalize_points(src)
    dp, t_dst = _normalize_points(dst)
    n = len(src)
    a = np.zeros((2 * n, 9))
    a[0::2, 0] = -sp[:, 0]
    a[0::2, 1] = -sp[:, 1]
    a[0::2, 2] = -1.0
    a[0::2, 6] = sp[:, 0] * dp[:, 0]
    a[0::2, 7] = sp[:, 1] * dp[:, 0]
    a[0::2, 8] = dp[:, 0]
    a[1::2, 3] = -sp[:, 0]
    a[1::2, 4] = -sp[:, 1]
    a[1::2, 5] = -1.0
    a[1::2, 6] = sp[:, 0] * dp[:, 1]
    a[1::2, 7] = sp[:, 1] * dp[:, 1]
    a[1::2, 8] = dp[:, 1]
    _, _, vt = np.linalg.svd(a)
    h_norm = vt[-1].reshape(3, 3)
    h_mat = np.linalg.inv(t_dst) @ h_norm @ t_src
    if abs(h_mat[2, 2]) < 1e-12:
        raise np.linalg.LinAlgError("degenerate homography (h33 ~ 0)")
    return h_mat / h_mat[2, 2]


def project_points(h_mat: np.ndarray, pts: np.ndarray) -> np.ndarray:
    homo = np.column_stack([pts, np.ones(len(pts))]) @ h_mat.T
    with np.errstate(divide="ignore", invalid="ignore"):
        # points sent to infinity by a degenerate hypothesis come back as
        # inf/nan and fail every <= tol comparison downstream
        return homo[:, :2] / homo[:, 2:3]


def _any_collinear(pts: np.ndarray, tol: float = 1e-9) -> bool:
    for skip in range(4):
        tri = np.delete(pts, skip, axis=0)
        area2 = abs((tri[1, 0] - tri[0, 0]) * (tri[2, 1] - tri[0, 1])
                    - (tri[1, 1] - tri[0, 1]) * (tri[2, 0] - tri[0, 0]))
        span = max(np.ptp(tri[:, 0]), np.ptp(tri[:, 1]), 1.0)
        if area2 <= tol * span * span:
            return True
    return False


def ransac_fit_projective(template_pts: np.ndarray, scene_pts: np.ndarray,
                          iters: int, tol: float,
                          rng_seed: int) -> tuple[np.ndarray, np.ndarray]:
    """RANSAC over 4-point homography hypotheses.

    Returns (H, inlier indices) where inliers are matches with
    reprojection error <= tol under the best-count hypothesis (ties by
    first-found) and H is re-estimated from those inliers by normalized
    DLT.  Deterministic for a fixed seed.
    """
    template_pts = np.asarray(template_pts, dtype=np.float64)
    scene_pts = np.asarray(scene_pts, dtype=np.float64)
    n = len(template_pts)
    if n < 4:
        raise InsufficientMatchesError(f"{n} matches; homography needs 4")
    rng = np.random.default_rng(np.random.PCG64(rng_seed))

    best_count = 0
    best_inliers: np.ndarray | None = None
    for _ in range(iters):
        sample = rng.choice(n, size=4, replace=False)
        if _any_collinear(template_pts[sample]):
            continue
        try:
            h_mat = estimate_homography(template_pts[sample], scene_pts[sample])
        except np.linalg.LinAlgError:
            continue
        err = np.hypot(*(project_points(h_mat, template_pts) - scene_pts).T)
        inl = err <= tol
        count = int(inl.sum())
        if count > best_count:
            best_count = count
            best_inliers = np.nonzero(inl)[0]
    if best_inliers is None or best_count < 4:
        raise InsufficientMatchesError("no non-degenerate hypothesis found")

    h_final = estimate_homography(template_pts[best_inliers],
                                  scene_pts[best_inliers])
    return h_final, best_inliers


# ---------------------------------------------------------------------------
# Geometric consistency
# ---------------------------------------------------------------------------

def _quad_cross_products(quad: np.ndarray) -> np.ndarray:
    out = np.empty(4)
    for i in range(4):
        a = quad[(i + 1) % 4] - quad[i]
        b = quad[(i + 2) % 4] - quad[(i + 1) % 4]
        out[i] = a[0] * b[1] - a[1] * b[0]
    return out


def check_geom_consistency(h_mat: np.ndarray, inlier_count: int,
                           template_dims: tuple[int, int],
                           scene_dims: tuple[int, int],
                           min_inliers: int = 8) -> tuple[bool, BBox | None]:
    """Accept the homography iff the warped template quadrilateral is
    plausible: enough inliers, convex with preserved winding (no
    reflection or fold-over), area ratio within [0.25, 4], and all corners
    inside the scene extended by a 10% margin.  On accept, returns the
    axis-aligned bound of the warped corners clipped to the scene."""
    tw, th = template_dims
    sw, sh = scene_dims
    if inlier_count < min_inliers:
        return False, None
    corners = np.array([[0, 0], [tw, 0], [tw, th], [0, th]], dtype=np.float64)
    warped = project_points(h_mat, corners)

    cross = _quad_cross_products(warped)
    if not (cross > 0).all():          # template winding is all-positive
        return False, None
    area = 0.5 * abs(sum(warped[i, 0] * warped[(i + 1) % 4, 1]
                         - warped[(i + 1) % 4, 0] * warped[i, 1]
                         for i in range(4)))
    ratio = area / (tw * th)
    if not (0.25 <= ratio <= 4.0):
        return False, None
    mx, my = 0.10 * sw, 0.10 * sh
    if (warped[:, 0] < -mx).any() or (warped[:, 0] > sw + mx).any() \
            or (warped[:, 1] < -my).any() or (warped[:, 1] > sh + my).any():
        return False, None

    x0 = max(0.0, warped[:, 0].min())
    y0 = max(0.0, warped[:, 1].min())
    x1 = min(float(sw), warped[:, 0].max())
    y1 = min(float(sh), warped[:, 1].max())
    if x1 <= x0 or y1 <= y0:
        return False, None
    bbox = BBox(int(np.floor(x0)), int(np.floor(y0)),
                max(1, int(np.ceil(x1 - x0))), max(1, int(np.ceil(y1 - y0))))
    return True, bbox


# ---------------------------------------------------------------------------
# End-to-end detection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DetectorConfig:
    tau_d: float = RATIO_TEST_DEFAULT
    ransac_iters: int = 1000
    ransac_tol: float = 3.0
    min_inliers: int = 8
    index_eps: float = 0.0          # 0 = exact nearest neighbors
    sift: SiftConfig = SiftConfig()


@dataclass
class PantographDetection:
    found: bool
    homography: np.ndarray | None = None    # template -> scene, h33 == 1
    inlier_count: int = 0
    p_bbox: BBox | None = None
    window_x0: int = 0


def _windows(scene_w: int, window_w: int, stride: int) -> list[int]:
    if scene_w <= window_w:
        return [0]
    starts = list(range(0, scene_w - window_w + 1, stride))
    if starts[-1] + window_w < scene_w:
        starts.append(scene_w - window_w)
    return starts


def detect_pantograph(scene: GrayImage, model: FeatureModel,
                      config: DetectorConfig = DetectorConfig(),
                      rng_seed: int = 0) -> PantographDetection:
    """Scan the mosaic in overlapping windows of twice the template width
    (50% stride); the accepted window with the most inliers wins, ties by
    leftmost.  A plain no-detection is a result, never an error."""
    window_w = 2 * model.template_w
    best = PantographDetection(found=False)
    for x0 in _windows(scene.width, window_w, window_w // 2):
        sub = GrayImage(scene.data[:, x0:x0 + window_w])
        kps, descs = extract_features(sub, config.sift)
        if len(descs) == 0:
            continue
        matches = match_descriptors(model, descs, config.tau_d,
                                    eps=config.index_eps)
        if len(matches) < 4:
            continue
        t_pts = np.array([[model.keypoints[i].x, model.keypoints[i].y]
                          for i in matches.template_idx])
        s_pts = np.array([[kps[i].x, kps[i].y] for i in matches.scene_idx])
        try:
            h_mat, inliers = ransac_fit_projective(
                t_pts, s_pts, config.ransac_iters, config.ransac_tol, rng_seed)
        except (InsufficientMatchesError, np.linalg.LinAlgError):
            continue
        shift = np.array([[1, 0, x0], [0, 1, 0], [0, 0, 1.0]])
        h_global = shift @ h_mat
        accepted, bbox = check_geom_consistency(
            h_global, len(inliers), (model.template_w, model.template_h),
            (scene.width, scene.height), config.min_inliers)
        if accepted and len(inliers) > best.inlier_count:
            best = PantographDetection(found=True, homography=h_global,
                                       inlier_count=len(inliers),
                                       p_bbox=bbox, window_x0=x0)
    return best


# ---------------------------------------------------------------------------
# Model persistence: PGFM1
# ---------------------------------------------------------------------------

_MODEL_MAGIC = b"PGFM1\n"


def save_model(model: FeatureModel, path: str | Path) -> None:
    header = _MODEL_MAGIC + (
        f"{model.count} {model.template_w} {model.template_h}\n".encode())
    kp = np.array([[k.x, k.y, k.scale, k.orientation] for k in model.keypoints],
                  dtype="<f4")
    Path(path).write_bytes(header + kp.tobytes()
                           + model.descriptors.astype("<f4").tobytes())


def load_model(path: str | Path) -> FeatureModel:
    data = Path(path).read_bytes()
    if not data.startswith(_MODEL_MAGIC):
        raise ModelFormatError("not a PGFM1 model file")
    nl = data.index(b"\n", len(_MODEL_MAGIC))
    try:
        n, tw, th = (int(v) for v in data[len(_MODEL_MAGIC):nl].split())
    except ValueError as exc:
        raise ModelFormatError("bad model header") from exc
    offset = nl + 1
    kp_bytes = 16 * n
    if len(data) < offset + kp_bytes + 4 * DESCRIPTOR_DIM * n:
        raise ModelFormatError("truncated model payload")
    kp = np.frombuffer(data, dtype="<f4", count=4 * n, offset=offset).reshape(n, 4)
    descs = np.frombuffer(data, dtype="<f4", count=DESCRIPTOR_DIM * n,
                          offset=offset + kp_bytes).reshape(n, DESCRIPTOR_DIM)
    kps = [Keypoint(x=float(r[0]), y=float(r[1]), scale=float(r[2]),
                    orientation=float(r[3])) for r in kp]
    return FeatureModel(template_w=tw, template_h=th, keypoints=kps,
                        descriptors=descs.copy())
