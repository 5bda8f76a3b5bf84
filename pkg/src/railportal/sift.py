"""Scale-invariant keypoint detection and description.

Difference-of-Gaussians extrema over a Gaussian scale-space pyramid with
sub-pixel refinement, gradient-histogram orientation assignment and the
classic 4x4x8 gradient-orientation descriptor (128 dimensions, normalized,
clipped at 0.2, renormalized to unit length).  Everything is plain numpy
and deterministic for a fixed input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .imgcore import GrayImage

MIN_IMAGE_SIDE = 32
DESCRIPTOR_DIM = 128


class ImageTooSmallError(ValueError):
    pass


@dataclass(frozen=True)
class SiftConfig:
    n_octaves: int = 3
    scales_per_octave: int = 3
    sigma0: float = 1.6
    assumed_blur: float = 0.5      # blur already present in the input
    contrast_threshold: float = 0.03
    edge_ratio: float = 10.0
    descriptor_clip: float = 0.2


@dataclass(frozen=True)
class Keypoint:
    x: float            # sub-pixel column in input-image coordinates
    y: float            # sub-pixel row
    scale: float        # blur sigma in input-image pixels
    orientation: float  # radians in [0, 2*pi)


def _gaussian_pyramid(base: np.ndarray, cfg: SiftConfig) -> list[list[np.ndarray]]:
    s = cfg.scales_per_octave
    k = 2.0 ** (1.0 / s)
    # incremental blurs within an octave: level i has total blur sigma0*k^i
    inc = [cfg.sigma0 * (k ** i) * np.sqrt(k * k - 1.0) / k for i in range(1, s + 3)]

    first = ndimage.gaussian_filter(
        base, np.sqrt(max(cfg.sigma0 ** 2 - cfg.assumed_blur ** 2, 0.01)),
        mode="nearest")
    octaves = []
    current = first
    for _ in range(cfg.n_octaves):
        levels = [current]
        for sig in inc:
            levels.append(ndimage.gaussian_filter(levels[-1], sig, mode="nearest"))
        octaves.append(levels)
        nxt = levels[s][::2, ::2]
        if min(nxt.shape) < 16:
            break
        current = nxt
    return octaves


def _quadratic_refine(dog: np.ndarray, lvl: int, r: int, c: int,
                      cfg: SiftConfig) -> tuple[float, float, float, float] | None:
    """Iterated 3-D quadratic fit around a DoG extremum.

    Returns (level+dl, row+dr, col+dc, refined value) or None if the
    candidate drifts out of bounds, stays unstable, is low-contrast, or
    is edge-like.
    """
    n_lvl, h, w = dog.shape
    for _ in range(5):
        cube = dog[lvl - 1:lvl + 2, r - 1:r + 2, c - 1:c + 2].astype(np.float64)
        grad = 0.5 * np.array([cube[2, 1, 1] - cube[0, 1, 1],
                               cube[1, 2, 1] - cube[1, 0, 1],
                               cube[1, 1, 2] - cube[1, 1, 0]])
        hess = np.empty((3, 3))
        hess[0, 0] = cube[2, 1, 1] - 2 * cube[1, 1, 1] + cube[0, 1, 1]
        hess[1, 1] = cube[1, 2, 1] - 2 * cube[1, 1, 1] + cube[1, 0, 1]
        hess[2, 2] = cube[1, 1, 2] - 2 * cube[1, 1, 1] + cube[1, 1, 0]
        hess[0, 1] = hess[1, 0] = 0.25 * (cube[2, 2, 1] - cube[2, 0, 1]
                                          - cube[0, 2, 1] + cube[0, 0, 1])
        hess[0, 2] = hess[2, 0] = 0.25 * (cube[2, 1, 2] - cube[2, 1, 0]
                                          - cube[0, 1, 2] + cube[0, 1, 0])
        hess[1, 2] = hess[2, 1] = 0.25 * (cube[1, 2, 2] - cube[1, 2, 0]
                                          - cube[1, 0, 2] + cube[1, 0, 0])
        try:
            offset = -np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            return None
        if (np.abs(offset) < 0.5).all():
            break
        lvl += int(round(offset[0]))
        r += int(round(offset[1]))
        c += int(round(offset[2]))
        if not (1 <= lvl < n_lvl - 1 and 1 <= r < h - 1 and 1 <= c < w - 1):
            return None
    else:
        return None

    value = cube[1, 1, 1] + 0.5 * grad @ offset
    if abs(value) < cfg.contrast_threshold:
        return None
    # edge response: ratio of principal curvatures of the spatial Hessian
    tr = hess[1, 1] + hess[2, 2]
    det = hess[1, 1] * hess[2, 2] - hess[1, 2] ** 2
    rr = cfg.edge_ratio
    if det <= 0 or tr * tr * rr >= det * (rr + 1.0) ** 2:
        return None
    return lvl + offset[0], r + offset[1], c + offset[2], value


def _gradients(level_img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    gy, gx = np.gradient(level_img)
    return np.hypot(gx, gy), np.arctan2(gy, gx)


def _orientations(mag: np.ndarray, ang: np.ndarray, r: float, c: float,
                  sigma_rel: float) -> list[float]:
    """Peaks of the 36-bin gradient-orientation histogram around (r, c)."""
    h, w = mag.shape
    radius = int(round(4.5 * sigma_rel))
    r0, r1 = max(0, int(r) - radius), min(h, int(r) + radius + 1)
    c0, c1 = max(0, int(c) - radius), min(w, int(c) + radius + 1)
    if r1 <= r0 or c1 <= c0:
        return []
    yy, xx = np.mgrid[r0:r1, c0:c1]
    d2 = (yy - r) ** 2 + (xx - c) ** 2
    keep = d2 <= radius * radius
    weights = mag[r0:r1, c0:c1] * np.exp(-d2 / (2 * (1.5 * sigma_rel) ** 2))
    bins = (np.floor((ang[r0:r1, c0:c1] % (2 * np.pi)) / (2 * np.pi) * 36)
            .astype(int) % 36)
    hist = np.bincount(bins[keep].ravel(), weights=weights[keep].ravel(),
                       minlength=36)
    for _ in range(6):
        hist = (np.roll(hist, 1) + hist + np.roll(hist, -1)) / 3.0
    if hist.max() <= 0:
        return []
    peaks = []
    thresh = 0.8 * hist.max()
    for i in range(36):
        left, right = hist[(i - 1) % 36], hist[(i + 1) % 36]
        if hist[i] >= thresh and hist[i] > left and hist[i] > right:
            denom = left - 2 * hist[i] + right
            delta = 0.5 * (left - right) / denom if denom != 0 else 0.0
            peaks.append(((i + 0.5 + delta) / 36.0 * 2 * np.pi) % (2 * np.pi))
    return peaks


def _descriptor(mag: np.ndarray, ang: np.ndarray, r: float, c: float,
                sigma_rel: float, theta: float, clip: float) -> np.ndarray | None:
    """Classic 4x4 spatial x 8 orientation histogram with trilinear binning."""
    d, nb = 4, 8
    h, w = mag.shape
    hist_width = 3.0 * sigma_rel
    radius = int(round(hist_width * np.sqrt(2) * (d + 1) * 0.5))
    radius = min(radius, int(np.hypot(h, w)))
    r0, r1 = max(0, int(r) - radius), min(h, int(r) + radius + 1)
    c0, c1 = max(0, int(c) - radius), min(w, int(c) + radius + 1)
    if r1 <= r0 or c1 <= c0:
        return None
    yy, xx = np.mgrid[r0:r1, c0:c1]
    dy = (yy - r).ravel()
    dx = (xx - c).ravel()
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    x_rot = (dx * cos_t + dy * sin_t) / hist_width
    y_rot = (-dx * sin_t + dy * cos_t) / hist_width
    rbin = y_rot + d / 2 - 0.5
    cbin = x_rot + d / 2 - 0.5
    keep = (rbin > -1) & (rbin < d) & (cbin > -1) & (cbin < d)
    if not keep.any():
        return None
    rbin, cbin = rbin[keep], cbin[keep]
    weight = (mag[r0:r1, c0:c1].ravel()[keep]
              * np.exp(-(x_rot[keep] ** 2 + y_rot[keep] ** 2) / (2 * (0.5 * d) ** 2)))
    obin = (((ang[r0:r1, c0:c1].ravel()[keep] - theta) % (2 * np.pi))
            / (2 * np.pi) * nb)

    hist = np.zeros((d + 2, d + 2, nb), dtype=np.float64)
    r_idx = np.floor(rbin).astype(int)
    c_idx = np.floor(cbin).astype(int)
    o_idx = np.floor(obin).astype(int)
    fr, fc, fo = rbin - r_idx, cbin - c_idx, obin - o_idx
    for dr_, wr in ((0, 1 - fr), (1, fr)):
        for dc_, wc in ((0, 1 - fc), (1, fc)):
            for do_, wo in ((0, 1 - fo), (1, fo)):
                np.add.at(hist,
                          (r_idx + 1 + dr_, c_idx + 1 + dc_, (o_idx + do_) % nb),
                          weight * wr * wc * wo)
    vec = hist[1:-1, 1:-1, :].ravel()
    norm = np.linalg.norm(vec)
    if norm < 1e-12:
        return None
    vec = np.minimum(vec / norm, clip)
    norm = np.linalg.norm(vec)
    if norm < 1e-12:
        return None
    return (vec / norm).astype(np.float32)


def extract_features(img: GrayImage,
                     cfg: SiftConfig = SiftConfig()) -> tuple[list[Keypoint], np.ndarray]:
    """Keypoints plus unit-norm 128-dim descriptors for a grayscale image."""
    if img.width < MIN_IMAGE_SIDE or img.height < MIN_IMAGE_SIDE:
        raise ImageTooSmallError(
            f"image {img.width}x{img.height} below {MIN_IMAGE_SIDE} px minimum")
    base = img.data.astype(np.float32) / 255.0
    octaves = _gaussian_pyramid(base, cfg)
    s = cfg.scales_per_octave
    k = 2.0 ** (1.0 / s)
    pre_thresh = 0.5 * cfg.contrast_threshold

    keypoints: list[Keypoint] = []
    descriptors: list[np.ndarray] = []
    for oct_idx, levels in enumerate(octaves):
        dog = np.stack([b - a for a, b in zip(levels, levels[1:])])
        if min(dog.shape[1:]) < 8:
            continue
        interior = dog[1:-1, 1:-1, 1:-1]
        maxed = ndimage.maximum_filter(dog, size=3, mode="constant", cval=np.inf)
        mined = ndimage.minimum_filter(dog, size=3, mode="constant", cval=-np.inf)
        is_ext = ((np.abs(interior) > pre_thresh)
                  & ((interior >= maxed[1:-1, 1:-1, 1:-1])
                     | (interior <= mined[1:-1, 1:-1, 1:-1])))
        grad_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        scale_factor = 2.0 ** oct_idx

        for lvl, rr, cc in np.argwhere(is_ext):
            refined = _quadratic_refine(dog, lvl + 1, rr + 1, cc + 1, cfg)
            if refined is None:
                continue
            flvl, fr, fc = refined[0], refined[1], refined[2]
            sigma_rel = cfg.sigma0 * (k ** flvl)
            layer = int(np.clip(round(flvl), 1, s))
            if layer not in grad_cache:
                grad_cache[layer] = _gradients(levels[layer])
            mag, ang = grad_cache[layer]
            if not (0 <= fr < mag.shape[0] and 0 <= fc < mag.shape[1]):
                continue
            for theta in _orientations(mag, ang, fr, fc, sigma_rel):
                desc = _descriptor(mag, ang, fr, fc, sigma_rel, theta,
                                   cfg.descriptor_clip)
                if desc is None:
                    continue
                keypoints.append(Keypoint(x=float(fc * scale_factor),
                                          y=float(fr * scale_factor),
                                          scale=float(sigma_rel * scale_factor),
                                          orientation=float(theta)))
                descriptors.append(desc)

    if descriptors:
        desc_arr = np.stack(descriptors)
    else:
        desc_arr = np.zeros((0, DESCRIPTOR_DIM), dtype=np.float32)
    return keypoints, desc_arr
