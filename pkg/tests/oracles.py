"""Independent brute-force oracles used across the test suite.

These deliberately avoid the library's own code paths: plain loops,
exhaustive searches and flood fills, kept simple enough to be obviously
correct.
"""

from __future__ import annotations

from collections import deque

import numpy as np


def otsu_exhaustive(data: np.ndarray) -> int:
    """Smallest t in [0,255] minimizing weighted intra-class variance."""
    vals = data.ravel().astype(np.float64)
    best_t, best_v = 0, np.inf
    for t in range(256):
        lo = vals[vals <= t]
        hi = vals[vals > t]
        v = 0.0
        if lo.size:
            v += lo.size * lo.var()
        if hi.size:
            v += hi.size * hi.var()
        if v < best_v:
            best_v, best_t = v, t
    return best_t


def flood_fill_components(mask: np.ndarray) -> np.ndarray:
    """8-connected labeling by BFS, numbered in raster order of discovery."""
    h, w = mask.shape
    labels = np.zeros((h, w), dtype=np.int32)
    nxt = 0
    for si in range(h):
        for sj in range(w):
            if not mask[si, sj] or labels[si, sj]:
                continue
            nxt += 1
            queue = deque([(si, sj)])
            labels[si, sj] = nxt
            while queue:
                i, j = queue.popleft()
                for di in (-1, 0, 1):
                    for dj in (-1, 0, 1):
                        ni, nj = i + di, j + dj
                        if (0 <= ni < h and 0 <= nj < w
                                and mask[ni, nj] and not labels[ni, nj]):
                            labels[ni, nj] = nxt
                            queue.append((ni, nj))
    return labels


def fill_holes_reference(mask: np.ndarray) -> np.ndarray:
    """Flood-fill background from the border (4-conn), invert the rest."""
    h, w = mask.shape
    reachable = np.zeros((h, w), dtype=bool)
    queue = deque()
    for i in range(h):
        for j in (0, w - 1):
            if not mask[i, j] and not reachable[i, j]:
                reachable[i, j] = True
                queue.append((i, j))
    for j in range(w):
        for i in (0, h - 1):
            if not mask[i, j] and not reachable[i, j]:
                reachable[i, j] = True
                queue.append((i, j))
    while queue:
        i, j = queue.popleft()
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            ni, nj = i + di, j + dj
            if (0 <= ni < h and 0 <= nj < w
                    and not mask[ni, nj] and not reachable[ni, nj]):
                reachable[ni, nj] = True
                queue.append((ni, nj))
    return mask | ~reachable


def disk_pixels(cx: int, cy: int, r: int) -> set[tuple[int, int]]:
    """All (x, y) with (x-cx)^2 + (y-cy)^2 <= r^2, by enumeration."""
    out = set()
    for y in range(cy - r, cy + r + 1):
        for x in range(cx - r, cx + r + 1):
            if (x - cx) ** 2 + (y - cy) ** 2 <= r * r:
                out.add((x, y))
    return out


def best_line_inliers(points: np.ndarray, tol: float) -> set[int]:
    """Largest inlier set over all C(n,2) two-point candidate lines."""
    n = len(points)
    best: set[int] = set()
    for a in range(n):
        for b in range(a + 1, n):
            p, q = points[a], points[b]
            d = q - p
            norm = np.hypot(*d)
            if norm == 0:
                dist = np.hypot(points[:, 0] - p[0], points[:, 1] - p[1])
            else:
                dist = np.abs(d[0] * (points[:, 1] - p[1])
                              - d[1] * (points[:, 0] - p[0])) / norm
            inl = set(np.nonzero(dist <= tol)[0].tolist())
            if len(inl) > len(best):
                best = inl
    return best


def two_nn_bruteforce(corpus: np.ndarray, query: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact 2-NN by full scan in float64; ties broken by lower corpus index."""
    diff = corpus.astype(np.float64) - query.astype(np.float64)[None, :]
    dist = np.sqrt((diff * diff).sum(axis=1))
    order = np.lexsort((np.arange(len(corpus)), dist))
    idx = order[:2]
    return idx, dist[idx]
