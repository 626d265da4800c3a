"""Progressive probabilistic Hough transform for line segments.

Edge pixels are visited in random order. Each vote updates the (angle, rho)
accumulator; when a bin crosses the vote threshold the corresponding line is
walked in both directions through the remaining edge pixels (tolerating gaps
up to ``max_gap``), the pixels on it are consumed and their votes withdrawn.
"""

from __future__ import annotations

import math

import numpy as np

from ..geometry import Frame, LineSegment2D

CORRIDOR = 1.5  # lateral pixel tolerance around a detected line


def _fit_line(xs: np.ndarray, ys: np.ndarray):
    c = np.array([xs.mean(), ys.mean()])
    pts = np.stack([xs, ys], axis=1) - c
    _, _, vt = np.linalg.svd(pts, full_matrices=False)
    return c, vt[0]


def count_support(edge_pts: np.ndarray, p0, p1, tol: float = CORRIDOR) -> int:
    """Edge pixels within ``tol`` of segment p0-p1 (including end caps)."""
    a, b = np.asarray(p0, float), np.asarray(p1, float)
    ab = b - a
    L2 = float(ab @ ab)
    rel = edge_pts - a
    t = np.clip(rel @ ab / L2, 0.0, 1.0)
    d = np.hypot(*(rel - t[:, None] * ab).T)
    return int(np.count_nonzero(d <= tol))


def hough_segments(
    edges: np.ndarray,
    min_length: float,
    max_gap: float,
    vote_threshold: int,
    seed: int = 0,
    angle_bins: int = 180,
) -> list[LineSegment2D]:
    """Extract pixel-frame line segments from a binary edge map."""
    if min_length <= 0 or max_gap < 0 or vote_threshold <= 0:
        raise ValueError("thresholds must be positive")
    edges = np.asarray(edges, dtype=bool)
    h, w = edges.shape
    ys, xs = np.nonzero(edges)
    if xs.size == 0:
        return []
    all_pts = np.stack([xs, ys], axis=1).astype(float)

    thetas = np.arange(angle_bins) * (math.pi / angle_bins)
    cos_t, sin_t = np.cos(thetas), np.sin(thetas)
    offset = int(math.ceil(math.hypot(w, h))) + 1
    num_rho = 2 * offset + 1
    acc = np.zeros((angle_bins, num_rho), dtype=np.int32)
    rows = np.arange(angle_bins)

    avail = edges.copy()
    voted = np.zeros_like(edges)
    rng = np.random.default_rng(seed)
    order = rng.permutation(xs.size)
    out: list[LineSegment2D] = []

    def rho_idx(x, y):
        return np.rint(x * cos_t + y * sin_t).astype(np.int64) + offset

    for idx in order:
        x0, y0 = int(xs[idx]), int(ys[idx])
        if not avail[y0, x0]:
            continue
        r = rho_idx(x0, y0)
        acc[rows, r] += 1
        voted[y0, x0] = True
        col = acc[rows, r]
        n = int(np.argmax(col))
        if col[n] < vote_threshold:
            continue

        # walk along the line direction
        dx, dy = -sin_t[n], cos_t[n]
        if abs(dx) >= abs(dy):
            step = np.array([math.copysign(1.0, dx), dy / abs(dx)])
            perp = np.array([0, 1])
        else:
            step = np.array([dx / abs(dy), math.copysign(1.0, dy)])
            perp = np.array([1, 0])
        ends = []
        for sign in (1.0, -1.0):
            px, py = float(x0), float(y0)
            gap = 0
            end = (x0, y0)
            while True:
                px += sign * step[0]
                py += sign * step[1]
                ix, iy = int(round(px)), int(round(py))
                if ix < 0 or ix >= w or iy < 0 or iy >= h:
                    break
                hit = None
                for o in (0, 1, -1):
                    jx, jy = ix + o * perp[0], iy + o * perp[1]
                    if 0 <= jx < w and 0 <= jy < h and avail[jy, jx]:
                        hit = (jx, jy)
                        break
                if hit is not None:
                    gap = 0
                    end = (ix, iy)
                else:
                    gap += 1
                    if gap > max_gap:
                        break
            ends.append(end)
        (ex1, ey1), (ex0, ey0) = ends
        good = math.hypot(ex1 - ex0, ey1 - ey0) >= min_length

        # consume pixels between the ends
        cx, cy = [x0], [y0]
        for (ex, ey), sign in zip(ends, (1.0, -1.0)):
            nsteps = int(round(max(abs(ex - x0), abs(ey - y0))))
            px, py = float(x0), float(y0)
            for _ in range(nsteps + 1):
                ix, iy = int(round(px)), int(round(py))
                for o in (0, 1, -1):
                    jx, jy = ix + o * perp[0], iy + o * perp[1]
                    if 0 <= jx < w and 0 <= jy < h and avail[jy, jx]:
                        if good:
                            if voted[jy, jx]:
                                acc[rows, rho_idx(jx, jy)] -= 1
                                voted[jy, jx] = False
                            avail[jy, jx] = False
                            cx.append(jx)
                            cy.append(jy)
                px += sign * step[0]
                py += sign * step[1]
        if not good:
            continue
        avail[y0, x0] = False
        if voted[y0, x0]:
            acc[rows, r] -= 1
            voted[y0, x0] = False

        seg = _refine(np.array(cx, float), np.array(cy, float))
        if seg is None:
            continue
        p0, p1 = seg
        if math.hypot(p1[0] - p0[0], p1[1] - p0[1]) < min_length:
            continue
        if count_support(all_pts, p0, p1) < vote_threshold:
            continue
        out.append(LineSegment2D(tuple(p0), tuple(p1), Frame.PIXEL))
    return out


def _refine(xs: np.ndarray, ys: np.ndarray):
    """Total-least-squares fit through consumed pixels, clipped to their extent."""
    if xs.size < 2:
        return None
    c, d = _fit_line(xs, ys)
    t = (xs - c[0]) * d[0] + (ys - c[1]) * d[1]
    lo, hi = float(t.min()), float(t.max())
    if hi - lo <= 0:
        return None
    p0, p1 = c + lo * d, c + hi * d
    # canonical orientation: left-to-right, then top-to-bottom
    if (p1[0], p1[1]) < (p0[0], p0[1]):
        p0, p1 = p1, p0
    return p0, p1
