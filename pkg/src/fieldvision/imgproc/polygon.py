"""Convex hull, Ramer-Douglas-Peucker simplification and polygon helpers."""

from __future__ import annotations

import numpy as np
from skimage.draw import polygon as _fill_polygon
from skimage.draw import polygon_perimeter


class EmptyInputError(ValueError):
    pass


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points) -> np.ndarray:
    """Counter-clockwise hull (monotone chain) without collinear vertices.

    Counter-clockwise is with respect to a y-up frame; in image coordinates
    (y down) the order appears clockwise on screen.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise EmptyInputError("convex hull of an empty point set")
    uniq = sorted(set(map(tuple, pts.tolist())))
    if len(uniq) <= 2:
        return np.array(uniq, dtype=float)
    lower: list = []
    for p in uniq:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(uniq):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    return np.array(hull, dtype=float)


def _seg_dist(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance to the segment ab (not the infinite line), so the output polyline stays within epsilon."""
    ab = b - a
    L2 = float(ab @ ab)
    t = np.zeros(len(pts)) if L2 == 0 else np.clip((pts - a) @ ab / L2, 0.0, 1.0)
    return np.hypot(*(a + t[:, None] * ab - pts).T)


def rdp_simplify(polyline, epsilon: float) -> np.ndarray:
    """Ramer-Douglas-Peucker polyline reduction; endpoints always kept."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    pts = np.asarray(polyline, dtype=float).reshape(-1, 2)
    if len(pts) < 2:
        raise ValueError("need at least two points")
    keep = np.zeros(len(pts), dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, len(pts) - 1)]
    while stack:
        i, j = stack.pop()
        if j <= i + 1:
            continue
        d = _seg_dist(pts[i + 1 : j], pts[i], pts[j])
        k = int(np.argmax(d))
        if d[k] > epsilon:
            m = i + 1 + k
            keep[m] = True
            stack.append((i, m))
            stack.append((m, j))
    return pts[keep]


def rdp_simplify_closed(contour, epsilon: float) -> np.ndarray:
    """RDP for a closed contour, split at the vertex farthest from the first."""
    pts = np.asarray(contour, dtype=float).reshape(-1, 2)
    if len(pts) > 1 and np.allclose(pts[0], pts[-1]):
        pts = pts[:-1]
    if len(pts) < 4:
        return pts
    far = int(np.argmax(np.hypot(*(pts - pts[0]).T)))
    a = rdp_simplify(pts[: far + 1], epsilon)
    b = rdp_simplify(np.vstack([pts[far:], pts[:1]]), epsilon)
    return np.vstack([a[:-1], b[:-1]])


def subdivide_polygon(poly, max_step: float) -> np.ndarray:
    """Insert points so consecutive vertices (closed) are at most ``max_step`` apart."""
    poly = np.asarray(poly, dtype=float)
    out = []
    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        k = max(1, int(np.ceil(np.hypot(*(b - a)) / max_step)))
        t = np.arange(k)[:, None] / k
        out.append(a + t * (b - a))
    return np.vstack(out)


def clip_polygon_to_rect(poly, xmin: float, ymin: float, xmax: float, ymax: float) -> np.ndarray:
    """Sutherland-Hodgman clip against an axis-aligned rectangle."""
    out = [tuple(p) for p in np.asarray(poly, dtype=float)]
    edges = [
        (lambda p: p[0] >= xmin, lambda a, b: _isect_x(a, b, xmin)),
        (lambda p: p[0] <= xmax, lambda a, b: _isect_x(a, b, xmax)),
        (lambda p: p[1] >= ymin, lambda a, b: _isect_y(a, b, ymin)),
        (lambda p: p[1] <= ymax, lambda a, b: _isect_y(a, b, ymax)),
    ]
    for inside, isect in edges:
        if not out:
            break
        src, out = out, []
        prev = src[-1]
        for cur in src:
            if inside(cur):
                if not inside(prev):
                    out.append(isect(prev, cur))
                out.append(cur)
            elif inside(prev):
                out.append(isect(prev, cur))
            prev = cur
    res = []
    for p in out:
        if not res or np.hypot(p[0] - res[-1][0], p[1] - res[-1][1]) > 1e-9:
            res.append(p)
    if len(res) > 1 and np.hypot(res[0][0] - res[-1][0], res[0][1] - res[-1][1]) <= 1e-9:
        res.pop()
    return np.array(res, dtype=float).reshape(-1, 2)


def _isect_x(a, b, x):
    t = (x - a[0]) / (b[0] - a[0])
    return (x, a[1] + t * (b[1] - a[1]))


def _isect_y(a, b, y):
    t = (y - a[1]) / (b[1] - a[1])
    return (a[0] + t * (b[0] - a[0]), y)


def polygon_mask(poly, shape: tuple[int, int]) -> np.ndarray:
    """Rasterize a polygon given in (x, y) pixel coordinates, outline pixels included."""
    poly = np.asarray(poly, dtype=float)
    mask = np.zeros(shape, dtype=bool)
    if len(poly) < 3:
        return mask
    rr, cc = _fill_polygon(poly[:, 1], poly[:, 0], shape)
    mask[rr, cc] = True
    rr, cc = polygon_perimeter(np.rint(poly[:, 1]), np.rint(poly[:, 0]), shape, clip=False)
    mask[rr, cc] = True
    return mask


def points_in_polygon(points, poly) -> np.ndarray:
    """Even-odd rule containment test, vectorized over ``points``."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    poly = np.asarray(poly, dtype=float)
    x, y = pts[:, 0][:, None], pts[:, 1][:, None]
    x0, y0 = poly[:, 0][None, :], poly[:, 1][None, :]
    x1, y1 = np.roll(poly[:, 0], -1)[None, :], np.roll(poly[:, 1], -1)[None, :]
    cond = (y0 > y) != (y1 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
    crossings = cond & (x < xint)
    return (np.count_nonzero(crossings, axis=1) % 2) == 1


def is_simple_polygon(poly) -> bool:
    """True when no two non-adjacent edges intersect."""
    p = np.asarray(poly, dtype=float)
    n = len(p)
    if n < 3:
        return False

    def seg_isect(a, b, c, d):
        d1, d2 = _cross(c, d, a), _cross(c, d, b)
        d3, d4 = _cross(a, b, c), _cross(a, b, d)
        return (d1 * d2 < 0) and (d3 * d4 < 0)

    for i in range(n):
        a, b = p[i], p[(i + 1) % n]
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if seg_isect(a, b, p[j], p[(j + 1) % n]):
                return False
    return True
