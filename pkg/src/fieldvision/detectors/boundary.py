"""Field boundary as the convex hull of green regions in undistorted space."""

from __future__ import annotations

import numpy as np

from ..camera import CameraModel
from ..imgproc.color import GREEN
from ..imgproc.components import connected_components, outer_contour
from ..imgproc.polygon import clip_polygon_to_rect, convex_hull, rdp_simplify_closed
from .types import DetectorConfig, FieldBoundary, NoFieldError


def _green_vertices(labels: np.ndarray, cfg: DetectorConfig) -> np.ndarray:
    comps = connected_components(labels == GREEN, connectivity=8, min_area=cfg.min_green_area)
    if not comps:
        raise NoFieldError("no green region large enough for a field")
    verts = []
    for c in comps:
        contour = outer_contour(c)
        simp = rdp_simplify_closed(contour, cfg.boundary_rdp_epsilon) if len(contour) >= 4 else contour
        verts.append(simp)
    return np.vstack(verts)


def _border_side(p: np.ndarray, cam: CameraModel, tol: float = 1.0) -> set[str]:
    x, y = p
    sides = set()
    if x <= tol - 0.5:
        sides.add("l")
    if x >= cam.width - 0.5 - tol:
        sides.add("r")
    if y <= tol - 0.5:
        sides.add("t")
    if y >= cam.height - 0.5 - tol:
        sides.add("b")
    return sides


def _redistort_hull(hull: np.ndarray, cam: CameraModel, step: float) -> np.ndarray:
    """Distort a hull built in undistorted space back into the image.

    Edges are densified before distortion so they follow the lens curvature.
    An edge running along the image border is only the frame cutting off the
    field, so it stays straight in pixel space instead.
    """
    px = cam.distort_point(hull)
    out = []
    n = len(hull)
    for i in range(n):
        j = (i + 1) % n
        out.append(px[i : i + 1])
        if _border_side(px[i], cam) & _border_side(px[j], cam):
            continue
        a, b = hull[i], hull[j]
        k = max(1, int(np.ceil(np.hypot(*(b - a)) / step)))
        t = np.arange(1, k)[:, None] / k
        if len(t):
            out.append(cam.distort_point(a + t * (b - a)))
    return np.vstack(out)


def _clip(poly: np.ndarray, cam: CameraModel) -> np.ndarray:
    return clip_polygon_to_rect(poly, -0.5, -0.5, cam.width - 0.5, cam.height - 0.5)


def detect_field_boundary(labels: np.ndarray, cam: CameraModel, cfg: DetectorConfig | None = None) -> FieldBoundary:
    cfg = cfg or DetectorConfig()
    verts = _green_vertices(labels, cfg)
    und = cam.undistort_point(verts)
    hull = convex_hull(und)
    if len(hull) < 3:
        raise NoFieldError("green region is degenerate")
    f = min(cam.intrinsics.focal_x, cam.intrinsics.focal_y)
    poly = _clip(_redistort_hull(hull, cam, cfg.boundary_subdivision / f), cam)
    if len(poly) < 3:
        raise NoFieldError("field polygon vanished after clipping")
    return FieldBoundary(poly)


def naive_field_boundary(labels: np.ndarray, cam: CameraModel, cfg: DetectorConfig | None = None) -> FieldBoundary:
    """Pixel-space hull of the same green vertices (the distortion-blind baseline)."""
    cfg = cfg or DetectorConfig()
    hull = convex_hull(_green_vertices(labels, cfg))
    return FieldBoundary(_clip(hull, cam))


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    union = np.count_nonzero(a | b)
    return 1.0 if union == 0 else np.count_nonzero(a & b) / union
