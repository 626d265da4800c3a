"""Minimal goal-post detector: tall white blobs standing on the field boundary."""

from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

from ..camera import CameraError, CameraModel, ExtrinsicChain, camera_pose
from ..imgproc.color import WHITE
from ..imgproc.components import connected_components
from .types import DetectorConfig, FieldBoundary

GOAL_POST_RADIUS = 0.05
_VERTICAL = np.ones((7, 1), dtype=bool)


def _principal_axis(comp) -> tuple[float, float]:
    """(aspect ratio, tilt from image vertical in radians)."""
    x = comp.cols.astype(float)
    y = comp.rows.astype(float)
    cov = np.cov(np.stack([x, y])) + np.eye(2) / 12.0  # pixel footprint
    evals, evecs = np.linalg.eigh(cov)
    major = evecs[:, 1]
    aspect = math.sqrt(evals[1] / evals[0])
    tilt = math.atan2(abs(major[0]), abs(major[1]))
    return aspect, tilt


def detect_goal_posts(
    labels: np.ndarray,
    boundary: FieldBoundary,
    cam: CameraModel,
    chain: ExtrinsicChain,
    cfg: DetectorConfig | None = None,
    post_radius: float = GOAL_POST_RADIUS,
) -> list[tuple[float, float]]:
    """Egocentric ground-contact points of detected posts, sorted left to right in the image."""
    cfg = cfg or DetectorConfig()
    shape = labels.shape
    # vertical opening strips thin horizontal lines (the goal line) off the post base
    white = ndimage.binary_opening(labels == WHITE, structure=_VERTICAL)
    inside = boundary.mask(shape)
    cpos = camera_pose(chain).translation
    found = []
    for comp in connected_components(white, connectivity=8, min_area=cfg.post_min_area):
        ins = inside[comp.rows, comp.cols]
        if ins.all() or not ins.any():
            continue  # must cross the boundary
        r0, c0, r1, c1 = comp.bbox
        # the part outside the field must be on top
        if comp.rows[~ins].mean() >= comp.rows[ins].mean():
            continue
        aspect, tilt = _principal_axis(comp)
        if aspect < cfg.post_min_aspect or tilt > cfg.post_max_tilt:
            continue
        bottom = comp.rows >= r1 - 2
        base = (float(np.median(comp.cols[bottom])), r1 - 0.5)
        try:
            g = cam.pixel_to_ground(base, chain)
        except CameraError:
            continue
        # the visible base lies on the near surface; step back to the axis
        v = g - cpos[:2]
        n = float(np.hypot(*v))
        if n > 1e-9:
            g = g + v / n * post_radius
        found.append((base[0], (float(g[0]), float(g[1]))))
    found.sort()
    return [g for _, g in found]
