from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..geometry import LineSegment2D
from ..imgproc.color import ColorThresholds
from ..imgproc.polygon import polygon_mask


class NoFieldError(RuntimeError):
    pass


@dataclass(frozen=True)
class DetectorConfig:
    colors: ColorThresholds = field(default_factory=ColorThresholds)
    # field boundary
    min_green_area: int = 400
    boundary_rdp_epsilon: float = 1.0
    boundary_subdivision: float = 20.0
    # ball stage one
    ball_radius: float = 0.095
    ball_radius_range: tuple[float, float] = (0.6, 1.45)
    ball_min_radius_px: float = 3.0
    ball_rdp_epsilon: float = 0.7
    ball_histogram_threshold: float = 0.45
    ball_patch_scale: float = 1.25
    ransac_trials: int = 60
    # lines
    canny_low: float = 90.0
    canny_high: float = 180.0
    hough_min_length: float = 18.0
    hough_max_gap: float = 3.0
    hough_votes: int = 15
    hough_seed: int = 0
    normal_length: float = 0.05
    verify_thresholds: tuple[int, int, int] = (7, 7, 6)
    merge_angle_tol: float = math.radians(5.0)
    merge_lateral_tol: float = 3.0
    merge_gap_tol: float = 20.0
    ego_merge_angle_tol: float = math.radians(6.0)
    ego_merge_lateral_tol: float = 0.12
    ego_merge_gap_tol: float = 0.6
    max_line_range: float = 6.0
    # centre circle
    short_segment_length: float = 0.5
    circle_radius_tolerance: float = 0.25
    # goal posts
    post_min_aspect: float = 2.5
    post_max_tilt: float = math.radians(25.0)
    post_min_area: int = 30


@dataclass
class FieldBoundary:
    polygon: np.ndarray  # (n, 2) distorted pixel coordinates
    _masks: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def mask(self, shape) -> np.ndarray:
        """Filled polygon mask (memoized per shape; treat as read-only)."""
        key = tuple(shape)
        if key not in self._masks:
            m = polygon_mask(self.polygon, key)
            m.flags.writeable = False
            self._masks[key] = m
        return self._masks[key]


@dataclass
class BallCandidate:
    center: tuple[float, float]
    radius: float
    arc_coverage: float
    histogram_distance: float
    patch: np.ndarray
    expected_radius: float = 0.0


@dataclass
class Detections:
    """Per-frame detector output; egocentric entries come from ground projection."""

    boundary: FieldBoundary | None
    lines: list[LineSegment2D]  # egocentric
    circle: tuple[float, float] | None = None
    circle_radius: float | None = None
    ball: tuple[float, float] | None = None
    goal_posts: list[tuple[float, float]] = field(default_factory=list)
    pixel_lines: list[LineSegment2D] = field(default_factory=list)
    ball_pixel: tuple[float, float] | None = None
    ball_score: float | None = None

    def to_record(self) -> dict:
        def seg(s):
            return [[round(v, 6) for v in s.p0], [round(v, 6) for v in s.p1]]

        def pt(p):
            return None if p is None else [round(float(v), 6) for v in p]

        return {
            "boundary": None if self.boundary is None else np.round(self.boundary.polygon, 3).tolist(),
            "lines": [seg(s) for s in self.lines],
            "pixel_lines": [seg(s) for s in self.pixel_lines],
            "circle": pt(self.circle),
            "circle_radius": None if self.circle_radius is None else round(self.circle_radius, 6),
            "ball": pt(self.ball),
            "ball_pixel": pt(self.ball_pixel),
            "ball_score": None if self.ball_score is None else round(self.ball_score, 6),
            "goal_posts": [pt(p) for p in self.goal_posts],
        }
