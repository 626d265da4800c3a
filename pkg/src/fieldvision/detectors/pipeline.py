"""Full per-frame detection: boundary, lines, centre circle, ball, goal posts."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..camera import CameraError, CameraModel, ExtrinsicChain
from ..geometry import FieldSpec
from ..imgproc.color import classify_colors, rgb_to_hsv
from ..imgproc.histogram import Histogram
from .ball import BallClassifier, ball_center_from_pixel, classify_ball, detect_ball_candidates
from .boundary import detect_field_boundary
from .lines import (
    detect_centre_circle,
    detect_lines,
    merge_pixel_segments,
    merge_segments,
    on_circle,
    segment_pixels_to_ego,
)
from .posts import detect_goal_posts
from .types import DetectorConfig, Detections, NoFieldError


@dataclass(frozen=True)
class BallModel:
    reference: Sequence[Histogram]
    classifier: BallClassifier | None = None


def detect_ball(hsv, labels, boundary, cam, chain, model: BallModel, cfg: DetectorConfig):
    """Best accepted candidate as (pixel centre, score), or None."""
    best = None
    for c in detect_ball_candidates(hsv, labels, boundary, model.reference, cam, chain, cfg):
        if model.classifier is None:
            ok, score = True, 1.0 - c.histogram_distance
        else:
            ok, score = classify_ball(c, model.classifier)
        if ok and (best is None or score > best[1]):
            best = (c.center, score)
    return best


def detect_frame(
    img: np.ndarray,
    cam: CameraModel,
    chain: ExtrinsicChain,
    spec: FieldSpec | None = None,
    ball_model: BallModel | None = None,
    cfg: DetectorConfig | None = None,
) -> Detections:
    """Run every detector on an RGB frame. Without a green field the result is empty."""
    cfg = cfg or DetectorConfig()
    spec = spec or FieldSpec()
    hsv = rgb_to_hsv(img)
    labels = classify_colors(hsv, cfg.colors)
    try:
        boundary = detect_field_boundary(labels, cam, cfg)
    except NoFieldError:
        return Detections(None, [])

    pieces, _ = detect_lines(hsv, labels, boundary, cam, chain, cfg)
    # the circle sees unmerged pieces; merging would glue neighbouring chords together
    short = [e for e in (segment_pixels_to_ego(s, cam, chain, cfg.max_line_range) for s in pieces) if e is not None]
    circle = detect_centre_circle(short, spec, cfg)
    ego = []
    kept_pix = []
    for s in merge_pixel_segments(pieces, cam, cfg):
        e = segment_pixels_to_ego(s, cam, chain, cfg.max_line_range)
        if e is not None and (circle is None or not on_circle(e, circle)):
            ego.append(e)
            kept_pix.append(s)
    ego = merge_segments(ego, cfg.ego_merge_angle_tol, cfg.ego_merge_lateral_tol, cfg.ego_merge_gap_tol)

    ball = ball_px = score = None
    if ball_model is not None:
        hit = detect_ball(hsv, labels, boundary, cam, chain, ball_model, cfg)
        if hit is not None:
            try:
                ball = tuple(float(v) for v in ball_center_from_pixel(cam, chain, hit[0], cfg.ball_radius))
                ball_px, score = hit
            except CameraError:
                pass

    posts = detect_goal_posts(labels, boundary, cam, chain, cfg)
    return Detections(
        boundary=boundary,
        lines=ego,
        circle=None if circle is None else circle.center,
        circle_radius=None if circle is None else circle.radius,
        ball=ball,
        goal_posts=posts,
        pixel_lines=kept_pix,
        ball_pixel=ball_px,
        ball_score=score,
    )
