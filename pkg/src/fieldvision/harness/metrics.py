"""Scoring detections and localization traces against rendered ground truth."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..camera import CameraModel, ExtrinsicChain
from ..geometry import LineSegment2D
from ..synth import LINE

LINE_MATCH_ANGLE = math.radians(10.0)
LINE_MATCH_DIST = 0.15
MIN_VISIBLE_LINE = 0.5
CIRCLE_SECTORS = 36


# --- ball ------------------------------------------------------------------------------


def ball_visible(frame_record: dict, cam: CameraModel, min_fraction: float = 0.5) -> dict | None:
    """Ball landmark if it is inside the image and mostly unoccluded."""
    for lm in frame_record["landmarks"]:
        if lm["kind"] != "ball" or lm["pixel"] is None:
            continue
        r = lm["radius_px"]
        if r <= 0 or not cam.in_image(np.asarray(lm["pixel"]), r):
            return None
        if lm["pixels"] < min_fraction * math.pi * r * r:
            return None
        return lm
    return None


def ball_hit(detected_pixel, lm: dict) -> bool:
    if detected_pixel is None:
        return False
    err = math.dist(detected_pixel, lm["pixel"])
    return err <= max(2.0, 0.5 * lm["radius_px"])


@dataclass
class BallTally:
    edges: list[float]
    hits: list[int] = field(default_factory=list)
    totals: list[int] = field(default_factory=list)
    false_positives: int = 0
    empty_frames: int = 0

    def __post_init__(self):
        n = len(self.edges) - 1
        self.hits = [0] * n
        self.totals = [0] * n

    def add(self, distance: float, hit: bool) -> None:
        # buckets are (lo, hi]; the tolerance keeps planted distances such as 4.5 m in their bucket
        k = int(np.searchsorted(self.edges, distance - 1e-6, side="left")) - 1
        if 0 <= k < len(self.hits):
            self.totals[k] += 1
            self.hits[k] += int(hit)

    def add_empty(self, detected: bool) -> None:
        self.empty_frames += 1
        self.false_positives += int(detected)

    def rate_up_to(self, d: float) -> float | None:
        h = sum(hv for hv, e in zip(self.hits, self.edges[1:]) if e <= d + 1e-9)
        t = sum(tv for tv, e in zip(self.totals, self.edges[1:]) if e <= d + 1e-9)
        return h / t if t else None

    def report(self) -> dict:
        buckets = [
            {"lo": lo, "hi": hi, "frames": t, "hits": h, "rate": (h / t if t else None)}
            for lo, hi, t, h in zip(self.edges, self.edges[1:], self.totals, self.hits)
        ]
        return {
            "buckets": buckets,
            "rate_max_4_5": self.rate_up_to(4.5),
            "frames_max_4_5": sum(t for t, e in zip(self.totals, self.edges[1:]) if e <= 4.5 + 1e-9),
            "false_positive_rate": self.false_positives / self.empty_frames if self.empty_frames else None,
            "empty_frames": self.empty_frames,
        }


# --- lines and circle ----------------------------------------------------------------------


def _visible_on_mask(pts: np.ndarray, mask: np.ndarray, cam: CameraModel, chain: ExtrinsicChain, max_range: float):
    px, ok = cam.worlds_to_pixels(np.c_[pts, np.zeros(len(pts))], chain)
    ok &= cam.in_image(px, 1.0)
    ok &= np.hypot(pts[:, 0], pts[:, 1]) <= max_range
    xi = np.clip(np.rint(px[:, 0]).astype(int), 0, cam.width - 1)
    yi = np.clip(np.rint(px[:, 1]).astype(int), 0, cam.height - 1)
    return ok & (mask[yi, xi] == LINE)


def visible_line_parts(record: dict, mask: np.ndarray, cam, chain, max_range: float, step: float = 0.02):
    """Ground-truth lines with at least 0.5 m visible within range: (a, b, t0, t1) in ego."""
    out = []
    for lm in record["landmarks"]:
        if lm["kind"] != "line":
            continue
        a, b = np.array(lm["ego"][0]), np.array(lm["ego"][1])
        L = float(np.linalg.norm(b - a))
        ts = np.arange(0.0, L, step) / L
        ok = _visible_on_mask(a + ts[:, None] * (b - a), mask, cam, chain, max_range)
        if ok.sum() * step >= MIN_VISIBLE_LINE:
            idx = np.flatnonzero(ok)
            out.append((a, b, float(ts[idx[0]]), float(ts[idx[-1]])))
    return out


def part_matched(part, segs: list[LineSegment2D]) -> bool:
    a, b, t0, t1 = part
    L = float(np.linalg.norm(b - a))
    d = (b - a) / L
    n = np.array([-d[1], d[0]])
    for s in segs:
        if abs(float(s.direction @ d)) < math.cos(LINE_MATCH_ANGLE):
            continue
        e = np.array([s.p0, s.p1])
        if np.max(np.abs((e - a) @ n)) > LINE_MATCH_DIST:
            continue
        u = np.sort((e - a) @ d) / L
        if (min(u[1], t1) - max(u[0], t0)) * L >= min(0.3, 0.5 * (t1 - t0) * L):
            return True
    return False


def segment_is_true(seg: LineSegment2D, record: dict, circle_radius: float) -> bool:
    """A detected segment lies on some field marking (straight line or the circle)."""
    mid = seg.midpoint
    for lm in record["landmarks"]:
        if lm["kind"] == "line":
            a, b = np.array(lm["ego"][0]), np.array(lm["ego"][1])
            d = (b - a) / np.linalg.norm(b - a)
            if abs(float(seg.direction @ d)) < math.cos(LINE_MATCH_ANGLE):
                continue
            n = np.array([-d[1], d[0]])
            e = np.array([seg.p0, seg.p1])
            if np.max(np.abs((e - a) @ n)) <= LINE_MATCH_DIST:
                return True
        elif lm["kind"] == "circle":
            if abs(math.dist(mid, lm["ego"]) - circle_radius) <= LINE_MATCH_DIST:
                return True
    return False


def circle_visibility(record: dict, mask, cam, chain, max_range: float) -> float:
    """Fraction of angular sectors of the centre circle visible within range."""
    c = next(lm for lm in record["landmarks"] if lm["kind"] == "circle")
    centre = np.array(c["ego"])
    phi = np.linspace(0.0, 2 * math.pi, 360, endpoint=False)
    pts = centre + c["radius"] * np.c_[np.cos(phi), np.sin(phi)]
    ok = _visible_on_mask(pts, mask, cam, chain, max_range)
    return np.unique((phi[ok] / (2 * math.pi) * CIRCLE_SECTORS).astype(int)).size / CIRCLE_SECTORS


def iou(a: np.ndarray, b: np.ndarray) -> float:
    u = np.count_nonzero(a | b)
    return 1.0 if u == 0 else np.count_nonzero(a & b) / u


def summary(values) -> dict:
    v = np.asarray(list(values), dtype=float)
    if v.size == 0:
        return {"n": 0, "mean": None, "min": None, "max": None}
    return {"n": int(v.size), "mean": float(v.mean()), "min": float(v.min()), "max": float(v.max())}


# --- localization ------------------------------------------------------------------------


def recovery_frames(errors: np.ndarray, start: int, threshold: float) -> int | None:
    """Frames after ``start`` until the error first drops below ``threshold``."""
    below = np.flatnonzero(errors[start:] < threshold)
    return int(below[0]) if below.size else None
