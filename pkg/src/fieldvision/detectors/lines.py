"""Field line segments: Canny on V, probabilistic Hough, three-check verification."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import ndimage

from ..camera import CameraModel, ExtrinsicChain
from ..geometry import FieldSpec, Frame, LineSegment2D
from ..imgproc.circle import arc_coverage, kasa_fit, passes_third_rule
from ..imgproc.color import GREEN, WHITE
from ..imgproc.edges import canny
from ..imgproc.hough import hough_segments
from .types import DetectorConfig, FieldBoundary

N_SAMPLES = 10
MIN_NORMAL_PX = 3.0
BOUNDARY_MARGIN = 8
MAX_PIECE_PX = 60.0


@dataclass(frozen=True)
class Verification:
    passed: bool
    white: int
    green: int
    edge: int


def _label_at(img: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Nearest-pixel lookup; out-of-image samples read as -1."""
    h, w = img.shape
    xi = np.rint(pts[..., 0]).astype(int)
    yi = np.rint(pts[..., 1]).astype(int)
    ok = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
    out = np.full(xi.shape, -1, dtype=np.int64)
    out[ok] = img[yi[ok], xi[ok]]
    return out


def _flank_vectors(ps: np.ndarray, d_px: np.ndarray, cam: CameraModel, chain: ExtrinsicChain, half: float):
    """Pixel offsets (n, 2, 2) to the flank points ``half`` metres either side of the line.

    Rows whose projection fails are flagged invalid.
    """
    g, ok = cam.pixels_to_ground(np.vstack([ps, ps + d_px]), chain)
    n = len(ps)
    g0, g1 = g[:n], g[n:]
    ok = ok[:n] & ok[n:]
    dw = np.where(ok[:, None], g1 - g0, 1.0)
    L = np.hypot(dw[:, 0], dw[:, 1])
    ok &= L > 1e-12
    nw = np.stack([-dw[:, 1], dw[:, 0]], 1) / np.where(L > 0, L, 1.0)[:, None]
    flank = np.concatenate([g0 + half * nw, g0 - half * nw])
    world = np.concatenate([flank, np.zeros((2 * n, 1))], axis=1)
    q, vis = cam.worlds_to_pixels(np.where(np.isfinite(world), world, 0.0), chain)
    ok &= vis[:n] & vis[n:]
    v = np.stack([q[:n] - ps, q[n:] - ps], axis=1)
    vl = np.hypot(v[..., 0], v[..., 1])
    ok &= np.all(vl > 1e-9, axis=1)
    v = v * np.maximum(1.0, MIN_NORMAL_PX / np.maximum(vl, 1e-9))[..., None]
    return v, ok


def verify_segment(
    seg: LineSegment2D,
    labels: np.ndarray,
    edges: np.ndarray,
    cam: CameraModel,
    chain: ExtrinsicChain,
    cfg: DetectorConfig | None = None,
    dilated_edges: np.ndarray | None = None,
) -> Verification:
    """Count white-centre, green-flank and edge-flank hits at ten points."""
    cfg = cfg or DetectorConfig()
    if seg.length < 10.0:
        raise ValueError("segment shorter than 10 px")
    if dilated_edges is None:
        dilated_edges = ndimage.binary_dilation(edges, structure=np.ones((3, 3), bool))
    d = seg.direction
    nd = np.array([-d[1], d[0]])
    ts = (np.arange(N_SAMPLES) + 0.5) / N_SAMPLES
    ps = np.asarray(seg.p0) + ts[:, None] * np.subtract(seg.p1, seg.p0)
    flanks, ok = _flank_vectors(ps, d, cam, chain, cfg.normal_length)
    centre = ps[:, None, :] + np.array([-1.0, 0.0, 1.0])[None, :, None] * nd
    white_hit = np.any(_label_at(labels, centre) == WHITE, axis=1)
    green_hit = np.ones(N_SAMPLES, dtype=bool)
    edge_hit = np.ones(N_SAMPLES, dtype=bool)
    for side in range(2):
        v = flanks[:, side]
        steps = max(3, int(math.ceil(np.max(np.hypot(v[:, 0], v[:, 1])))) + 1)
        t = np.linspace(0.0, 1.0, steps)
        pts = ps[:, None, :] + t[None, :, None] * v[:, None, :]
        outer = t >= 0.6 - 1e-9
        green_hit &= np.mean(_label_at(labels, pts[:, outer]) == GREEN, axis=1) >= 0.5
        edge_hit &= np.any(_label_at(dilated_edges, pts[:, t > 0]) == 1, axis=1)
    white = int(np.count_nonzero(white_hit & ok))
    green = int(np.count_nonzero(green_hit & ok))
    edge = int(np.count_nonzero(edge_hit & ok))
    tw, tg, te = cfg.verify_thresholds
    return Verification(white >= tw and green >= tg and edge >= te, white, green, edge)


def _white_run_centres(seg: LineSegment2D, labels: np.ndarray, search: float):
    """Per-sample offsets (along the normal) of the white run touching the segment."""
    d = seg.direction
    nd = np.array([-d[1], d[0]])
    offs = np.arange(-search, search + 0.5, 1.0)
    ts, shifts = [], []
    for i in range(N_SAMPLES):
        t = (i + 0.5) / N_SAMPLES
        prof = _label_at(labels, seg.point_at(t) + np.outer(offs, nd)) == WHITE
        if not prof.any():
            continue
        edges = np.flatnonzero(np.diff(np.concatenate([[0], prof.astype(int), [0]])))
        runs = edges.reshape(-1, 2)  # [start, stop)
        gaps = [max(0.0, offs[a], -offs[b - 1]) for a, b in runs]
        j = int(np.argmin(gaps))
        if gaps[j] <= 2.0:
            a, b = runs[j]
            ts.append(t)
            shifts.append(0.5 * (offs[a] + offs[b - 1]))
    return np.array(ts), np.array(shifts), nd


def recenter_segment(seg: LineSegment2D, labels: np.ndarray, search: float = 12.0) -> LineSegment2D | None:
    """Move a Hough segment (which follows one edge of a line) onto the white ridge.

    A line is fitted through the ridge centres found along ten normals; the
    segment ends are projected onto it. None when fewer than half the normals
    find an adjacent white run.
    """
    ts, shifts, nd = _white_run_centres(seg, labels, search)
    if len(ts) < N_SAMPLES // 2:
        return None
    if np.ptp(ts) > 0:
        slope, icpt = np.polyfit(ts, shifts, 1)
        # fall back to a pure shift when the fit is dominated by one outlier
        if np.max(np.abs(shifts - (slope * ts + icpt))) > 1.5:
            slope, icpt = 0.0, float(np.median(shifts))
    else:
        slope, icpt = 0.0, float(shifts[0])
    p0 = np.asarray(seg.p0) + icpt * nd
    p1 = np.asarray(seg.p1) + (icpt + slope) * nd
    if np.allclose(p0, p1):
        return None
    return LineSegment2D(tuple(p0), tuple(p1), seg.frame)


def split_segment(seg: LineSegment2D, max_length: float) -> list[LineSegment2D]:
    """Cut a segment into equal pieces no longer than ``max_length``."""
    k = max(1, int(math.ceil(seg.length / max_length)))
    pts = [seg.point_at(i / k) for i in range(k + 1)]
    return [LineSegment2D(tuple(pts[i]), tuple(pts[i + 1]), seg.frame) for i in range(k)]


def line_edges(hsv: np.ndarray, boundary: FieldBoundary | None, cfg: DetectorConfig) -> np.ndarray:
    region = None
    if boundary is not None:
        region = ndimage.binary_dilation(boundary.mask(hsv.shape[:2]), iterations=BOUNDARY_MARGIN)
    return canny(hsv[..., 2], cfg.canny_low, cfg.canny_high, mask=region)


def detect_lines(
    hsv: np.ndarray,
    labels: np.ndarray,
    boundary: FieldBoundary | None,
    cam: CameraModel,
    chain: ExtrinsicChain,
    cfg: DetectorConfig | None = None,
) -> tuple[list[LineSegment2D], list[Verification]]:
    """Verified pixel segments plus their check counts (unmerged)."""
    cfg = cfg or DetectorConfig()
    edges = line_edges(hsv, boundary, cfg)
    dil = ndimage.binary_dilation(edges, structure=np.ones((3, 3), bool))
    raw = hough_segments(edges, cfg.hough_min_length, cfg.hough_max_gap, cfg.hough_votes, seed=cfg.hough_seed)
    segs: list[LineSegment2D] = []
    report: list[Verification] = []
    # distortion bends long lines, so work on short pieces
    for s in (piece for r in raw for piece in split_segment(r, MAX_PIECE_PX)):
        c = recenter_segment(s, labels)
        if c is None or c.length < 10.0:
            continue
        v = verify_segment(c, labels, edges, cam, chain, cfg, dilated_edges=dil)
        if v.passed:
            segs.append(c)
            report.append(v)
    return segs, report


# --- merging --------------------------------------------------------------------------


def _try_merge(a: LineSegment2D, b: LineSegment2D, angle_tol: float, lateral_tol: float, gap_tol: float):
    da, db = a.direction, b.direction
    cosang = abs(float(da @ db))
    if cosang < math.cos(angle_tol):
        return None
    if da @ db < 0:
        db = -db
    la, lb = a.length, b.length
    d = la * da + lb * db
    d /= np.linalg.norm(d)
    n = np.array([-d[1], d[0]])
    c = (la * a.midpoint + lb * b.midpoint) / (la + lb)
    pts = np.array([a.p0, a.p1, b.p0, b.p1])
    if np.max(np.abs((pts - c) @ n)) > lateral_tol:
        return None
    ta = np.sort((pts[:2] - c) @ d)
    tb = np.sort((pts[2:] - c) @ d)
    gap = max(ta[0], tb[0]) - min(ta[1], tb[1])
    if gap > gap_tol:
        return None
    t = (pts - c) @ d
    return LineSegment2D(tuple(c + t.min() * d), tuple(c + t.max() * d), a.frame)


def merge_segments_passes(
    segs: Sequence[LineSegment2D], angle_tol: float, lateral_tol: float, gap_tol: float
) -> tuple[list[LineSegment2D], int]:
    """Merge to fixpoint; also returns the number of passes that changed something."""
    if angle_tol <= 0 or lateral_tol <= 0 or gap_tol <= 0:
        raise ValueError("merge tolerances must be positive")
    cur = sorted(segs, key=lambda s: (-s.length, s.p0, s.p1))
    passes = 0
    while True:
        changed = False
        out: list[LineSegment2D] = []
        used = [False] * len(cur)
        for i, s in enumerate(cur):
            if used[i]:
                continue
            for j in range(i + 1, len(cur)):
                if used[j]:
                    continue
                m = _try_merge(s, cur[j], angle_tol, lateral_tol, gap_tol)
                if m is not None:
                    s = m
                    used[j] = True
                    changed = True
            out.append(s)
        cur = sorted(out, key=lambda s: (-s.length, s.p0, s.p1))
        if not changed:
            return cur, passes
        passes += 1


def merge_segments(segs, angle_tol: float, lateral_tol: float, gap_tol: float) -> list[LineSegment2D]:
    return merge_segments_passes(segs, angle_tol, lateral_tol, gap_tol)[0]


# --- projection ---------------------------------------------------------------------------


def _to_undistorted(cam: CameraModel, pts: np.ndarray) -> np.ndarray:
    K = cam.intrinsics
    n = cam.undistort_point(pts)
    return np.stack([n[..., 0] * K.focal_x + K.principal_point[0], n[..., 1] * K.focal_y + K.principal_point[1]], -1)


def _from_undistorted(cam: CameraModel, pts: np.ndarray) -> np.ndarray:
    K = cam.intrinsics
    n = np.stack([(pts[..., 0] - K.principal_point[0]) / K.focal_x, (pts[..., 1] - K.principal_point[1]) / K.focal_y], -1)
    return cam.distort_point(n)


def merge_pixel_segments(segs: Sequence[LineSegment2D], cam: CameraModel, cfg: DetectorConfig) -> list[LineSegment2D]:
    """Merge in undistorted pixel space, where straight field lines stay straight."""
    if not segs:
        return []
    und = [LineSegment2D(*(tuple(q) for q in _to_undistorted(cam, np.array([s.p0, s.p1])))) for s in segs]
    merged = merge_segments(und, cfg.merge_angle_tol, cfg.merge_lateral_tol, cfg.merge_gap_tol)
    return [LineSegment2D(*(tuple(q) for q in _from_undistorted(cam, np.array([s.p0, s.p1])))) for s in merged]


def segment_pixels_to_ego(seg: LineSegment2D, cam: CameraModel, chain: ExtrinsicChain, max_range: float) -> LineSegment2D | None:
    """Project a pixel segment to the ground, clipped to ``max_range`` around the robot.

    None when an end misses the ground or nothing is left after clipping.
    """
    pts, ok = cam.pixels_to_ground(np.array([seg.p0, seg.p1]), chain)
    if not ok.all():
        return None
    a, b = pts
    d = b - a
    # |a + t d| <= R  <=>  t within the roots of a quadratic
    A, B, C = d @ d, 2 * (a @ d), a @ a - max_range**2
    if A < 1e-18:
        return None
    disc = B * B - 4 * A * C
    if disc <= 0:
        return None
    sq = math.sqrt(disc)
    t0, t1 = max(0.0, (-B - sq) / (2 * A)), min(1.0, (-B + sq) / (2 * A))
    if t1 - t0 < 1e-9:
        return None
    p0, p1 = a + t0 * d, a + t1 * d
    if np.allclose(p0, p1):
        return None
    return LineSegment2D(tuple(p0), tuple(p1), Frame.EGOCENTRIC)


# --- centre circle -------------------------------------------------------------------------


@dataclass(frozen=True)
class CircleDetection:
    center: tuple[float, float]
    radius: float
    arc_coverage: float


def _piece_inliers(p0, mid, p1, dirs, center, radius, tol, max_tangent_dev):
    """Pieces lying on the circle and running along it (not across it)."""
    on = np.ones(len(mid), dtype=bool)
    for q in (p0, mid, p1):
        on &= np.abs(np.hypot(*(q - center).T) - radius) <= tol
    radial = mid - center
    rn = np.hypot(*radial.T)
    cos_rad = np.abs(np.sum(dirs * radial, axis=1)) / np.maximum(rn, 1e-12)
    return on & (cos_rad <= math.sin(max_tangent_dev))


def detect_centre_circle(
    short_segs: Sequence[LineSegment2D],
    spec: FieldSpec,
    cfg: DetectorConfig | None = None,
    tol: float = 0.08,
    max_tangent_dev: float = math.radians(12.0),
) -> CircleDetection | None:
    """Centre circle from short egocentric segments.

    Hypotheses come from triples of segment midpoints; a segment supports a
    hypothesis when its ends and midpoint lie on the circle and it runs
    tangentially. The hypothesis with the widest arc wins.
    """
    cfg = cfg or DetectorConfig()
    short = [s for s in short_segs if s.length < cfg.short_segment_length]
    if len(short) < 3:
        return None
    p0 = np.array([s.p0 for s in short])
    p1 = np.array([s.p1 for s in short])
    mid = 0.5 * (p0 + p1)
    dirs = np.array([s.direction for s in short])
    r_lo = spec.circle_radius * (1 - cfg.circle_radius_tolerance)
    r_hi = spec.circle_radius * (1 + cfg.circle_radius_tolerance)
    n = len(short)
    if n <= 24:
        triples = [(i, j, k) for i in range(n) for j in range(i + 1, n) for k in range(j + 1, n)]
    else:
        rng = np.random.default_rng(0)
        triples = [tuple(rng.choice(n, 3, replace=False)) for _ in range(1500)]

    def support(center, radius):
        inl = _piece_inliers(p0, mid, p1, dirs, center, radius, tol, max_tangent_dev)
        pts = np.concatenate([p0[inl], mid[inl], p1[inl]])
        return inl, pts

    best = None
    for tri in triples:
        f = kasa_fit(mid[list(tri)])
        if f is None or not (r_lo <= f[1] <= r_hi):
            continue
        inl, pts = support(*f)
        if inl.sum() < 3:
            continue
        key = (arc_coverage(pts, f[0], f[1], tol), int(inl.sum()))
        if best is None or key > best[0]:
            best = (key, pts)
    if best is None or len(best[1]) < 6:
        return None
    ref = kasa_fit(best[1])
    if ref is None or not (r_lo <= ref[1] <= r_hi):
        return None
    inl, pts = support(*ref)
    if inl.sum() < 3:
        return None
    cov = arc_coverage(pts, ref[0], ref[1], tol)
    if not passes_third_rule(cov):
        return None
    return CircleDetection((float(ref[0][0]), float(ref[0][1])), float(ref[1]), cov)


def on_circle(seg: LineSegment2D, circle: CircleDetection, tol: float = 0.1) -> bool:
    """True when both ends and the midpoint of ``seg`` lie on the circle."""
    pts = np.array([seg.p0, seg.midpoint, seg.p1])
    r = np.hypot(*(pts - np.asarray(circle.center)).T)
    return bool(np.all(np.abs(r - circle.radius) <= tol))
