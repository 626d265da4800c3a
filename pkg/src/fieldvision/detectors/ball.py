"""Two-stage ball detection.

Stage one proposes circles from white regions (contour -> RDP -> circle
search -> colour histogram check). Stage two runs a boosted cascade over HOG
features of the candidate patch.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage

from ..camera import CameraError, CameraModel, ExtrinsicChain, camera_pose
from ..imgproc.circle import arc_coverage, kasa_fit, passes_third_rule
from ..imgproc.color import WHITE
from ..imgproc.components import Component, connected_components, outer_contour
from ..imgproc.histogram import Histogram, hsv_histogram, mean_distance
from ..imgproc.hog import HogLayout, hog_descriptor
from ..imgproc.polygon import rdp_simplify_closed, subdivide_polygon
from .types import BallCandidate, DetectorConfig, FieldBoundary

NBLC_MAGIC = b"NBLC"
NBLC_VERSION = 1
AUGMENT_ANGLES = (0.0, 10.0, -10.0, 20.0, -20.0)


class TrainingFailure(RuntimeError):
    pass


class ClassifierFormatError(ValueError):
    pass


class PatchShapeError(ValueError):
    pass


# --- geometry helpers -------------------------------------------------------


def ball_center_from_pixel(cam: CameraModel, chain: ExtrinsicChain, pixel, ball_radius: float) -> np.ndarray:
    """Egocentric ball centre (x, y) for a pixel at the ball's centre."""
    g = cam.pixel_to_ground(pixel, chain)
    cpos = camera_pose(chain).translation
    h = cpos[2]
    return cpos[:2] + (g - cpos[:2]) * (h - ball_radius) / h


def expected_radius(cam: CameraModel, chain: ExtrinsicChain, pixel, ball_radius: float) -> float | None:
    """Projected silhouette radius (px) of a ball whose centre is seen at ``pixel``."""
    try:
        c = ball_center_from_pixel(cam, chain, pixel, ball_radius)
    except CameraError:
        return None
    cpos = camera_pose(chain).translation
    center3 = np.array([c[0], c[1], ball_radius])
    v = center3 - cpos
    dist = float(np.linalg.norm(v))
    if dist <= ball_radius:
        return None
    v /= dist
    u = np.cross(v, [0.0, 0.0, 1.0])
    u /= np.linalg.norm(u)
    w = np.cross(v, u)
    pts = np.vstack([center3 + ball_radius * u, center3 - ball_radius * u, center3 + ball_radius * w, center3 - ball_radius * w])
    px, ok = cam.worlds_to_pixels(pts, chain)
    if not ok.all():
        return None
    return float(0.25 * (np.hypot(*(px[0] - px[1])) + np.hypot(*(px[2] - px[3]))))


# --- patches ------------------------------------------------------------------


def extract_patch(gray: np.ndarray, center, radius: float, size: int = 32, scale: float = 1.25) -> np.ndarray:
    """Square patch of half-width ``scale * radius`` resampled to ``size`` (bilinear, edge-replicate)."""
    half = max(1.0, scale * radius)
    t = (np.arange(size) + 0.5) / size * 2 * half - half
    ys = center[1] + t[:, None] + 0 * t[None, :]
    xs = center[0] + t[None, :] + 0 * t[:, None]
    out = ndimage.map_coordinates(np.asarray(gray, dtype=np.float64), [ys, xs], order=1, mode="nearest")
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def _rotate(patch: np.ndarray, degrees: float) -> np.ndarray:
    if degrees == 0.0:
        return patch.copy()
    n = patch.shape[0]
    c = (n - 1) / 2.0
    a = math.radians(degrees)
    yy, xx = np.mgrid[0:n, 0:n].astype(float)
    # inverse map: output pixel -> source pixel
    xs = math.cos(a) * (xx - c) + math.sin(a) * (yy - c) + c
    ys = -math.sin(a) * (xx - c) + math.cos(a) * (yy - c) + c
    out = ndimage.map_coordinates(patch.astype(np.float64), [ys, xs], order=1, mode="nearest")
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def augment_positive(patch: np.ndarray) -> list[np.ndarray]:
    """Ten variants: rotations {0, +10, -10, +20, -20} degrees, each plain and mirrored."""
    p = np.asarray(patch)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise PatchShapeError("augmentation needs a square gray patch")
    rotated = [_rotate(p, a) for a in AUGMENT_ANGLES]
    mirrored = [_rotate(p[:, ::-1], a) for a in AUGMENT_ANGLES]
    return rotated + mirrored


# --- cascade ----------------------------------------------------------------------


@dataclass(frozen=True)
class Stump:
    feature: int
    threshold: float
    polarity: float  # +1: predict ball when value > threshold
    alpha: float


@dataclass(frozen=True)
class Stage:
    stumps: tuple[Stump, ...]
    threshold: float

    def score(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        s = np.zeros(X.shape[0])
        for st in self.stumps:
            h = np.where(st.polarity * (X[:, st.feature] - st.threshold) > 0, 1.0, -1.0)
            s += st.alpha * h
        return s


@dataclass(frozen=True)
class BallClassifier:
    layout: HogLayout
    stages: tuple[Stage, ...]

    def features(self, patches) -> np.ndarray:
        L = self.layout
        return np.array(
            [hog_descriptor(p, L.cell_size, L.bins, L.block_cells).values for p in patches]
        ).reshape(-1, L.length)

    def evaluate(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(accepted, score) per feature row; score is the last stage margin reached."""
        X = np.atleast_2d(X)
        alive = np.any(X != 0, axis=1)
        score = np.full(X.shape[0], -np.inf)
        for stg in self.stages:
            if not alive.any():
                break
            s = stg.score(X[alive]) - stg.threshold
            idx = np.nonzero(alive)[0]
            score[idx] = s
            alive[idx[s < 0]] = False
        return alive, score


@dataclass
class TrainingReport:
    n_positives: int
    n_negatives: int
    stage_sizes: list[int] = field(default_factory=list)
    stage_fpr: list[float] = field(default_factory=list)


def prepare_positives(patches: Sequence[np.ndarray]) -> list[np.ndarray]:
    out: list[np.ndarray] = []
    for p in patches:
        out.extend(augment_positive(p))
    return out


def _best_stump(X: np.ndarray, order: np.ndarray, y: np.ndarray, w: np.ndarray):
    n, d = X.shape
    sv = np.take_along_axis(X, order, axis=0)
    wp = np.take_along_axis(np.where(y > 0, w, 0.0)[:, None].repeat(d, axis=1), order, axis=0)
    wn = np.take_along_axis(np.where(y < 0, w, 0.0)[:, None].repeat(d, axis=1), order, axis=0)
    cp = np.vstack([np.zeros((1, d)), np.cumsum(wp, axis=0)])  # positive weight at or below split
    cn = np.vstack([np.zeros((1, d)), np.cumsum(wn, axis=0)])
    tp, tn = cp[-1], cn[-1]
    err_pos = cp + (tn - cn)  # polarity +1: predict ball above split
    err_neg = cn + (tp - cp)
    # valid splits: before first, after last, or between distinct values
    valid = np.ones((n + 1, d), dtype=bool)
    valid[1:-1] = sv[1:] > sv[:-1]
    err_pos = np.where(valid, err_pos, np.inf)
    err_neg = np.where(valid, err_neg, np.inf)
    ip = np.unravel_index(np.argmin(err_pos), err_pos.shape)
    ineg = np.unravel_index(np.argmin(err_neg), err_neg.shape)
    if err_pos[ip] <= err_neg[ineg]:
        (k, f), pol, err = ip, 1.0, float(err_pos[ip])
    else:
        (k, f), pol, err = ineg, -1.0, float(err_neg[ineg])
    col = sv[:, f]
    if k == 0:
        thr = col[0] - 1e-6
    elif k == n:
        thr = col[-1] + 1e-6
    else:
        thr = 0.5 * (col[k - 1] + col[k])
    return int(f), float(thr), pol, err


def train_ball_classifier(
    positives: Sequence[np.ndarray],
    negatives: Sequence[np.ndarray],
    stages: int = 4,
    layout: HogLayout = HogLayout(),
    max_stumps: int = 30,
    stage_fpr: float = 0.3,
    min_stage_tpr: float = 0.99,
    seed: int = 0,
    max_negatives: int = 6000,
    augment: bool = True,
) -> tuple[BallClassifier, TrainingReport]:
    """Discrete-AdaBoost stump cascade over HOG features.

    Positives are augmented tenfold unless ``augment`` is false. Each stage's
    threshold keeps at least ``min_stage_tpr`` of the positives reaching it.
    """
    pos = prepare_positives(positives) if augment else list(positives)
    if len(pos) < 50:
        raise TrainingFailure(f"need at least 50 positives after augmentation, got {len(pos)}")
    if len(negatives) < 200:
        raise TrainingFailure(f"need at least 200 negatives, got {len(negatives)}")
    rng = np.random.default_rng(seed)
    proto = BallClassifier(layout, ())
    Xp = proto.features(pos)
    Xn_all = proto.features(negatives)
    report = TrainingReport(len(pos), len(negatives))

    built: list[Stage] = []
    Xn = Xn_all
    for _ in range(stages):
        if len(Xn) == 0:
            break
        if len(Xn) > max_negatives:
            Xn = Xn[np.sort(rng.choice(len(Xn), max_negatives, replace=False))]
        X = np.vstack([Xp, Xn])
        y = np.concatenate([np.ones(len(Xp)), -np.ones(len(Xn))])
        w = np.where(y > 0, 0.5 / len(Xp), 0.5 / len(Xn))
        order = np.argsort(X, axis=0, kind="stable")
        stumps: list[Stump] = []
        thr = 0.0
        for t in range(max_stumps):
            w = w / w.sum()
            f, sthr, pol, err = _best_stump(X, order, y, w)
            if t == 0 and 1.0 - err < 0.6:
                raise TrainingFailure(f"best weak learner reaches only {1 - err:.3f} weighted accuracy")
            if err >= 0.5:
                break
            err = max(err, 1e-10)
            alpha = 0.5 * math.log((1 - err) / err)
            stumps.append(Stump(f, sthr, pol, alpha))
            h = np.where(pol * (X[:, f] - sthr) > 0, 1.0, -1.0)
            w = w * np.exp(-alpha * y * h)
            stage = Stage(tuple(stumps), 0.0)
            sp = stage.score(Xp)
            k = int(math.floor((1.0 - min_stage_tpr) * len(sp)))
            thr = float(np.sort(sp)[k]) - 1e-9
            fpr = float(np.mean(stage.score(Xn) >= thr))
            if fpr <= stage_fpr:
                break
        stage = Stage(tuple(stumps), thr)
        built.append(stage)
        fpr = float(np.mean(stage.score(Xn) >= thr))
        report.stage_sizes.append(len(stumps))
        report.stage_fpr.append(fpr)
        Xp = Xp[stage.score(Xp) >= thr]
        Xn = Xn[stage.score(Xn) >= thr]
    return BallClassifier(layout, tuple(built)), report


def classify_ball(candidate: BallCandidate, model: BallClassifier) -> tuple[bool, float]:
    X = model.features([candidate.patch])
    ok, score = model.evaluate(X)
    return bool(ok[0]), float(score[0])


# --- NBLC serialization -------------------------------------------------------------


def save_classifier(model: BallClassifier) -> bytes:
    L = model.layout
    out = [NBLC_MAGIC, struct.pack("<I", NBLC_VERSION)]
    out.append(struct.pack("<4I", L.patch_size, L.cell_size, L.bins, L.block_cells))
    out.append(struct.pack("<I", len(model.stages)))
    for stg in model.stages:
        out.append(struct.pack("<Id", len(stg.stumps), stg.threshold))
        for st in stg.stumps:
            out.append(struct.pack("<4d", float(st.feature), st.threshold, st.polarity, st.alpha))
    return b"".join(out)


def load_classifier(data: bytes) -> BallClassifier:
    if data[:4] != NBLC_MAGIC:
        raise ClassifierFormatError("not an NBLC classifier file")
    try:
        (version,) = struct.unpack_from("<I", data, 4)
        if version != NBLC_VERSION:
            raise ClassifierFormatError(f"unsupported classifier version {version}")
        pos = 8
        ps, cs, bins, bc = struct.unpack_from("<4I", data, pos)
        pos += 16
        (nstages,) = struct.unpack_from("<I", data, pos)
        pos += 4
        stages = []
        for _ in range(nstages):
            n, thr = struct.unpack_from("<Id", data, pos)
            pos += 12
            stumps = []
            for _ in range(n):
                f, t, p, a = struct.unpack_from("<4d", data, pos)
                pos += 32
                stumps.append(Stump(int(f), t, p, a))
            stages.append(Stage(tuple(stumps), thr))
    except struct.error as e:
        raise ClassifierFormatError(f"truncated classifier file: {e}") from None
    if pos != len(data):
        raise ClassifierFormatError("trailing bytes in classifier file")
    return BallClassifier(HogLayout(ps, cs, bins, bc), tuple(stages))


# --- stage one ---------------------------------------------------------------------------


def _circle_search(pts: np.ndarray, verts: np.ndarray, r_lo: float, r_hi: float, tol: float,
                   trials: int, rng: np.random.Generator):
    """Best (centre, radius, coverage) among a direct fit and 3-point hypotheses."""
    best = None
    fit = kasa_fit(pts)
    if fit is not None and r_lo <= fit[1] <= r_hi:
        cov = arc_coverage(pts, fit[0], fit[1], tol)
        best = (fit[0], fit[1], cov)
        if cov >= 0.75:
            return best
    nv = len(verts)
    if nv < 3:
        return best
    if math.comb(nv, 3) <= trials:
        triples = [(i, j, k) for i in range(nv) for j in range(i + 1, nv) for k in range(j + 1, nv)]
    else:
        triples = [tuple(rng.choice(nv, 3, replace=False)) for _ in range(trials)]
    for tri in triples:
        f3 = kasa_fit(verts[list(tri)])
        if f3 is None or not (r_lo <= f3[1] <= r_hi):
            continue
        d = np.abs(np.hypot(*(pts - f3[0]).T) - f3[1])
        inl = pts[d <= tol]
        if len(inl) < 6:
            continue
        ref = kasa_fit(inl)
        if ref is None or not (r_lo <= ref[1] <= r_hi):
            continue
        cov = arc_coverage(pts, ref[0], ref[1], tol)
        if best is None or cov > best[2]:
            best = (ref[0], ref[1], cov)
    return best


def _evaluate_region(contour, hsv, gray, reference, cam, chain, cfg, r_exp, rng, grid):
    """Circle + histogram test on one outline; returns a candidate or None."""
    lo_f, hi_f = cfg.ball_radius_range
    if len(contour) < 6:
        return None
    verts = rdp_simplify_closed(contour, cfg.ball_rdp_epsilon)
    if len(verts) < 3:
        return None
    pts = subdivide_polygon(verts, 1.0)
    if len(pts) < 6:
        return None
    r_lo = max(cfg.ball_min_radius_px * lo_f, lo_f * r_exp)
    tol = max(1.0, 0.15 * r_exp)
    res = _circle_search(pts, verts, r_lo, hi_f * r_exp, tol, cfg.ransac_trials, rng)
    if res is None or not passes_third_rule(res[2]):
        return None
    center, radius, cov = res
    # re-check the expected size at the fitted centre
    r_exp_c = expected_radius(cam, chain, center, cfg.ball_radius) or r_exp
    if not (lo_f * r_exp_c <= radius <= hi_f * r_exp_c):
        return None
    yy, xx = grid
    disk = (xx - center[0]) ** 2 + (yy - center[1]) ** 2 <= (0.85 * radius) ** 2
    if not disk.any():
        return None
    dist = mean_distance(hsv_histogram(hsv, disk), reference)
    if dist > cfg.ball_histogram_threshold:
        return None
    patch = extract_patch(gray, center, radius, 32, cfg.ball_patch_scale)
    return BallCandidate((float(center[0]), float(center[1])), float(radius), cov, dist, patch, r_exp_c)


def _seed_outlines(comp, cam, chain, cfg):
    """Split a large white region at ball-sized cores (e.g. a ball touching a line).

    Dark pattern gaps are closed, then local maxima of the distance transform
    that are thick enough for a ball at that image position become seeds. Each
    seed yields the outline of the region restricted to a disk around it.
    """
    m = comp.mask()
    r0, c0 = comp.bbox[0], comp.bbox[1]
    closed = m.copy()
    for hole in connected_components(ndimage.binary_fill_holes(m) & ~m, connectivity=4):
        hx, hy = hole.centroid
        r_h = expected_radius(cam, chain, (hx + c0, hy + r0), cfg.ball_radius)
        if r_h is not None and hole.area <= math.pi * (0.6 * r_h) ** 2:
            closed[hole.rows, hole.cols] = True
    dt = ndimage.distance_transform_edt(closed)
    peaks = (dt == ndimage.maximum_filter(dt, size=5)) & (dt >= 2.0)
    ys, xs = np.nonzero(peaks)
    order = np.argsort(-dt[ys, xs], kind="stable")
    chosen: list[tuple[float, float, float]] = []
    for i in order[:200]:
        x, y = xs[i] + c0, ys[i] + r0
        if any(math.hypot(x - a, y - b) < r for a, b, r in chosen):
            continue
        r_exp = expected_radius(cam, chain, (x, y), cfg.ball_radius)
        if r_exp is None or dt[ys[i], xs[i]] < 0.55 * r_exp or dt[ys[i], xs[i]] > 1.3 * r_exp:
            continue
        chosen.append((x, y, r_exp))
    out = []
    hh, ww = m.shape
    gy, gx = np.mgrid[0:hh, 0:ww]
    for x, y, r_exp in chosen:
        keep = m & ((gx + c0 - x) ** 2 + (gy + r0 - y) ** 2 <= (1.5 * r_exp) ** 2)
        sub = connected_components(keep, connectivity=8, min_area=6)
        if sub:
            b = sub[0]
            shifted = Component(b.label, b.rows + r0, b.cols + c0,
                                (b.bbox[0] + r0, b.bbox[1] + c0, b.bbox[2] + r0, b.bbox[3] + c0))
            out.append((outer_contour(shifted), r_exp))
    return out


def detect_ball_candidates(
    hsv: np.ndarray,
    labels: np.ndarray,
    boundary: FieldBoundary | None,
    reference: Sequence[Histogram],
    cam: CameraModel,
    chain: ExtrinsicChain,
    cfg: DetectorConfig | None = None,
) -> list[BallCandidate]:
    cfg = cfg or DetectorConfig()
    h, w = labels.shape
    white = labels == WHITE
    if boundary is not None:
        inside = ndimage.binary_dilation(boundary.mask((h, w)), iterations=6)
        white &= inside
    rng = np.random.default_rng(0)
    gray = hsv[..., 2]
    hi_f = cfg.ball_radius_range[1]
    grid = np.mgrid[0:h, 0:w]
    found: list[BallCandidate] = []
    for comp in connected_components(white, connectivity=8, min_area=6):
        r_exp = expected_radius(cam, chain, comp.centroid, cfg.ball_radius)
        r0, c0, r1, c1 = comp.bbox
        extent = max(r1 - r0, c1 - c0)
        if r_exp is not None and extent >= 1.2 * cfg.ball_radius_range[0] * r_exp:
            cand = _evaluate_region(outer_contour(comp), hsv, gray, reference, cam, chain, cfg, r_exp, rng, grid)
            if cand is not None:
                found.append(cand)
                continue
        if r_exp is None or extent > 2.2 * hi_f * r_exp:
            for contour, r_seed in _seed_outlines(comp, cam, chain, cfg):
                cand = _evaluate_region(contour, hsv, gray, reference, cam, chain, cfg, r_seed, rng, grid)
                if cand is not None:
                    found.append(cand)
    # suppress overlapping duplicates, keeping the closest colour match
    found.sort(key=lambda c: c.histogram_distance)
    kept: list[BallCandidate] = []
    for c in found:
        if all(math.hypot(c.center[0] - k.center[0], c.center[1] - k.center[1]) > k.radius for k in kept):
            kept.append(c)
    return kept


def reference_histograms(samples: Sequence[tuple[np.ndarray, tuple[float, float], float]]) -> tuple[Histogram, ...]:
    """Average ball histograms over (hsv image, centre, radius) samples."""
    acc = None
    for hsv, center, radius in samples:
        h, w = hsv.shape[:2]
        yy, xx = np.mgrid[0:h, 0:w]
        disk = (xx - center[0]) ** 2 + (yy - center[1]) ** 2 <= (0.85 * radius) ** 2
        if not disk.any():
            continue
        hs = hsv_histogram(hsv, disk)
        vals = [x.bins for x in hs]
        acc = vals if acc is None else [a + v for a, v in zip(acc, vals)]
    if acc is None:
        raise ValueError("no usable reference samples")
    return tuple(Histogram(a / a.sum(), ch) for a, ch in zip(acc, "HSV"))
