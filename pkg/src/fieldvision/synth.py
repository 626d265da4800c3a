"""Ray-cast renderer of the soccer field producing images with exact ground truth.

Every pixel (optionally super-sampled) is traced through the distortion
model into the field frame and intersected with the ground plane, the ball,
the goal posts and box occluders. Colours carry grass noise, low-frequency
mottling, line wear and a contact shadow under the ball.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numba
import numpy as np
from scipy import ndimage

from .camera import CameraModel, ExtrinsicChain, camera_pose
from .geometry import FieldSpec, Pose2D, field_line_segments, field_to_ego, rot_z, RigidTransform

GRASS, LINE, BALL, POST, OCCLUDER, BACKGROUND = 0, 1, 2, 3, 4, 5
CLASS_NAMES = {GRASS: "grass", LINE: "line", BALL: "ball", POST: "post", OCCLUDER: "occluder", BACKGROUND: "background"}

BALL_RADIUS = 0.095  # FIFA size 3
_PATCH_COS = math.cos(0.30)
_LIGHT = np.array([0.3, 0.2, 0.93]) / np.linalg.norm([0.3, 0.2, 0.93])


class InvalidSceneError(ValueError):
    pass


@dataclass(frozen=True)
class Occluder:
    position: tuple[float, float]  # field frame, footprint centre
    size: tuple[float, float, float] = (0.3, 0.2, 0.6)
    color: tuple[int, int, int] = (40, 40, 45)


@dataclass(frozen=True)
class SceneConfig:
    pose: Pose2D = field(default_factory=Pose2D)
    chain: ExtrinsicChain = field(default_factory=lambda: ExtrinsicChain(neck_tilt=math.radians(30)))
    ball: tuple[float, float] | None = None
    occluders: tuple[Occluder, ...] = ()
    lighting_gain: float = 1.0
    lighting_offset: float = 0.0
    grass_noise: float = 8.0
    seed: int = 0
    texture_seed: int = 0
    supersample: int = 2
    blur: int = 0
    grass_color: tuple[int, int, int] = (50, 135, 55)
    line_color: tuple[int, int, int] = (235, 235, 230)
    background_color: tuple[int, int, int] = (130, 125, 135)
    ball_color: tuple[int, int, int] = (245, 245, 240)
    ball_patch_color: tuple[int, int, int] = (30, 30, 35)
    post_color: tuple[int, int, int] = (240, 240, 240)
    line_wear: float = 0.15


@dataclass
class GroundTruth:
    pose: Pose2D
    mask: np.ndarray  # uint8 class ids
    field_mask: np.ndarray  # ground hit inside the carpet, objects ignored
    landmarks: list[dict]

    def landmark(self, kind: str) -> list[dict]:
        return [lm for lm in self.landmarks if lm["kind"] == kind]


def _world_from_camera(cfg: SceneConfig) -> RigidTransform:
    robot = RigidTransform(rot_z(cfg.pose.theta), (cfg.pose.x, cfg.pose.y, 0.0))
    return robot @ camera_pose(cfg.chain)


def carpet_mask(pose: Pose2D, chain, cam: CameraModel, spec: FieldSpec) -> np.ndarray:
    """Pixels whose centre ray reaches the carpet when every object is ignored."""
    world = RigidTransform(rot_z(pose.theta), (pose.x, pose.y, 0.0)) @ camera_pose(chain)
    o = world.translation
    d = cam.ray_grid(1).reshape(-1, 3) @ world.rotation.T
    down = d[:, 2] < -1e-12
    t = np.where(down, -o[2] / np.where(down, d[:, 2], -1.0), 0.0)
    cx, cy = spec.carpet_half_extent
    inside = down & (np.abs(o[0] + t * d[:, 0]) <= cx) & (np.abs(o[1] + t * d[:, 1]) <= cy)
    return inside.reshape(cam.height, cam.width)


def _segment_boxes(spec: FieldSpec) -> np.ndarray:
    hw = spec.line_width / 2
    boxes = []
    for s in field_line_segments(spec):
        (x0, y0), (x1, y1) = s.p0, s.p1
        if abs(x0 - x1) > 1e-12 and abs(y0 - y1) > 1e-12:
            raise InvalidSceneError("renderer supports axis-aligned field lines only")
        boxes.append((min(x0, x1) - hw, max(x0, x1) + hw, min(y0, y1) - hw, max(y0, y1) + hw))
    for sx in (1.0, -1.0):  # penalty mark crosses
        px = sx * spec.penalty_mark_x
        boxes.append((px - 0.05, px + 0.05, -hw, hw))
        boxes.append((px - hw, px + hw, -0.05, 0.05))
    return np.array(boxes)


def _random_rotation(rng: np.random.Generator) -> np.ndarray:
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def _icosahedron() -> np.ndarray:
    g = (1 + 5**0.5) / 2
    v = []
    for a in (-1, 1):
        for b in (-g, g):
            v += [(0, a, b), (a, b, 0), (b, 0, a)]
    v = np.array(v, dtype=float)
    return v / np.linalg.norm(v, axis=1, keepdims=True)


_ICO = _icosahedron()


@numba.njit(cache=True)
def _trace_kernel(origin, dirs, ball, posts, post_r, post_h, occ_lo, occ_hi, carpet, boxes, circle_r, hw):
    n = dirs.shape[0]
    cls = np.full(n, BACKGROUND, dtype=np.uint8)
    obj = np.full(n, -1, dtype=np.int16)
    line_id = np.full(n, -1, dtype=np.int16)
    t_out = np.full(n, np.inf)
    gxy = np.zeros((n, 2))
    on_carpet = np.zeros(n, dtype=np.bool_)
    ox, oy, oz = origin[0], origin[1], origin[2]
    for i in range(n):
        dx, dy, dz = dirs[i, 0], dirs[i, 1], dirs[i, 2]
        t_best = np.inf
        c = BACKGROUND
        o = -1
        if ball[0] > 0:
            bx, by, bz, br = ball[1], ball[2], ball[3], ball[3]
            ocx, ocy, ocz = ox - bx, oy - by, oz - bz
            a = dx * dx + dy * dy + dz * dz
            b = dx * ocx + dy * ocy + dz * ocz
            disc = b * b - a * (ocx * ocx + ocy * ocy + ocz * ocz - br * br)
            if disc >= 0:
                t = (-b - np.sqrt(disc)) / a
                if t > 0 and t < t_best:
                    t_best = t
                    c = BALL
        a2 = dx * dx + dy * dy
        if a2 > 1e-15:
            for k in range(posts.shape[0]):
                px, py = ox - posts[k, 0], oy - posts[k, 1]
                b = dx * px + dy * py
                disc = b * b - a2 * (px * px + py * py - post_r * post_r)
                if disc >= 0:
                    t = (-b - np.sqrt(disc)) / a2
                    z = oz + t * dz
                    if t > 0 and z >= 0 and z <= post_h and t < t_best:
                        t_best = t
                        c = POST
                        o = k
        for k in range(occ_lo.shape[0]):
            tmin = -np.inf
            tmax = np.inf
            ok = True
            for ax in range(3):
                d = dirs[i, ax]
                org = origin[ax]
                if abs(d) < 1e-15:
                    if org < occ_lo[k, ax] or org > occ_hi[k, ax]:
                        ok = False
                        break
                else:
                    t1 = (occ_lo[k, ax] - org) / d
                    t2 = (occ_hi[k, ax] - org) / d
                    if t1 > t2:
                        t1, t2 = t2, t1
                    tmin = max(tmin, t1)
                    tmax = min(tmax, t2)
            if ok and tmax >= tmin and tmin > 0 and tmin < t_best:
                t_best = tmin
                c = OCCLUDER
                o = k
        if dz < -1e-12:
            tg = -oz / dz
            gx = ox + tg * dx
            gy = oy + tg * dy
            gxy[i, 0] = gx
            gxy[i, 1] = gy
            inside = abs(gx) <= carpet[0] and abs(gy) <= carpet[1]
            on_carpet[i] = inside
            if tg < t_best:
                t_best = tg
                o = -1
                if inside:
                    c = GRASS
                    for k in range(boxes.shape[0]):
                        if gx >= boxes[k, 0] and gx <= boxes[k, 1] and gy >= boxes[k, 2] and gy <= boxes[k, 3]:
                            line_id[i] = k
                            break
                    if line_id[i] < 0 and abs(np.sqrt(gx * gx + gy * gy) - circle_r) <= hw:
                        line_id[i] = boxes.shape[0]
                    if line_id[i] >= 0:
                        c = LINE
                else:
                    c = BACKGROUND
        cls[i] = c
        obj[i] = o
        t_out[i] = t_best
    return cls, obj, line_id, t_out, gxy, on_carpet


def _trace(origin: np.ndarray, dirs: np.ndarray, cfg: SceneConfig, spec: FieldSpec, boxes: np.ndarray):
    """Classify rays. Returns dict with class ids and hit data."""
    ball = np.zeros(4)
    if cfg.ball is not None:
        ball[:] = (1.0, cfg.ball[0], cfg.ball[1], BALL_RADIUS)
    posts = np.array(spec.goal_post_positions, dtype=float).reshape(-1, 2)
    occ_lo = np.array(
        [[o.position[0] - o.size[0] / 2, o.position[1] - o.size[1] / 2, 0.0] for o in cfg.occluders], dtype=float
    ).reshape(-1, 3)
    occ_hi = np.array(
        [[o.position[0] + o.size[0] / 2, o.position[1] + o.size[1] / 2, o.size[2]] for o in cfg.occluders],
        dtype=float,
    ).reshape(-1, 3)
    cls, obj, line_id, t, gxy, on_carpet = _trace_kernel(
        np.ascontiguousarray(origin, dtype=float),
        np.ascontiguousarray(dirs),
        ball,
        posts,
        float(spec.goal_post_radius),
        float(spec.goal_post_height),
        occ_lo,
        occ_hi,
        np.array(spec.carpet_half_extent, dtype=float),
        np.ascontiguousarray(boxes, dtype=float),
        float(spec.circle_radius),
        float(spec.line_width / 2),
    )
    return {"cls": cls, "obj": obj, "line_id": line_id, "t": t, "ground": gxy, "on_carpet": on_carpet}


class _Texture:
    """Static low-frequency field texture (mottling and line wear)."""

    def __init__(self, seed: int):
        rng = np.random.default_rng(seed)
        self.k = rng.uniform(2.0, 9.0, size=(6, 2)) * rng.choice([-1, 1], size=(6, 2))
        self.phase = rng.uniform(0, 2 * np.pi, size=6)



@numba.njit(cache=True)
def _shade_kernel(cls, obj, line_id, t, gxy, origin, dirs, tex_k, tex_phase, grass, white, wear_amp, ball,
                  ball_rot, ico, patch_cos, ball_col, patch_col, light, bg, post_col, occ_cols):
    n = cls.shape[0]
    rgb = np.zeros((n, 3))
    m = tex_phase.shape[0]
    for i in range(n):
        c = cls[i]
        if c == GRASS or c == LINE:
            x, y = gxy[i, 0], gxy[i, 1]
            mott = 0.0
            for j in range(m):
                mott += np.sin(x * tex_k[j, 0] + y * tex_k[j, 1] + tex_phase[j])
            mott /= m
            f = 1.0 + 0.12 * mott
            r, g, b = grass[0] * f, grass[1] * f, grass[2] * f
            if c == LINE:
                w2 = 0.0
                for j in range(m):
                    w2 += np.sin(3.1 * x * tex_k[j, 0] + 3.1 * y * tex_k[j, 1] + tex_phase[j] + 7.0)
                w2 /= m
                wear = 1.0 - wear_amp * (0.5 + 0.5 * w2)
                wear = min(max(wear, 0.0), 1.0)
                r = r * (1 - wear) + white[0] * wear
                g = g * (1 - wear) + white[1] * wear
                b = b * (1 - wear) + white[2] * wear
            if ball[0] > 0:
                d = np.sqrt((x - ball[1]) ** 2 + (y - ball[2]) ** 2) / (ball[3] * 1.3)
                sh = min(max(0.45 + 0.55 * d * d, 0.45), 1.0)
                r, g, b = r * sh, g * sh, b * sh
            rgb[i, 0], rgb[i, 1], rgb[i, 2] = r, g, b
        elif c == BACKGROUND:
            rgb[i, 0], rgb[i, 1], rgb[i, 2] = bg[0], bg[1], bg[2]
        elif c == POST:
            rgb[i, 0], rgb[i, 1], rgb[i, 2] = post_col[0], post_col[1], post_col[2]
        elif c == OCCLUDER:
            k = obj[i]
            rgb[i, 0], rgb[i, 1], rgb[i, 2] = occ_cols[k, 0], occ_cols[k, 1], occ_cols[k, 2]
        elif c == BALL:
            nx = (origin[0] + t[i] * dirs[i, 0] - ball[1]) / ball[3]
            ny = (origin[1] + t[i] * dirs[i, 1] - ball[2]) / ball[3]
            nz = (origin[2] + t[i] * dirs[i, 2] - ball[3]) / ball[3]
            lam = nx * light[0] + ny * light[1] + nz * light[2]
            shade = 0.72 + 0.28 * min(max(lam, 0.0), 1.0)
            lx = nx * ball_rot[0, 0] + ny * ball_rot[1, 0] + nz * ball_rot[2, 0]
            ly = nx * ball_rot[0, 1] + ny * ball_rot[1, 1] + nz * ball_rot[2, 1]
            lz = nx * ball_rot[0, 2] + ny * ball_rot[1, 2] + nz * ball_rot[2, 2]
            best = -2.0
            for j in range(ico.shape[0]):
                v = lx * ico[j, 0] + ly * ico[j, 1] + lz * ico[j, 2]
                if v > best:
                    best = v
            col = patch_col if best > patch_cos else ball_col
            rgb[i, 0], rgb[i, 1], rgb[i, 2] = col[0] * shade, col[1] * shade, col[2] * shade
    return rgb


def _shade(trace, origin, dirs, cfg: SceneConfig, spec: FieldSpec, ball_rot):
    tex = _Texture(cfg.texture_seed)
    ball = np.zeros(4)
    if cfg.ball is not None:
        ball[:] = (1.0, cfg.ball[0], cfg.ball[1], BALL_RADIUS)
    occ_cols = np.array([o.color for o in cfg.occluders], dtype=float).reshape(-1, 3)
    f = lambda c: np.asarray(c, dtype=float)  # noqa: E731
    return _shade_kernel(
        trace["cls"], trace["obj"], trace["line_id"], trace["t"], trace["ground"],
        np.asarray(origin, float), np.ascontiguousarray(dirs), tex.k, tex.phase,
        f(cfg.grass_color), f(cfg.line_color), float(cfg.line_wear), ball, np.ascontiguousarray(ball_rot),
        _ICO, _PATCH_COS, f(cfg.ball_color), f(cfg.ball_patch_color), _LIGHT, f(cfg.background_color),
        f(cfg.post_color) * 0.97, occ_cols,
    )


def _landmarks(cfg: SceneConfig, cam: CameraModel, spec: FieldSpec, center_trace, boxes) -> list[dict]:
    pose = cfg.pose
    lm: list[dict] = []
    cls = center_trace["cls"]
    lid = center_trace["line_id"]
    obj = center_trace["obj"]
    segs = field_line_segments(spec)
    for k, s in enumerate(segs):
        e0, e1 = field_to_ego(pose, s.p0), field_to_ego(pose, s.p1)
        lm.append(
            {
                "kind": "line",
                "id": k,
                "field": [list(s.p0), list(s.p1)],
                "ego": [e0.tolist(), e1.tolist()],
                "pixels": int(np.count_nonzero((cls == LINE) & (lid == k))),
            }
        )
    for k in range(len(segs), len(boxes)):
        lm.append(
            {
                "kind": "penalty_mark",
                "id": k,
                "pixels": int(np.count_nonzero((cls == LINE) & (lid == k))),
            }
        )
    lm.append(
        {
            "kind": "circle",
            "id": len(boxes),
            "field": [0.0, 0.0],
            "ego": field_to_ego(pose, (0.0, 0.0)).tolist(),
            "radius": spec.circle_radius,
            "pixels": int(np.count_nonzero((cls == LINE) & (lid == len(boxes)))),
        }
    )
    world_to_ego = lambda p: field_to_ego(pose, p)  # noqa: E731
    for k, (px, py) in enumerate(spec.goal_post_positions):
        ego = world_to_ego((px, py))
        pix, ok = cam.worlds_to_pixels(np.array([[ego[0], ego[1], 0.0]]), cfg.chain)
        lm.append(
            {
                "kind": "post",
                "id": k,
                "field": [px, py],
                "ego": ego.tolist(),
                "base_pixel": pix[0].tolist() if ok[0] else None,
                "pixels": int(np.count_nonzero((cls == POST) & (obj == k))),
            }
        )
    if cfg.ball is not None:
        ego = world_to_ego(cfg.ball)
        center3 = np.array([ego[0], ego[1], BALL_RADIUS])
        cp, radius = ball_image_circle(cam, cfg.chain, center3)
        lm.append(
            {
                "kind": "ball",
                "id": 0,
                "field": list(cfg.ball),
                "ego": ego.tolist(),
                "pixel": cp.tolist() if cp is not None else None,
                "radius_px": radius,
                "pixels": int(np.count_nonzero(cls == BALL)),
            }
        )
    return lm


def ball_image_circle(cam: CameraModel, chain: ExtrinsicChain, center3: np.ndarray):
    """Projected centre pixel and mean silhouette radius of a ball (egocentric centre)."""
    cpose = camera_pose(chain)
    v = center3 - cpose.translation
    dist = np.linalg.norm(v)
    if dist <= BALL_RADIUS:
        return None, 0.0
    v = v / dist
    u = np.cross(v, [0.0, 0.0, 1.0])
    if np.linalg.norm(u) < 1e-9:
        u = np.cross(v, [0.0, 1.0, 0.0])
    u /= np.linalg.norm(u)
    w = np.cross(v, u)
    # silhouette circle of the sphere seen from the camera
    sin_a = BALL_RADIUS / dist
    cos_a = math.sqrt(1 - sin_a**2)
    rho = BALL_RADIUS * cos_a
    back = center3 - v * BALL_RADIUS * sin_a
    phis = np.linspace(0, 2 * np.pi, 24, endpoint=False)
    ring = back + rho * (np.cos(phis)[:, None] * u + np.sin(phis)[:, None] * w)
    pts = np.vstack([center3[None, :], ring])
    px, ok = cam.worlds_to_pixels(pts, chain)
    if not ok.all():
        return None, 0.0
    c = px[1:].mean(axis=0)
    r = float(np.mean(np.hypot(*(px[1:] - c).T)))
    return c, r


def box_blur(img: np.ndarray, k: int) -> np.ndarray:
    if k <= 1:
        return img
    out = ndimage.uniform_filter(img.astype(np.float64), size=(k, k, 1), mode="nearest")
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def render(cfg: SceneConfig, cam: CameraModel, spec: FieldSpec) -> tuple[np.ndarray, GroundTruth]:
    """Render one frame; identical inputs give byte-identical output."""
    spec.validate()
    world = _world_from_camera(cfg)
    origin = world.translation
    if origin[2] <= 0:
        raise InvalidSceneError("camera must be above the ground")
    h, w = cam.height, cam.width
    ss = max(1, int(cfg.supersample))
    rng = np.random.default_rng(cfg.seed)
    ball_rot = _random_rotation(rng)
    boxes = _segment_boxes(spec)

    rays = cam.ray_grid(ss).reshape(-1, 3)
    dirs = rays @ world.rotation.T
    tr = _trace(origin, dirs, cfg, spec, boxes)
    rgb = _shade(tr, origin, dirs, cfg, spec, ball_rot)
    rgb = rgb.reshape(h, ss, w, ss, 3).mean(axis=(1, 3))

    if ss == 1:
        ctr = tr
    else:
        cdirs = cam.ray_grid(1).reshape(-1, 3) @ world.rotation.T
        ctr = _trace(origin, cdirs, cfg, spec, boxes)
    mask = ctr["cls"].reshape(h, w)

    noise = rng.normal(0.0, cfg.grass_noise, size=(h, w)) if cfg.grass_noise > 0 else np.zeros((h, w))
    rgb = rgb + noise[..., None] * np.array([0.6, 1.0, 0.6])
    rgb = rgb * cfg.lighting_gain + cfg.lighting_offset
    img = np.clip(np.rint(rgb), 0, 255).astype(np.uint8)
    if cfg.blur > 1:
        img = box_blur(img, cfg.blur)

    gt = GroundTruth(
        pose=cfg.pose,
        mask=mask.astype(np.uint8),
        field_mask=ctr["on_carpet"].reshape(h, w).copy(),
        landmarks=_landmarks(cfg, cam, spec, ctr, boxes),
    )
    return img, gt


@dataclass
class Trajectory:
    frames: list[tuple[np.ndarray, GroundTruth]]
    odometry: list[tuple[float, float, float]]  # per frame, from previous frame (first is zero)
    magnetometer: list[float]


def render_trajectory(
    poses: Sequence[Pose2D],
    template: SceneConfig,
    cam: CameraModel,
    spec: FieldSpec,
    odometry_noise: float = 0.0,
    magnetometer_bias: float = 0.0,
    magnetometer_noise: float = 0.0,
    seed: int = 0,
    render_images: bool = True,
) -> Trajectory:
    """Render a pose sequence and derive noisy odometry and magnetometer streams."""
    if len(poses) < 1:
        raise ValueError("trajectory needs at least one pose")
    rng = np.random.default_rng(seed)
    frames = []
    odo = [(0.0, 0.0, 0.0)]
    mag = []
    for i, p in enumerate(poses):
        if i > 0:
            dx, dy, dth = p.relative_to(poses[i - 1])
            f = 1.0 + odometry_noise * rng.normal(size=3) if odometry_noise > 0 else np.ones(3)
            odo.append((dx * f[0], dy * f[1], dth * f[2]))
        noise = magnetometer_noise * rng.normal() if magnetometer_noise > 0 else 0.0
        mag.append(p.theta + magnetometer_bias + noise)
        if render_images:
            frames.append(render(replace(template, pose=p, seed=template.seed + i), cam, spec))
    return Trajectory(frames, odo, mag)


def dead_reckon(start: Pose2D, odometry: Sequence[tuple[float, float, float]]) -> Pose2D:
    p = start
    for dx, dy, dth in odometry:
        p = p.compose(dx, dy, dth)
    return p


def ideal_detections(
    pose: Pose2D,
    spec: FieldSpec,
    max_range: float = 6.0,
    half_fov: float = math.radians(60.0),
    min_length: float = 0.5,
    samples: int = 200,
):
    """Exact egocentric landmarks a perfect detector would report from ``pose``.

    Lines are cut to the longest run inside range and the horizontal view
    cone; the circle and posts are reported when their centre is visible.
    """
    from .detectors.types import Detections
    from .geometry import Frame, LineSegment2D

    lines = []
    t = np.linspace(0.0, 1.0, samples)
    for s in field_line_segments(spec):
        e0, e1 = field_to_ego(pose, s.p0), field_to_ego(pose, s.p1)
        pts = e0[None, :] + t[:, None] * (e1 - e0)[None, :]
        ok = (np.hypot(pts[:, 0], pts[:, 1]) <= max_range) & (np.abs(np.arctan2(pts[:, 1], pts[:, 0])) <= half_fov)
        # longest run of visible samples
        runs = np.flatnonzero(np.diff(np.concatenate([[0], ok.astype(int), [0]]))).reshape(-1, 2)
        if len(runs) == 0:
            continue
        lo, hi = runs[np.argmax(runs[:, 1] - runs[:, 0])]
        hi -= 1
        if hi <= lo:
            continue
        seg = LineSegment2D(tuple(pts[lo]), tuple(pts[hi]), Frame.EGOCENTRIC)
        if seg.length >= min_length:
            lines.append(seg)
    c = field_to_ego(pose, (0.0, 0.0))
    circle = None
    if np.hypot(*c) <= max_range and abs(math.atan2(c[1], c[0])) <= half_fov:
        circle = (float(c[0]), float(c[1]))
    posts = []
    for p in spec.goal_post_positions:
        e = field_to_ego(pose, p)
        if np.hypot(*e) <= max_range and abs(math.atan2(e[1], e[0])) <= half_fov:
            posts.append((float(e[0]), float(e[1])))
    return Detections(
        boundary=None,
        lines=lines,
        circle=circle,
        circle_radius=spec.circle_radius if circle is not None else None,
        goal_posts=posts,
    )
