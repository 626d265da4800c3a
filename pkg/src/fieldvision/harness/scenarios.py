"""Turn scenario definitions into concrete per-frame scenes."""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field

import numpy as np

from ..calibration import synthesize_observations
from ..geometry import FieldSpec, Pose2D, normalize_angle
from ..synth import BALL_RADIUS, Occluder, SceneConfig
from .config import (
    BallSweepScenario,
    BoundaryScenario,
    CalibrationScenario,
    RandomScenario,
    RunConfig,
    TrajectoryScenario,
)


@dataclass
class FramePlan:
    scene: SceneConfig
    extra: dict = field(default_factory=dict)  # odometry, magnetometer, calibration observations


def scenario_rng(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(name.encode())])


def _template(cfg: RunConfig, **kw) -> SceneConfig:
    r = cfg.render
    return SceneConfig(
        supersample=r.supersample,
        grass_noise=r.grass_noise,
        lighting_gain=r.lighting_gain,
        lighting_offset=r.lighting_offset,
        line_wear=r.line_wear,
        **kw,
    )


def _random_pose(rng, spec: FieldSpec) -> Pose2D:
    hx, hy = spec.half_length, spec.half_width
    return Pose2D(rng.uniform(-hx, hx), rng.uniform(-hy, hy), rng.uniform(-math.pi, math.pi))


def _ball_ahead(rng, spec: FieldSpec, lo: float, hi: float, bearing: float):
    """Random (robot pose, ball) with the ball on the field at distance in [lo, hi]."""
    hx, hy = spec.half_length - BALL_RADIUS, spec.half_width - BALL_RADIUS
    while True:
        ball = (rng.uniform(-hx, hx), rng.uniform(-hy, hy))
        d = rng.uniform(lo, hi)
        phi = rng.uniform(-math.pi, math.pi)
        robot = (ball[0] - d * math.cos(phi), ball[1] - d * math.sin(phi))
        if abs(robot[0]) <= spec.half_length + 0.5 and abs(robot[1]) <= spec.half_width + 0.5:
            theta = phi - rng.uniform(-bearing, bearing)
            return Pose2D(robot[0], robot[1], theta), ball


def _tilt_for(distance: float, height: float) -> float:
    """Neck tilt (deg) that puts a ground point at ``distance`` a little below the image centre."""
    return float(np.clip(math.degrees(math.atan2(height, distance)) + 4.0, 6.0, 45.0))


def _occluders(rng, pose: Pose2D, spec) -> tuple[Occluder, ...]:
    lo, hi = spec.count
    out = []
    for _ in range(int(rng.integers(lo, hi + 1))):
        p = pose.compose(rng.uniform(*spec.distance), rng.uniform(-1.5, 1.5), 0.0)
        size = tuple(float(rng.uniform(*r)) for r in spec.size)
        out.append(Occluder((p.x, p.y), size, tuple(spec.color)))
    return tuple(out)


def _plan_random(cfg: RunConfig, s: RandomScenario, rng, spec) -> list[FramePlan]:
    plans = []
    for i in range(s.frames):
        if rng.random() < s.ball_probability:
            pose, ball = _ball_ahead(rng, spec, *s.ball_distance, bearing=math.radians(20))
        else:
            pose, ball = _random_pose(rng, spec), None
        tilt = rng.uniform(*s.tilt_deg)
        blur = cfg.render.blur if rng.random() < s.blur_fraction else 0
        scene = _template(
            cfg,
            pose=pose,
            chain=cfg.camera.chain(tilt),
            ball=ball,
            occluders=_occluders(rng, pose, s.occluders),
            seed=int(rng.integers(2**31)),
            blur=blur,
        )
        plans.append(FramePlan(scene))
    return plans


def _plan_sweep(cfg: RunConfig, s: BallSweepScenario, rng, spec) -> list[FramePlan]:
    plans = []
    for d in s.distances:
        for _ in range(s.frames_per_distance):
            pose, ball = _ball_ahead(rng, spec, d, d, bearing=math.radians(s.bearing_deg))
            blur = cfg.render.blur if rng.random() < s.blur_fraction else 0
            tilt = _tilt_for(d, cfg.camera.mount_height)
            scene = _template(cfg, pose=pose, chain=cfg.camera.chain(tilt), ball=ball, seed=int(rng.integers(2**31)), blur=blur)
            plans.append(FramePlan(scene, {"ball_distance": d}))
    return plans


def _plan_boundary(cfg: RunConfig, s: BoundaryScenario, rng, spec) -> list[FramePlan]:
    cx, cy = spec.carpet_half_extent
    plans = []
    for _ in range(s.frames):
        side = int(rng.integers(4))
        d = rng.uniform(*s.edge_distance)
        if side in (0, 1):
            sign = 1 if side == 0 else -1
            x, y, out = sign * (cx - d), rng.uniform(-cy + 1, cy - 1), 0.0 if sign > 0 else math.pi
        else:
            sign = 1 if side == 2 else -1
            x, y, out = rng.uniform(-cx + 1, cx - 1), sign * (cy - d), sign * math.pi / 2
        theta = out + math.radians(rng.uniform(-s.heading_spread_deg, s.heading_spread_deg))
        scene = _template(
            cfg, pose=Pose2D(x, y, theta), chain=cfg.camera.chain(rng.uniform(*s.tilt_deg)), seed=int(rng.integers(2**31))
        )
        plans.append(FramePlan(scene))
    return plans


def trajectory_poses(s: TrajectoryScenario) -> list[Pose2D]:
    """Walk the waypoint loop: turn toward the next waypoint, step forward when roughly aligned."""
    p = Pose2D(*s.start)
    poses = []
    k = 0
    wps = list(s.waypoints) or [(p.x, p.y)]
    for _ in range(s.frames):
        poses.append(p)
        tx, ty = wps[k % len(wps)]
        if math.hypot(tx - p.x, ty - p.y) < 0.3:
            k += 1
            tx, ty = wps[k % len(wps)]
        want = math.atan2(ty - p.y, tx - p.x)
        dth = float(np.clip(normalize_angle(want - p.theta), -s.turn, s.turn))
        p = p.compose(s.step if abs(dth) < 0.9 * s.turn else 0.2 * s.step, 0.0, dth)
    return poses


def _plan_trajectory(cfg: RunConfig, s: TrajectoryScenario, rng, spec) -> list[FramePlan]:
    base = trajectory_poses(s)
    poses = base
    k = s.kidnap_frame
    if k is not None:
        dx, dy = s.kidnap_offset
        hx, hy = spec.half_length - 0.2, spec.half_width - 0.2
        poses = [
            Pose2D(float(np.clip(p.x + dx, -hx, hx)), float(np.clip(p.y + dy, -hy, hy)), p.theta) if i >= k else p
            for i, p in enumerate(base)
        ]
    chain = cfg.camera.chain(s.tilt_deg)
    bias = math.radians(s.magnetometer_bias_deg)
    sigma = math.radians(s.magnetometer_noise_deg)
    plans = []
    for i, p in enumerate(poses):
        if i == 0:
            dx, dy, dth = 0.0, 0.0, 0.0
        elif i == k:
            dx, dy, dth = base[i].relative_to(base[i - 1])  # the teleport never reaches odometry
        else:
            dx, dy, dth = p.relative_to(poses[i - 1])
        f = 1.0 + s.odometry_noise * rng.normal(size=3) if s.odometry_noise > 0 else np.ones(3)
        odo = (dx * f[0], dy * f[1], dth * f[2])
        mag = normalize_angle(p.theta + bias + (sigma * rng.normal() if sigma > 0 else 0.0))
        scene = _template(cfg, pose=p, chain=chain, seed=int(rng.integers(2**31)))
        plans.append(FramePlan(scene, {"odometry": [float(v) for v in odo], "magnetometer": mag, "kidnap_frame": k}))
    return plans


def _plan_calibration(cfg: RunConfig, s: CalibrationScenario, rng, spec) -> list[FramePlan]:
    cam = cfg.camera.camera()
    inj = s.injection.transform()
    x0, x1, dx = s.grid_x
    y0, y1, dy = s.grid_y
    xs = np.arange(x0, x1 + dx / 2, dx)
    ys = np.arange(y0, y1 + dy / 2, dy)
    points = [(float(x), float(y)) for x in xs for y in ys]
    plans = []
    for pan in s.pans_deg:
        for tilt in s.tilts_deg:
            nominal = cfg.camera.chain(tilt, pan)
            clean = synthesize_observations(cam, [nominal], points, inj)
            noisy = []
            for o in clean:
                px = np.asarray(o.pixel) + (rng.normal(0.0, s.pixel_noise, 2) if s.pixel_noise > 0 else 0.0)
                noisy.append([float(px[0]), float(px[1])])
            obs = [
                {"pixel": n, "pixel_clean": list(o.pixel), "ego": list(o.true_world)}
                for n, o in zip(noisy, clean)
                if cam.in_image(np.asarray(n))
            ]
            scene = _template(cfg, pose=Pose2D(-2.0, 0.0, 0.0), chain=nominal.with_correction(inj), seed=int(rng.integers(2**31)))
            plans.append(FramePlan(scene, {"calibration": {"pan_deg": pan, "tilt_deg": tilt, "observations": obs}}))
    return plans


_PLANNERS = {
    RandomScenario: _plan_random,
    BallSweepScenario: _plan_sweep,
    BoundaryScenario: _plan_boundary,
    TrajectoryScenario: _plan_trajectory,
    CalibrationScenario: _plan_calibration,
}


def plan_scenario(cfg: RunConfig, name: str, count: int | None = None) -> list[FramePlan]:
    s = cfg.scenario(name)
    plans = _PLANNERS[type(s)](cfg, s, scenario_rng(cfg.seed, name), cfg.field.spec())
    return plans if count is None else plans[:count]
