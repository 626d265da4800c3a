"""Decomposed pose estimation: heading from magnetometer plus line angles, x and y from landmarks.

Each frame runs predict -> update_theta -> classify_lines -> update_xy. The
heading uses a slowly adapted correction on top of the magnetometer; x and y
get clamped innovations from the centre circle, goal posts and field lines.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import IO, Iterable, Sequence

import numpy as np

from .detectors.types import Detections
from .geometry import FieldSpec, LineSegment2D, Pose2D, normalize_angle, rot2

QUARTER = math.pi / 2


class LineClass(enum.Enum):
    HORIZONTAL = "horizontal"  # runs along field x (constant y)
    VERTICAL = "vertical"  # runs along field y (constant x)
    REJECTED = "rejected"


@dataclass(frozen=True)
class LocConfig:
    theta_gain: float = 0.2
    xy_gain: float = 0.3
    xy_clamp: float = 0.5
    residual_gate: float = math.radians(45.0)
    axis_gate: float = math.radians(20.0)
    confidence_decay: float = 0.99
    min_line_length: float = 0.5
    max_dx: float = 0.1
    max_dy: float = 0.1
    max_dtheta: float = 0.2
    conflict_threshold: float = 1.0
    field_margin: float = 1.0
    # cue tolerances for telling the halfway line from goal-area / goal lines
    circle_line_tol: float = 0.3
    companion_tol: float = 0.25
    post_line_tol: float = 0.3
    nearest_gate: float = 1.0


@dataclass(frozen=True)
class OdometryDelta:
    dx: float = 0.0
    dy: float = 0.0
    dtheta: float = 0.0


@dataclass(frozen=True)
class LocState:
    pose: Pose2D = field(default_factory=Pose2D)
    theta_correction: float = 0.0
    confidence: tuple[float, float, float] = (0.0, 0.0, 0.0)  # x, y, theta
    age: tuple[int, int, int] = (0, 0, 0)  # frames since last update per axis

    def __post_init__(self):
        object.__setattr__(self, "theta_correction", normalize_angle(self.theta_correction))


@dataclass
class StepReport:
    flags: list[str] = field(default_factory=list)
    theta_residual: float | None = None
    innovation: tuple[float, float] | None = None
    applied: tuple[float, float] | None = None
    sources: dict = field(default_factory=dict)


# --- prediction ------------------------------------------------------------------------


def predict(state: LocState, odo: OdometryDelta, cfg: LocConfig = LocConfig(), report: StepReport | None = None) -> LocState:
    """Dead-reckoning step; an out-of-bounds delta leaves the state untouched."""
    if abs(odo.dx) > cfg.max_dx or abs(odo.dy) > cfg.max_dy or abs(odo.dtheta) > cfg.max_dtheta:
        if report is not None:
            report.flags.append("odometry_rejected")
        return state
    p = state.pose.compose(odo.dx, odo.dy, odo.dtheta)
    return replace(
        state,
        pose=p,
        confidence=tuple(c * cfg.confidence_decay for c in state.confidence),
        age=tuple(a + 1 for a in state.age),
    )


# --- heading -----------------------------------------------------------------------------


def _grid_residual(phi: float) -> float:
    """Signed angle from ``phi`` to the nearest multiple of 90 degrees."""
    return normalize_angle(round(phi / QUARTER) * QUARTER - phi)


def _usable(lines: Iterable[LineSegment2D], cfg: LocConfig) -> list[LineSegment2D]:
    return [s for s in lines if s.length >= cfg.min_line_length]


def update_theta(
    state: LocState,
    magnetometer: float | None,
    lines: Sequence[LineSegment2D],
    cfg: LocConfig = LocConfig(),
    report: StepReport | None = None,
) -> LocState:
    """Heading = magnetometer + correction; line angle residuals adapt the correction.

    Without a magnetometer reading the residual corrects the heading directly.
    """
    theta = state.pose.theta if magnetometer is None else normalize_angle(magnetometer + state.theta_correction)
    res, wts = [], []
    for s in _usable(lines, cfg):
        r = _grid_residual(s.angle + theta)
        if abs(r) < cfg.residual_gate:
            res.append(r)
            wts.append(s.length)
    corr = state.theta_correction
    conf = list(state.confidence)
    age = list(state.age)
    if res:
        mean = float(np.average(res, weights=wts))
        if report is not None:
            report.theta_residual = mean
        step = cfg.theta_gain * mean
        if magnetometer is None:
            theta = normalize_angle(theta + step)
        else:
            corr = normalize_angle(corr + step)
            theta = normalize_angle(magnetometer + corr)
        conf[2], age[2] = 1.0, 0
    p = state.pose
    return replace(state, pose=Pose2D(p.x, p.y, theta), theta_correction=corr, confidence=tuple(conf), age=tuple(age))


def classify_lines(theta: float, lines: Sequence[LineSegment2D], cfg: LocConfig = LocConfig()) -> list[LineClass]:
    out = []
    for s in lines:
        phi = normalize_angle(s.angle + theta)
        off_x = abs(math.sin(phi))  # |sin| of the angle to the x-axis (direction sign ignored)
        off_y = abs(math.cos(phi))
        if off_x <= math.sin(cfg.axis_gate):
            out.append(LineClass.HORIZONTAL)
        elif off_y <= math.sin(cfg.axis_gate):
            out.append(LineClass.VERTICAL)
        else:
            out.append(LineClass.REJECTED)
    return out


# --- position ------------------------------------------------------------------------------


def _rel(theta: float, p) -> np.ndarray:
    """Egocentric point -> field-aligned offset from the robot."""
    return rot2(theta) @ np.asarray(p, dtype=float)


def _post_innovations(state, posts, spec) -> tuple[list[float], list[float], list[float]]:
    """x innovations, y innovations, and the field-x offsets of the posts."""
    theta = state.pose.theta
    rel = [_rel(theta, p) for p in posts]
    ix, iy = [], []
    xs = []
    hl = spec.length / 2
    for r in rel:
        gx = math.copysign(hl, r[0])  # inside the field the goal is on the side it appears
        ix.append(gx - r[0] - state.pose.x)
        xs.append(float(r[0]))
    post_ys = sorted({p[1] for p in spec.goal_post_positions})
    for side in (1.0, -1.0):
        goal = sorted((r for r in rel if r[0] * side > 0), key=lambda r: r[1])
        if len(goal) == 2 and abs(abs(goal[1][1] - goal[0][1]) - spec.goal_width) < 0.4:
            # a full goal: order the pair along field y
            iy += [post_ys[0] - goal[0][1] - state.pose.y, post_ys[-1] - goal[1][1] - state.pose.y]
            continue
        for r in goal:
            best = min((py - r[1] for py in post_ys), key=lambda y: abs(y - state.pose.y))
            iy.append(best - state.pose.y)
    return ix, iy, xs


def _horizontal_target(state, seg, spec, cfg) -> float | None:
    """Robot y implied by a line running along field x."""
    theta = state.pose.theta
    r0, r1 = _rel(theta, seg.p0), _rel(theta, seg.p1)
    oy = 0.5 * (r0[1] + r1[1])
    hw = spec.width / 2
    cands = [math.copysign(hw, oy) - oy]  # sideline on the side the line is seen
    mid_x = state.pose.x + 0.5 * (r0[0] + r1[0])
    hl = spec.length / 2
    if seg.length <= spec.goal_area_length + 0.3 and hl - spec.goal_area_length - 0.7 <= abs(mid_x) <= hl + 0.7:
        ga = spec.goal_area_width / 2
        cands += [ga - oy, -ga - oy]
    cands = [c for c in cands if abs(c) <= hw + cfg.field_margin]
    if not cands:
        return None
    if len(cands) == 1:
        return cands[0]
    best = min(cands, key=lambda y: abs(y - state.pose.y))
    return best if abs(best - state.pose.y) <= cfg.nearest_gate else None


def _vertical_target(state, seg, others, circle_rel, post_xs, spec, cfg) -> float | None:
    """Robot x implied by a line running along field y, or None when undecidable."""
    theta = state.pose.theta
    r0, r1 = _rel(theta, seg.p0), _rel(theta, seg.p1)
    ox = 0.5 * (r0[0] + r1[0])
    hl = spec.length / 2
    front = hl - spec.goal_area_length
    side = 1.0 if ox > 0 else -1.0
    votes = set()
    if circle_rel is not None and abs(circle_rel[0] - ox) <= cfg.circle_line_tol:
        votes.add(0.0)
    for o in others:
        d = o - ox
        if abs(abs(d) - spec.goal_area_length) <= cfg.companion_tol:
            # the farther of the pair is the goal line
            votes.add(side * (hl if abs(ox) > abs(o) else front))
    for px in post_xs:
        if abs(px - ox) <= cfg.post_line_tol:
            votes.add(side * hl)
        elif abs(px - ox - side * spec.goal_area_length) <= cfg.post_line_tol:
            votes.add(side * front)
    if len(votes) > 1:
        return None
    if len(votes) == 1:
        return votes.pop() - ox
    cands = [c - ox for c in (0.0, side * front, side * hl)]
    cands = [c for c in cands if abs(c) <= hl + cfg.field_margin]
    if not cands:
        return None
    best = min(cands, key=lambda x: abs(x - state.pose.x))
    return best if abs(best - state.pose.x) <= cfg.nearest_gate else None


def update_xy(
    state: LocState,
    detections: Detections,
    spec: FieldSpec = FieldSpec(),
    cfg: LocConfig = LocConfig(),
    report: StepReport | None = None,
) -> LocState:
    theta = state.pose.theta
    inn_x: list[float] = []
    inn_y: list[float] = []
    src = {"circle": 0, "posts": 0, "horizontal": 0, "vertical": 0}
    circle_rel = None
    if detections.circle is not None:
        circle_rel = _rel(theta, detections.circle)
        inn_x.append(-circle_rel[0] - state.pose.x)
        inn_y.append(-circle_rel[1] - state.pose.y)
        src["circle"] = 1
    post_xs: list[float] = []
    if detections.goal_posts:
        px, py, post_xs = _post_innovations(state, detections.goal_posts, spec)
        inn_x += px
        inn_y += py
        src["posts"] = len(detections.goal_posts)
    lines = _usable(detections.lines, cfg)
    classes = classify_lines(theta, lines, cfg)
    verticals = [s for s, c in zip(lines, classes) if c is LineClass.VERTICAL]
    vert_ox = [float(np.mean([_rel(theta, s.p0)[0], _rel(theta, s.p1)[0]])) for s in verticals]
    for s, c in zip(lines, classes):
        if c is LineClass.HORIZONTAL:
            t = _horizontal_target(state, s, spec, cfg)
            if t is not None:
                inn_y.append(t - state.pose.y)
                src["horizontal"] += 1
    for i, s in enumerate(verticals):
        others = vert_ox[:i] + vert_ox[i + 1 :]
        t = _vertical_target(state, s, others, circle_rel, post_xs, spec, cfg)
        if t is not None:
            inn_x.append(t - state.pose.x)
            src["vertical"] += 1
    if report is not None:
        report.sources = src

    def conflicting(v):
        return bool(v) and max(v) > cfg.conflict_threshold and min(v) < -cfg.conflict_threshold

    if conflicting(inn_x) or conflicting(inn_y):
        if report is not None:
            report.flags.append("xy_conflict")
        return state
    dx = cfg.xy_gain * float(np.mean(inn_x)) if inn_x else 0.0
    dy = cfg.xy_gain * float(np.mean(inn_y)) if inn_y else 0.0
    n = math.hypot(dx, dy)
    if n > cfg.xy_clamp:
        dx, dy = dx * cfg.xy_clamp / n, dy * cfg.xy_clamp / n
        if report is not None:
            report.flags.append("xy_clamped")
    if report is not None:
        report.innovation = (float(np.mean(inn_x)) if inn_x else 0.0, float(np.mean(inn_y)) if inn_y else 0.0)
        report.applied = (dx, dy)
    conf = list(state.confidence)
    age = list(state.age)
    if inn_x:
        conf[0], age[0] = 1.0, 0
    if inn_y:
        conf[1], age[1] = 1.0, 0
    p = state.pose
    return replace(state, pose=Pose2D(p.x + dx, p.y + dy, p.theta), confidence=tuple(conf), age=tuple(age))


def clamp_to_field(pose: Pose2D, spec: FieldSpec, margin: float) -> Pose2D:
    hx, hy = spec.length / 2 + margin, spec.width / 2 + margin
    return Pose2D(min(max(pose.x, -hx), hx), min(max(pose.y, -hy), hy), pose.theta)


def localize_step(
    state: LocState,
    odo: OdometryDelta,
    detections: Detections,
    magnetometer: float | None,
    spec: FieldSpec = FieldSpec(),
    cfg: LocConfig = LocConfig(),
) -> tuple[LocState, StepReport]:
    report = StepReport()
    s = predict(state, odo, cfg, report)
    s = update_theta(s, magnetometer, detections.lines, cfg, report)
    s = update_xy(s, detections, spec, cfg, report)
    clamped = clamp_to_field(s.pose, spec, cfg.field_margin)
    if clamped != s.pose:
        report.flags.append("pose_clamped")
        s = replace(s, pose=clamped)
    return s, report


# --- trace ---------------------------------------------------------------------------------


def trace_record(frame: int, state: LocState, report: StepReport) -> dict:
    p = state.pose
    return {
        "frame": frame,
        "pose": [round(p.x, 9), round(p.y, 9), round(p.theta, 9)],
        "theta_correction": round(state.theta_correction, 9),
        "confidence": [round(c, 9) for c in state.confidence],
        "age": list(state.age),
        "flags": list(report.flags),
    }


def append_trace(fh: IO[str], record: dict) -> None:
    fh.write(json.dumps(record, sort_keys=True) + "\n")


def state_to_dict(state: LocState) -> dict:
    d = asdict(state)
    d["pose"] = [state.pose.x, state.pose.y, state.pose.theta]
    return d
