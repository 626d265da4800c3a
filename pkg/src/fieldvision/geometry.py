"""Field model, coordinate frames and rigid transforms.

Field frame: origin at the centre spot, +x toward the opponent goal, +y to
the left, angles counter-clockwise from +x. The egocentric frame is the same
convention attached to the robot's ground footprint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np


class ConfigurationError(ValueError):
    """Raised for geometrically invalid configuration values."""


def normalize_angle(a: float) -> float:
    """Wrap an angle into the half-open interval (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    elif a > math.pi:
        a -= 2.0 * math.pi
    return a


def rot2(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class Pose2D:
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta", normalize_angle(float(self.theta)))

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def compose(self, dx: float, dy: float, dtheta: float) -> "Pose2D":
        """Apply a motion expressed in this pose's own (egocentric) frame."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        return Pose2D(self.x + c * dx - s * dy, self.y + s * dx + c * dy, self.theta + dtheta)

    def relative_to(self, other: "Pose2D") -> tuple[float, float, float]:
        """Motion (dx, dy, dtheta) in ``other``'s frame that takes ``other`` to this pose."""
        d = np.array([self.x - other.x, self.y - other.y])
        local = rot2(-other.theta) @ d
        return float(local[0]), float(local[1]), normalize_angle(self.theta - other.theta)


class Frame(str, Enum):
    PIXEL = "pixel"
    EGOCENTRIC = "egocentric"
    FIELD = "field"


@dataclass(frozen=True)
class LineSegment2D:
    p0: tuple[float, float]
    p1: tuple[float, float]
    frame: Frame = Frame.PIXEL

    def __post_init__(self):
        p0 = (float(self.p0[0]), float(self.p0[1]))
        p1 = (float(self.p1[0]), float(self.p1[1]))
        if p0 == p1:
            raise ValueError("degenerate segment: p0 == p1")
        object.__setattr__(self, "p0", p0)
        object.__setattr__(self, "p1", p1)
        object.__setattr__(self, "frame", Frame(self.frame))

    @property
    def length(self) -> float:
        return math.hypot(self.p1[0] - self.p0[0], self.p1[1] - self.p0[1])

    @property
    def direction(self) -> np.ndarray:
        d = np.subtract(self.p1, self.p0)
        return d / np.linalg.norm(d)

    @property
    def angle(self) -> float:
        return math.atan2(self.p1[1] - self.p0[1], self.p1[0] - self.p0[0])

    @property
    def midpoint(self) -> np.ndarray:
        return (np.asarray(self.p0) + np.asarray(self.p1)) / 2.0

    def point_at(self, t: float) -> np.ndarray:
        return np.asarray(self.p0) + t * np.subtract(self.p1, self.p0)


@dataclass(frozen=True)
class FieldSpec:
    """Metric field geometry (meters).

    ``border`` is the width of the green carpet beyond the outer field lines;
    the renderer and the boundary ground truth use it.
    """

    length: float = 9.0
    width: float = 6.0
    line_width: float = 0.05
    circle_radius: float = 0.75
    goal_area_length: float = 1.0
    goal_area_width: float = 5.0
    goal_width: float = 2.6
    goal_post_positions: tuple[tuple[float, float], ...] = field(
        default=((4.5, 1.3), (4.5, -1.3), (-4.5, 1.3), (-4.5, -1.3))
    )
    penalty_mark_x: float = 2.4
    border: float = 1.0
    goal_post_radius: float = 0.05
    goal_post_height: float = 1.8

    def __post_init__(self):
        object.__setattr__(
            self, "goal_post_positions", tuple((float(x), float(y)) for x, y in self.goal_post_positions)
        )
        self.validate()

    def validate(self) -> None:
        if not (self.length > self.width > 0):
            raise ConfigurationError("field requires length > width > 0")
        if self.line_width <= 0:
            raise ConfigurationError("line_width must be positive")
        if not (0 < self.circle_radius < self.width / 2):
            raise ConfigurationError("circle_radius must lie in (0, width/2)")
        if not (0 < self.goal_area_length < self.length / 2):
            raise ConfigurationError("goal_area_length out of range")
        if not (0 < self.goal_area_width <= self.width):
            raise ConfigurationError("goal_area_width out of range")
        if self.border < 0:
            raise ConfigurationError("border must be non-negative")
        hx, hy = self.length / 2, self.width / 2
        for x, y in self.goal_post_positions:
            if abs(x) > hx + 1e-9 or abs(y) > hy + 1e-9:
                raise ConfigurationError(f"goal post ({x}, {y}) outside the field")

    @property
    def half_length(self) -> float:
        return self.length / 2

    @property
    def half_width(self) -> float:
        return self.width / 2

    @property
    def carpet_half_extent(self) -> tuple[float, float]:
        return self.length / 2 + self.border, self.width / 2 + self.border


def field_line_segments(spec: FieldSpec) -> list[LineSegment2D]:
    """Straight field markings in the field frame (centre circle excluded)."""
    spec.validate()
    hx, hy = spec.half_length, spec.half_width
    ga_x = hx - spec.goal_area_length
    ga_y = spec.goal_area_width / 2
    F = Frame.FIELD
    segs = [
        LineSegment2D((-hx, hy), (hx, hy), F),  # left sideline
        LineSegment2D((-hx, -hy), (hx, -hy), F),  # right sideline
        LineSegment2D((hx, -hy), (hx, hy), F),  # opponent goal line
        LineSegment2D((-hx, -hy), (-hx, hy), F),  # own goal line
        LineSegment2D((0.0, -hy), (0.0, hy), F),  # halfway line
    ]
    for sx in (1.0, -1.0):
        segs.append(LineSegment2D((sx * ga_x, -ga_y), (sx * ga_x, ga_y), F))
        if ga_y < hy - 1e-9:
            segs.append(LineSegment2D((sx * ga_x, ga_y), (sx * hx, ga_y), F))
            segs.append(LineSegment2D((sx * ga_x, -ga_y), (sx * hx, -ga_y), F))
    return segs


def ego_to_field(pose: Pose2D, p) -> np.ndarray:
    return rot2(pose.theta) @ np.asarray(p, dtype=float) + pose.xy


def field_to_ego(pose: Pose2D, p) -> np.ndarray:
    return rot2(-pose.theta) @ (np.asarray(p, dtype=float) - pose.xy)


def segment_to_field(pose: Pose2D, seg: LineSegment2D) -> LineSegment2D:
    if seg.frame is not Frame.EGOCENTRIC:
        raise ValueError(f"expected egocentric segment, got {seg.frame.value}")
    return LineSegment2D(
        tuple(ego_to_field(pose, seg.p0)), tuple(ego_to_field(pose, seg.p1)), Frame.FIELD
    )


def segment_to_ego(pose: Pose2D, seg: LineSegment2D) -> LineSegment2D:
    if seg.frame is not Frame.FIELD:
        raise ValueError(f"expected field segment, got {seg.frame.value}")
    return LineSegment2D(
        tuple(field_to_ego(pose, seg.p0)), tuple(field_to_ego(pose, seg.p1)), Frame.EGOCENTRIC
    )


def point_segment_distance(p, a, b) -> np.ndarray:
    """Distance from point(s) ``p`` (..., 2) to segment ab."""
    p = np.asarray(p, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ab = b - a
    denom = float(ab @ ab)
    t = np.clip(((p - a) @ ab) / denom, 0.0, 1.0) if denom > 0 else np.zeros(p.shape[:-1])
    proj = a + t[..., None] * ab
    return np.linalg.norm(p - proj, axis=-1)


# --- 3D rotations ---------------------------------------------------------


def rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rpy_matrix(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Rz(yaw) @ Ry(pitch) @ Rx(roll)."""
    return rot_z(yaw) @ rot_y(pitch) @ rot_x(roll)


def matrix_to_rpy(R: np.ndarray) -> tuple[float, float, float]:
    pitch = math.asin(max(-1.0, min(1.0, -R[2, 0])))
    roll = math.atan2(R[2, 1], R[2, 2])
    yaw = math.atan2(R[1, 0], R[0, 0])
    return roll, pitch, yaw


@dataclass(frozen=True)
class RigidTransform:
    """Rotation + translation mapping child-frame points into the parent frame."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        t = np.array(self.translation, dtype=float).reshape(3)
        R.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def from_xyz_rpy(cls, x=0.0, y=0.0, z=0.0, roll=0.0, pitch=0.0, yaw=0.0) -> "RigidTransform":
        return cls(rpy_matrix(roll, pitch, yaw), (x, y, z))

    def to_xyz_rpy(self) -> tuple[float, float, float, float, float, float]:
        roll, pitch, yaw = matrix_to_rpy(self.rotation)
        x, y, z = (float(v) for v in self.translation)
        return x, y, z, roll, pitch, yaw

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return RigidTransform(
            self.rotation @ other.rotation, self.rotation @ other.translation + self.translation
        )

    def apply(self, pts) -> np.ndarray:
        return np.asarray(pts, dtype=float) @ self.rotation.T + self.translation

    def inverse(self) -> "RigidTransform":
        Rt = self.rotation.T
        return RigidTransform(Rt, -Rt @ self.translation)

    def as_matrix(self) -> np.ndarray:
        M = np.eye(4)
        M[:3, :3] = self.rotation
        M[:3, 3] = self.translation
        return M

    def is_identity(self) -> bool:
        return bool(np.all(self.rotation == np.eye(3)) and np.all(self.translation == 0.0))


IDENTITY = RigidTransform()


def serialize_correction(tf: RigidTransform) -> str:
    """Six whitespace-separated numbers: x y z (m) roll pitch yaw (rad)."""
    return " ".join(repr(float(v)) for v in tf.to_xyz_rpy()) + "\n"


def parse_correction(text: str) -> RigidTransform:
    vals = [float(v) for v in text.split()]
    if len(vals) != 6:
        raise ValueError(f"correction needs 6 numbers, got {len(vals)}")
    return RigidTransform.from_xyz_rpy(*vals)


def polygon_area(poly: Sequence) -> float:
    p = np.asarray(poly, dtype=float)
    if len(p) < 3:
        return 0.0
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
