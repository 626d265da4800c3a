"""Run configuration: typed sections with documented defaults, loaded from JSON."""

from __future__ import annotations

import hashlib
import json
import math
from importlib import resources
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..camera import CameraModel, DistortionModel, ExtrinsicChain, Intrinsics
from ..detectors.types import DetectorConfig
from ..geometry import FieldSpec, Pose2D, RigidTransform
from ..localization import LocConfig


class ConfigError(ValueError):
    """Invalid or unreadable configuration (CLI exit code 2)."""


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


Pair = tuple[float, float]


class FieldSection(_Section):
    length: float = 9.0
    width: float = 6.0
    line_width: float = 0.05
    circle_radius: float = 0.75
    goal_area_length: float = 1.0
    goal_area_width: float = 5.0
    goal_width: float = 2.6
    penalty_mark_x: float = 2.4
    border: float = 1.0

    def spec(self) -> FieldSpec:
        hl, gw = self.length / 2, self.goal_width / 2
        posts = ((hl, gw), (hl, -gw), (-hl, gw), (-hl, -gw))
        return FieldSpec(**self.model_dump(), goal_post_positions=posts)


class CameraSection(_Section):
    focal_x: float = 440.0
    focal_y: float = 440.0
    principal_point: Pair = (320.0, 240.0)
    image_size: tuple[int, int] = (640, 480)
    k1: float = -0.3
    k2: float = 0.05
    k3: float = 0.0
    mount_height: float = 0.85

    def camera(self) -> CameraModel:
        return CameraModel(
            Intrinsics(self.focal_x, self.focal_y, self.principal_point, self.image_size),
            DistortionModel(self.k1, self.k2, self.k3),
        )

    def chain(self, tilt_deg: float, pan_deg: float = 0.0, correction: RigidTransform | None = None) -> ExtrinsicChain:
        mount = RigidTransform(translation=(0.0, 0.0, self.mount_height))
        ch = ExtrinsicChain(neck_pan=math.radians(pan_deg), neck_tilt=math.radians(tilt_deg), camera_mount=mount)
        return ch if correction is None else ch.with_correction(correction)


class RenderSection(_Section):
    supersample: int = Field(1, ge=1, le=4)
    grass_noise: float = Field(8.0, ge=0)
    lighting_gain: float = 1.0
    lighting_offset: float = 0.0
    line_wear: float = Field(0.15, ge=0, le=1)
    blur: int = Field(3, ge=2)  # kernel used by "walking" frames


class DetectorSection(_Section):
    """Detector thresholds; angles in degrees."""

    min_green_area: int = 400
    boundary_rdp_epsilon: float = 1.0
    ball_histogram_threshold: float = 0.45
    ball_patch_scale: float = 1.25
    ransac_trials: int = 60
    canny_low: float = 90.0
    canny_high: float = 180.0
    hough_min_length: float = 18.0
    hough_max_gap: float = 3.0
    hough_votes: int = 15
    normal_length: float = 0.05
    verify_thresholds: tuple[int, int, int] = (7, 7, 6)
    merge_angle_tol_deg: float = 5.0
    max_line_range: float = 6.0
    short_segment_length: float = 0.5
    post_min_aspect: float = 2.5

    def detector_config(self, seed: int = 0) -> DetectorConfig:
        d = self.model_dump()
        d["merge_angle_tol"] = math.radians(d.pop("merge_angle_tol_deg"))
        return DetectorConfig(**d, hough_seed=seed)


class LocalizationSection(_Section):
    theta_gain: float = Field(0.2, gt=0, le=1)
    xy_gain: float = Field(0.3, gt=0, le=1)
    xy_clamp: float = Field(0.5, gt=0)
    residual_gate_deg: float = Field(45.0, gt=0, le=45)
    axis_gate_deg: float = Field(20.0, gt=0, lt=45)
    confidence_decay: float = Field(0.99, gt=0, le=1)
    detections: Literal["pipeline", "ideal"] = "pipeline"
    initial_offset: Pair = (2.0, 0.0)  # added to the true first pose
    settle_frames: int = Field(50, ge=0)
    recovery_error: float = 0.3

    def loc_config(self) -> LocConfig:
        return LocConfig(
            theta_gain=self.theta_gain,
            xy_gain=self.xy_gain,
            xy_clamp=self.xy_clamp,
            residual_gate=math.radians(self.residual_gate_deg),
            axis_gate=math.radians(self.axis_gate_deg),
            confidence_decay=self.confidence_decay,
        )


class TrainingSection(_Section):
    stages: int = Field(4, ge=1)
    max_stumps: int = Field(30, ge=1)
    stage_fpr: float = Field(0.3, gt=0, lt=1)
    min_stage_tpr: float = Field(0.995, gt=0, le=1)
    max_negatives: int = Field(6000, ge=1)
    negatives_per_frame: int = Field(15, ge=1)
    holdout_fraction: float = Field(0.2, ge=0, lt=1)
    center_jitter: float = 0.05  # fraction of the radius
    radius_jitter: float = 0.08
    negative_scale: Pair = (0.7, 1.4)


class CalibrationSection(_Section):
    max_translation: float = 0.05
    max_rotation_deg: float = 15.0
    max_restarts: int = Field(8, ge=0)


class Injection(_Section):
    """Extrinsic perturbation: metres and degrees."""

    x: float = 0.0
    y: float = 0.0
    z: float = 0.0
    roll_deg: float = 0.0
    pitch_deg: float = 0.0
    yaw_deg: float = 0.0

    def transform(self) -> RigidTransform:
        r = math.radians
        return RigidTransform.from_xyz_rpy(self.x, self.y, self.z, r(self.roll_deg), r(self.pitch_deg), r(self.yaw_deg))


class OccluderSpec(_Section):
    count: tuple[int, int] = (0, 0)
    distance: Pair = (1.0, 4.0)
    size: tuple[Pair, Pair, Pair] = ((0.15, 0.4), (0.15, 0.4), (0.2, 0.7))
    color: tuple[int, int, int] = (235, 235, 235)


class RandomScenario(_Section):
    kind: Literal["random"] = "random"
    frames: int = Field(20, ge=0)
    ball_probability: float = Field(0.0, ge=0, le=1)
    ball_distance: Pair = (0.8, 6.0)
    tilt_deg: Pair = (20.0, 35.0)
    blur_fraction: float = Field(0.0, ge=0, le=1)
    occluders: OccluderSpec = OccluderSpec()


class BallSweepScenario(_Section):
    kind: Literal["ball_sweep"] = "ball_sweep"
    distances: list[float] = [1.0, 2.0, 3.0, 4.0, 4.5]
    frames_per_distance: int = Field(10, ge=0)
    blur_fraction: float = Field(0.0, ge=0, le=1)
    bearing_deg: float = 20.0  # max absolute bearing of the ball

    @property
    def frames(self) -> int:
        return len(self.distances) * self.frames_per_distance


class BoundaryScenario(_Section):
    """Robot near the carpet edge looking outward, so the boundary bends under distortion."""

    kind: Literal["boundary"] = "boundary"
    frames: int = Field(20, ge=0)
    edge_distance: Pair = (1.0, 3.0)
    heading_spread_deg: float = 50.0
    tilt_deg: Pair = (10.0, 25.0)


class TrajectoryScenario(_Section):
    kind: Literal["trajectory"] = "trajectory"
    frames: int = Field(150, ge=0)
    start: tuple[float, float, float] = (-3.0, -1.5, 0.3)  # x, y, theta (rad)
    waypoints: list[Pair] = [(2.5, -1.0), (2.0, 1.8), (-2.5, 1.5), (-3.0, -1.5)]
    step: float = Field(0.05, gt=0, le=0.1)
    turn: float = Field(0.1, gt=0, le=0.2)
    tilt_deg: float = 30.0
    odometry_noise: float = Field(0.1, ge=0)
    magnetometer_bias_deg: float = 0.0
    magnetometer_noise_deg: float = Field(0.0, ge=0)
    kidnap_frame: Optional[int] = None
    kidnap_offset: Pair = (3.0, 0.0)


class CalibrationScenario(_Section):
    kind: Literal["calibration"] = "calibration"
    injection: Injection = Injection()
    pans_deg: list[float] = [-40.0, -15.0, 15.0, 40.0]
    tilts_deg: list[float] = [15.0, 30.0, 45.0]
    grid_x: tuple[float, float, float] = (0.5, 5.0, 0.5)  # start, stop, step (inclusive)
    grid_y: tuple[float, float, float] = (-3.0, 3.0, 0.5)
    pixel_noise: float = Field(0.0, ge=0)

    @property
    def frames(self) -> int:
        return len(self.pans_deg) * len(self.tilts_deg)


Scenario = Annotated[
    Union[RandomScenario, BallSweepScenario, BoundaryScenario, TrajectoryScenario, CalibrationScenario],
    Field(discriminator="kind"),
]


class Check(_Section):
    """Threshold on a dotted metric path in a report, e.g. ``ball.rate_max_4_5``."""

    name: str
    report: str
    metric: str
    op: Literal[">=", "<=", ">", "<", "=="]
    value: float


class RunConfig(_Section):
    seed: int = 0
    field: FieldSection = FieldSection()
    camera: CameraSection = CameraSection()
    render: RenderSection = RenderSection()
    detector: DetectorSection = DetectorSection()
    localization: LocalizationSection = LocalizationSection()
    training: TrainingSection = TrainingSection()
    calibration: CalibrationSection = CalibrationSection()
    ball_buckets: list[float] = [0.0, 1.5, 3.0, 4.5, 6.0, 7.0]
    line_range: float = 4.5
    scenarios: dict[str, Scenario] = {}
    checks: list[Check] = []
    output_dir: str = "runs"

    @model_validator(mode="after")
    def _buckets_monotone(self):
        b = self.ball_buckets
        if len(b) < 2 or any(b1 <= b0 for b0, b1 in zip(b, b[1:])):
            raise ValueError("ball_buckets must be strictly increasing with at least two edges")
        return self

    def with_seed(self, seed: int | None) -> "RunConfig":
        return self if seed is None else self.model_copy(update={"seed": int(seed)})

    def scenario(self, name: str):
        try:
            return self.scenarios[name]
        except KeyError:
            raise ConfigError(f"unknown scenario {name!r}; known: {', '.join(sorted(self.scenarios)) or 'none'}") from None

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def parse_config(text: str) -> RunConfig:
    try:
        return RunConfig.model_validate_json(text)
    except ValidationError as e:
        raise ConfigError(str(e)) from None


def load_config(path: str | Path | None = None) -> RunConfig:
    """Load a JSON config; ``None`` loads the packaged default."""
    if path is None:
        text = resources.files(__package__).joinpath("default.json").read_text()
    else:
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
    return parse_config(text)


def save_config(cfg: RunConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(cfg.model_dump(mode="json"), indent=2, sort_keys=True) + "\n")


def start_pose(s: TrajectoryScenario) -> Pose2D:
    return Pose2D(*s.start)
