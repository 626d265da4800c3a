"""Pinhole + radial distortion camera with a kinematic extrinsic chain.

Frames:
  * optical: x right, y down, z forward (pixel conventions);
  * camera body: x forward, y left, z up (produced by the head chain);
  * egocentric: robot footprint on the ground, x forward, y left, z up.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from .geometry import IDENTITY, RigidTransform, rot_x, rot_y, rot_z


class CameraError(ValueError):
    pass


class OutOfModelError(CameraError):
    """Point lies beyond the radius where the distortion is invertible."""


class NonConvergenceError(CameraError):
    pass


class NoGroundIntersectionError(CameraError):
    pass


class NotVisibleError(CameraError):
    pass


# body <- optical axis permutation
OPTICAL_TO_BODY = np.array([[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]])

_BIJECTIVITY_SEARCH_LIMIT = 3.0
UNDISTORT_TOL = 1e-9
UNDISTORT_MAX_ITER = 50


@dataclass(frozen=True)
class Intrinsics:
    focal_x: float = 440.0
    focal_y: float = 440.0
    principal_point: tuple[float, float] = (320.0, 240.0)
    image_size: tuple[int, int] = (640, 480)  # width, height

    def __post_init__(self):
        if self.focal_x <= 0 or self.focal_y <= 0:
            raise CameraError("focal lengths must be positive")
        w, h = self.image_size
        cx, cy = self.principal_point
        if not (0 <= cx < w and 0 <= cy < h):
            raise CameraError("principal point must lie inside the image")
        object.__setattr__(self, "principal_point", (float(cx), float(cy)))
        object.__setattr__(self, "image_size", (int(w), int(h)))

    @property
    def width(self) -> int:
        return self.image_size[0]

    @property
    def height(self) -> int:
        return self.image_size[1]


@dataclass(frozen=True)
class DistortionModel:
    """Radial polynomial scale 1 + k1 r^2 + k2 r^4 + k3 r^6 on normalized rays.

    ``max_radius`` is the largest undistorted radius over which the mapping
    r -> r * scale(r) is strictly increasing (sampled at construction).
    """

    k1: float = 0.0
    k2: float = 0.0
    k3: float = 0.0
    max_radius: float = field(init=False)
    max_distorted_radius: float = field(init=False)

    def __post_init__(self):
        r = np.linspace(0.0, _BIJECTIVITY_SEARCH_LIMIT, 30001)
        deriv = 1 + 3 * self.k1 * r**2 + 5 * self.k2 * r**4 + 7 * self.k3 * r**6
        bad = np.nonzero(deriv <= 0)[0]
        r_max = float(r[bad[0] - 1]) if bad.size else _BIJECTIVITY_SEARCH_LIMIT
        if r_max <= 0:
            raise CameraError("distortion is not invertible near the optical axis")
        object.__setattr__(self, "max_radius", r_max)
        object.__setattr__(self, "max_distorted_radius", float(r_max * self.scale(r_max ** 2)))

    @property
    def is_zero(self) -> bool:
        return self.k1 == 0.0 and self.k2 == 0.0 and self.k3 == 0.0

    def scale(self, r2):
        return 1.0 + r2 * (self.k1 + r2 * (self.k2 + r2 * self.k3))

    def distort(self, p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if self.is_zero:
            return p.copy()
        r2 = np.sum(p * p, axis=-1)
        if np.any(r2 > self.max_radius ** 2):
            raise OutOfModelError("ray beyond the invertible distortion radius")
        return p * self.scale(r2)[..., None]

    def undistort(self, q: np.ndarray) -> np.ndarray:
        """Invert ``distort`` by Newton iteration on the radius."""
        q = np.asarray(q, dtype=float)
        if self.is_zero:
            return q.copy()
        rd = np.sqrt(np.sum(q * q, axis=-1))
        if np.any(rd > self.max_distorted_radius):
            raise OutOfModelError("pixel beyond the invertible distortion radius")
        r = rd.copy()
        k1, k2, k3 = self.k1, self.k2, self.k3
        for _ in range(UNDISTORT_MAX_ITER):
            r2 = r * r
            f = r * (1 + r2 * (k1 + r2 * (k2 + r2 * k3))) - rd
            df = 1 + r2 * (3 * k1 + r2 * (5 * k2 + r2 * 7 * k3))
            step = f / df
            r = np.clip(r - step, 0.0, self.max_radius)
            if np.all(np.abs(step) < UNDISTORT_TOL):
                break
        else:
            raise NonConvergenceError("undistortion did not converge")
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(rd > 0, r / np.where(rd > 0, rd, 1.0), 1.0)
        return q * ratio[..., None]


@dataclass(frozen=True)
class ExtrinsicChain:
    """Simplified head chain: trunk(roll, pitch) -> mount -> pan -> tilt -> correction.

    Positive tilt / pitch looks down. ``camera_mount`` places the neck joint
    (and the camera on it) above the ground footprint.
    """

    trunk_roll: float = 0.0
    trunk_pitch: float = 0.0
    neck_pan: float = 0.0
    neck_tilt: float = 0.0
    camera_mount: RigidTransform = field(
        default_factory=lambda: RigidTransform(np.eye(3), (0.0, 0.0, 0.85))
    )
    correction: RigidTransform = IDENTITY

    def with_correction(self, correction: RigidTransform) -> "ExtrinsicChain":
        return ExtrinsicChain(
            self.trunk_roll, self.trunk_pitch, self.neck_pan, self.neck_tilt, self.camera_mount, correction
        )


def camera_pose(chain: ExtrinsicChain) -> RigidTransform:
    """Camera body frame expressed in the egocentric frame."""
    trunk = RigidTransform(rot_y(chain.trunk_pitch) @ rot_x(chain.trunk_roll))
    neck = RigidTransform(rot_z(chain.neck_pan) @ rot_y(chain.neck_tilt))
    return trunk @ chain.camera_mount @ neck @ chain.correction


@dataclass(frozen=True)
class CameraModel:
    intrinsics: Intrinsics = field(default_factory=Intrinsics)
    distortion: DistortionModel = field(default_factory=lambda: DistortionModel(-0.3, 0.05, 0.0))

    @property
    def width(self) -> int:
        return self.intrinsics.width

    @property
    def height(self) -> int:
        return self.intrinsics.height

    # -- intrinsic maps -----------------------------------------------------

    def distort_point(self, p_normalized) -> np.ndarray:
        """Normalized (undistorted) ray coordinates -> pixel."""
        q = self.distortion.distort(np.asarray(p_normalized, dtype=float))
        K = self.intrinsics
        return np.stack(
            [K.focal_x * q[..., 0] + K.principal_point[0], K.focal_y * q[..., 1] + K.principal_point[1]],
            axis=-1,
        )

    def undistort_point(self, pixel) -> np.ndarray:
        """Pixel -> normalized undistorted ray coordinates."""
        px = np.asarray(pixel, dtype=float)
        K = self.intrinsics
        q = np.stack(
            [(px[..., 0] - K.principal_point[0]) / K.focal_x, (px[..., 1] - K.principal_point[1]) / K.focal_y],
            axis=-1,
        )
        return self.distortion.undistort(q)

    def pixel_rays(self, pixels) -> np.ndarray:
        """Unit-free viewing rays in the camera body frame for the given pixels."""
        n = self.undistort_point(pixels)
        optical = np.concatenate([n, np.ones(n.shape[:-1] + (1,))], axis=-1)
        return optical @ OPTICAL_TO_BODY.T

    def ray_grid(self, supersample: int = 1) -> np.ndarray:
        """Body-frame rays for every (sub)pixel centre; cached per camera."""
        return _ray_grid(self, supersample)

    # -- ground projection --------------------------------------------------

    def pixel_to_ground(self, pixel, chain: ExtrinsicChain) -> np.ndarray:
        """Intersect the pixel's viewing ray with the z=0 ground plane."""
        pose = camera_pose(chain)
        d = pose.rotation @ self.pixel_rays(np.asarray(pixel, dtype=float))
        if d[2] >= -1e-12 or pose.translation[2] <= 0:
            raise NoGroundIntersectionError("viewing ray does not reach the ground")
        s = -pose.translation[2] / d[2]
        g = pose.translation + s * d
        return g[:2]

    def pixels_to_ground(self, pixels, chain: ExtrinsicChain) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized ``pixel_to_ground``; returns (points, valid mask)."""
        pixels = np.asarray(pixels, dtype=float).reshape(-1, 2)
        pose = camera_pose(chain)
        d = self.pixel_rays(pixels) @ pose.rotation.T
        valid = (d[:, 2] < -1e-12) & (pose.translation[2] > 0)
        s = np.where(valid, -pose.translation[2] / np.where(valid, d[:, 2], -1.0), np.nan)
        g = pose.translation[:2] + s[:, None] * d[:, :2]
        return g, valid

    def ground_to_pixel(self, p, chain: ExtrinsicChain) -> np.ndarray:
        """Project an egocentric ground point (z=0) into the image."""
        p = np.asarray(p, dtype=float)
        return self.world_to_pixel(np.array([p[0], p[1], 0.0]), chain)

    def world_to_pixel(self, pts, chain: ExtrinsicChain) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        pose = camera_pose(chain)
        body = (pts - pose.translation) @ pose.rotation
        optical = body @ OPTICAL_TO_BODY
        z = optical[..., 2]
        if np.any(z <= 1e-9):
            raise NotVisibleError("point is behind the camera")
        n = optical[..., :2] / z[..., None]
        return self.distort_point(n)

    def worlds_to_pixels(self, pts, chain: ExtrinsicChain) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized projection returning (pixels, valid) without raising."""
        pts = np.asarray(pts, dtype=float).reshape(-1, 3)
        pose = camera_pose(chain)
        optical = ((pts - pose.translation) @ pose.rotation) @ OPTICAL_TO_BODY
        z = optical[:, 2]
        valid = z > 1e-9
        n = optical[:, :2] / np.where(valid, z, 1.0)[:, None]
        r2 = np.sum(n * n, axis=1)
        valid &= r2 <= self.distortion.max_radius ** 2
        n = np.where(valid[:, None], n, 0.0)
        px = self.distort_point(n)
        return px, valid

    def in_image(self, px, margin: float = 0.0) -> np.ndarray:
        px = np.asarray(px, dtype=float)
        return (
            (px[..., 0] >= -0.5 + margin)
            & (px[..., 0] <= self.width - 0.5 - margin)
            & (px[..., 1] >= -0.5 + margin)
            & (px[..., 1] <= self.height - 0.5 - margin)
        )


@functools.lru_cache(maxsize=8)
def _ray_grid(cam: CameraModel, supersample: int) -> np.ndarray:
    w, h = cam.width, cam.height
    offs = (np.arange(supersample) + 0.5) / supersample - 0.5
    xs = (np.arange(w)[:, None] + offs[None, :]).reshape(-1)
    ys = (np.arange(h)[:, None] + offs[None, :]).reshape(-1)
    gx, gy = np.meshgrid(xs, ys)
    rays = cam.pixel_rays(np.stack([gx, gy], axis=-1))
    rays.flags.writeable = False
    return rays
