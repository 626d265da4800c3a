"""Extrinsic camera calibration by downhill simplex on ground-projection error."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .camera import CameraModel, ExtrinsicChain
from .geometry import RigidTransform, normalize_angle

MISS_PENALTY = 10.0  # m^2 per observation whose ray misses the ground
MIN_OBSERVATIONS = 6
MIN_CHAIN_STATES = 2


class InsufficientDataError(ValueError):
    pass


# --- optimizer -----------------------------------------------------------------------


@dataclass(frozen=True)
class SimplexResult:
    x: np.ndarray
    fun: float
    iterations: int
    converged: bool
    evaluations: int = 0


def nelder_mead(
    objective: Callable[[np.ndarray], float],
    x0,
    step=0.1,
    tol: float = 1e-10,
    max_iter: int = 5000,
    alpha: float = 1.0,
    gamma: float = 2.0,
    rho: float = 0.5,
    sigma: float = 0.5,
) -> SimplexResult:
    """Minimize ``objective`` with the downhill simplex method.

    ``step`` is a scalar or per-coordinate vector giving the initial simplex
    edge along each axis. Stops when max f - min f over the simplex is below
    ``tol``; hitting ``max_iter`` first sets ``converged=False``.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    n = x0.size
    if n < 1:
        raise ValueError("need at least one parameter")
    if tol <= 0:
        raise ValueError("tol must be positive")
    steps = np.broadcast_to(np.asarray(step, dtype=float), (n,))
    if np.any(steps == 0):
        raise ValueError("simplex step must be non-zero in every coordinate")

    evals = 0

    def f(x):
        nonlocal evals
        evals += 1
        return float(objective(x))

    simplex = np.vstack([x0] + [x0 + steps[i] * np.eye(n)[i] for i in range(n)])
    fs = np.array([f(x) for x in simplex])
    it = 0
    converged = False
    while True:
        order = np.argsort(fs, kind="stable")
        simplex, fs = simplex[order], fs[order]
        if fs[-1] - fs[0] < tol:
            converged = True
            break
        if it >= max_iter:
            break
        it += 1
        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = centroid + alpha * (centroid - worst)
        fr = f(xr)
        if fs[0] <= fr < fs[-2]:
            simplex[-1], fs[-1] = xr, fr
            continue
        if fr < fs[0]:
            xe = centroid + gamma * (xr - centroid)
            fe = f(xe)
            if fe < fr:
                simplex[-1], fs[-1] = xe, fe
            else:
                simplex[-1], fs[-1] = xr, fr
            continue
        if fr < fs[-1]:
            xc = centroid + rho * (xr - centroid)
            fc = f(xc)
            if fc <= fr:
                simplex[-1], fs[-1] = xc, fc
                continue
        else:
            xc = centroid + rho * (worst - centroid)
            fc = f(xc)
            if fc < fs[-1]:
                simplex[-1], fs[-1] = xc, fc
                continue
        # shrink toward the best vertex
        simplex[1:] = simplex[0] + sigma * (simplex[1:] - simplex[0])
        fs[1:] = [f(x) for x in simplex[1:]]
    return SimplexResult(simplex[0].copy(), float(fs[0]), it, converged, evals)


# --- objective -----------------------------------------------------------------------------


@dataclass(frozen=True)
class CorrectionParams:
    """Camera-frame correction: translation (m) then roll, pitch, yaw (rad)."""

    x: float = 0.0
    y: float = 0.0
    z: float = 0.0
    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        for name in ("roll", "pitch", "yaw"):
            object.__setattr__(self, name, normalize_angle(getattr(self, name)))

    @classmethod
    def from_vector(cls, v) -> "CorrectionParams":
        return cls(*(float(a) for a in v))

    def as_vector(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.roll, self.pitch, self.yaw])

    def transform(self) -> RigidTransform:
        return RigidTransform.from_xyz_rpy(*self.as_vector())

    @classmethod
    def from_transform(cls, tf: RigidTransform) -> "CorrectionParams":
        return cls(*tf.to_xyz_rpy())

    def within(self, max_translation: float, max_rotation: float) -> bool:
        v = self.as_vector()
        return bool(np.linalg.norm(v[:3]) <= max_translation + 1e-12 and np.linalg.norm(v[3:]) <= max_rotation + 1e-12)


@dataclass(frozen=True)
class CalibObservation:
    pixel: tuple[float, float]
    true_world: tuple[float, float]  # egocentric ground point
    chain: ExtrinsicChain


def _chain_key(chain: ExtrinsicChain) -> tuple:
    m = chain.camera_mount
    return (
        chain.trunk_roll,
        chain.trunk_pitch,
        chain.neck_pan,
        chain.neck_tilt,
        tuple(np.round(m.rotation, 15).ravel()),
        tuple(np.round(m.translation, 15)),
    )


class _Groups:
    """Observations grouped by chain state so each group projects in one call."""

    def __init__(self, observations: Sequence[CalibObservation]):
        if len(observations) < MIN_OBSERVATIONS:
            raise InsufficientDataError(f"need at least {MIN_OBSERVATIONS} observations, got {len(observations)}")
        groups: dict[tuple, list[CalibObservation]] = {}
        for o in observations:
            groups.setdefault(_chain_key(o.chain), []).append(o)
        if len(groups) < MIN_CHAIN_STATES:
            raise InsufficientDataError(f"observations must span at least {MIN_CHAIN_STATES} chain states")
        self.n = len(observations)
        # sorted keys make the sum independent of observation order
        self.items = []
        for key in sorted(groups):
            obs = sorted(groups[key], key=lambda o: (o.pixel, o.true_world))
            self.items.append(
                (obs[0].chain, np.array([o.pixel for o in obs], float), np.array([o.true_world for o in obs], float))
            )

    def squared_errors(self, correction: RigidTransform, cam: CameraModel) -> np.ndarray:
        out = []
        for chain, px, truth in self.items:
            g, ok = cam.pixels_to_ground(px, chain.with_correction(correction))
            e = np.where(ok, np.sum((g - truth) ** 2, axis=1), MISS_PENALTY)
            out.append(np.where(np.isfinite(e), e, MISS_PENALTY))
        return np.concatenate(out)


def reprojection_cost(params: CorrectionParams, observations: Sequence[CalibObservation], cam: CameraModel) -> float:
    """Mean squared egocentric ground error (m^2) under the corrected chain."""
    groups = observations if isinstance(observations, _Groups) else _Groups(observations)
    return float(np.mean(groups.squared_errors(params.transform(), cam)))


def projection_errors(params: CorrectionParams, observations: Sequence[CalibObservation], cam: CameraModel) -> np.ndarray:
    """Per-observation ground distance (m); misses read as the penalty's square root."""
    return np.sqrt(_Groups(observations).squared_errors(params.transform(), cam))


@dataclass
class CalibrationReport:
    cost_before: float
    cost_after: float
    iterations: int
    evaluations: int
    restarts: int
    converged: bool
    history: list[float] = field(default_factory=list)

    @property
    def reduction(self) -> float:
        return 0.0 if self.cost_before <= 0 else 1.0 - self.cost_after / self.cost_before


def calibrate_extrinsics(
    observations: Sequence[CalibObservation],
    cam: CameraModel,
    max_translation: float = 0.05,
    max_rotation: float = math.radians(15.0),
    step: Sequence[float] = (0.01, 0.01, 0.01, math.radians(2), math.radians(2), math.radians(2)),
    tol: float = 1e-14,
    max_iter: int = 4000,
    max_restarts: int = 8,
) -> tuple[CorrectionParams, CalibrationReport]:
    """Fit the 6-DoF camera correction from a zero start.

    The simplex is restarted around the incumbent until a restart no longer
    improves the cost; the trust region is enforced by a quadratic penalty.
    """
    groups = _Groups(observations)

    def penalty(v: np.ndarray) -> float:
        over_t = max(0.0, float(np.linalg.norm(v[:3])) - max_translation)
        over_r = max(0.0, float(np.linalg.norm(v[3:])) - max_rotation)
        return 1e3 * (over_t**2 + over_r**2)

    def objective(v: np.ndarray) -> float:
        tf = RigidTransform.from_xyz_rpy(*v)
        return float(np.mean(groups.squared_errors(tf, cam))) + penalty(v)

    x = np.zeros(6)
    before = objective(x)
    best = before
    history = [before]
    its = evals = restarts = 0
    converged = True
    for restarts in range(max_restarts + 1):
        res = nelder_mead(objective, x, step=step, tol=tol, max_iter=max_iter)
        its += res.iterations
        evals += res.evaluations
        converged = res.converged
        improved = res.fun < best * (1 - 1e-9) - 1e-18
        if res.fun <= best:
            x, best = res.x, res.fun
        history.append(best)
        if not improved:
            break
    params = CorrectionParams.from_vector(x)
    after = reprojection_cost(params, groups, cam)
    if after > before:  # the penalty can only make the incumbent look worse, never better
        params, after = CorrectionParams(), before
    report = CalibrationReport(before, after, its, evals, restarts, converged, history)
    return params, report


# --- synthetic observation sets ---------------------------------------------------------------


def synthesize_observations(
    cam: CameraModel,
    chains: Sequence[ExtrinsicChain],
    points: Sequence[tuple[float, float]],
    true_correction: RigidTransform,
    pixel_noise: float = 0.0,
    rng: np.random.Generator | None = None,
    margin: float = 2.0,
) -> list[CalibObservation]:
    """Project known ground points through the truly-corrected chain into the image.

    Points outside the image (with ``margin``) are dropped. Gaussian pixel
    noise is added after projection.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    out = []
    world = np.column_stack([pts, np.zeros(len(pts))])
    for chain in chains:
        px, ok = cam.worlds_to_pixels(world, chain.with_correction(true_correction))
        ok &= cam.in_image(px, margin)
        for p, q in zip(px[ok], pts[ok]):
            if pixel_noise > 0:
                p = p + rng.normal(0.0, pixel_noise, 2)
            if not cam.in_image(p):
                continue
            out.append(CalibObservation((float(p[0]), float(p[1])), (float(q[0]), float(q[1])), chain))
    return out
