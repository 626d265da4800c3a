"""Algebraic circle fitting with angular arc coverage."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ARC_SECTORS = 36
MIN_POINTS = 6


class InsufficientPointsError(ValueError):
    pass


@dataclass(frozen=True)
class CircleFit:
    center: tuple[float, float]
    radius: float
    arc_coverage: float


def kasa_fit(pts: np.ndarray) -> tuple[np.ndarray, float] | None:
    """Least-squares circle through points; None when degenerate."""
    x, y = pts[:, 0], pts[:, 1]
    A = np.stack([2 * x, 2 * y, np.ones_like(x)], axis=1)
    rhs = x * x + y * y
    sol, _, rank, _ = np.linalg.lstsq(A, rhs, rcond=None)
    if rank < 3:
        return None
    a, b, c = sol
    r2 = c + a * a + b * b
    if r2 <= 0:
        return None
    return np.array([a, b]), float(np.sqrt(r2))


def arc_coverage(pts: np.ndarray, center, radius: float, inlier_tol: float | None = None) -> float:
    """Fraction of equal angular sectors holding at least one inlier."""
    d = pts - np.asarray(center)
    r = np.hypot(d[:, 0], d[:, 1])
    tol = inlier_tol if inlier_tol is not None else max(1e-6, 0.1 * radius)
    inl = np.abs(r - radius) <= tol
    if not inl.any():
        return 0.0
    ang = np.mod(np.arctan2(d[inl, 1], d[inl, 0]), 2 * np.pi)
    # the small nudge keeps points sitting exactly on a sector edge out of the lower sector
    sec = np.floor(ang / (2 * np.pi) * ARC_SECTORS + 1e-9).astype(int) % ARC_SECTORS
    return np.unique(sec).size / ARC_SECTORS


def fit_circle_arc(points, r_min: float, r_max: float, inlier_tol: float | None = None) -> CircleFit | None:
    """Fit a circle; None when the radius leaves [r_min, r_max] or the fit is degenerate."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) < MIN_POINTS:
        raise InsufficientPointsError(f"need at least {MIN_POINTS} points, got {len(pts)}")
    fit = kasa_fit(pts)
    if fit is None:
        return None
    c, r = fit
    if not (r_min <= r <= r_max):
        return None
    return CircleFit((float(c[0]), float(c[1])), r, arc_coverage(pts, c, r, inlier_tol))


def passes_third_rule(coverage: float) -> bool:
    return coverage >= 1.0 / 3.0 - 1e-9
