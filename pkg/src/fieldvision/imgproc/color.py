"""Colour conversion and per-pixel green/white segmentation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OTHER = 0
GREEN = 1
WHITE = 2


def rgb_to_hsv(img: np.ndarray) -> np.ndarray:
    """Hexcone RGB -> HSV with H in [0, 180), S and V in [0, 255] (uint8)."""
    rgb = np.asarray(img, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError("expected an (H, W, 3) rgb image")
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    v = rgb.max(axis=2)
    mn = rgb.min(axis=2)
    delta = v - mn
    s = np.where(v > 0, 255.0 * delta / np.where(v > 0, v, 1.0), 0.0)
    safe = np.where(delta > 0, delta, 1.0)
    h = np.zeros_like(v)
    is_r = (v == r) & (delta > 0)
    is_g = (v == g) & (delta > 0) & ~is_r
    is_b = (delta > 0) & ~is_r & ~is_g
    h = np.where(is_r, 60.0 * (g - b) / safe, h)
    h = np.where(is_g, 120.0 + 60.0 * (b - r) / safe, h)
    h = np.where(is_b, 240.0 + 60.0 * (r - g) / safe, h)
    h = np.mod(h, 360.0) / 2.0
    h = np.round(h)
    h[h >= 180] -= 180
    out = np.stack([h, np.round(s), v], axis=-1)
    return out.astype(np.uint8)


@dataclass(frozen=True)
class ColorThresholds:
    """Inclusive HSV boxes. A hue range with min > max wraps around 180."""

    green_h: tuple[int, int] = (30, 90)
    green_s: tuple[int, int] = (60, 255)
    green_v: tuple[int, int] = (30, 255)
    white_s: tuple[int, int] = (0, 70)
    white_v: tuple[int, int] = (150, 255)

    def __post_init__(self):
        for name in ("green_s", "green_v", "white_s", "white_v"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name}: min exceeds max")


def _in_range(ch: np.ndarray, bounds: tuple[int, int], wrap: bool = False) -> np.ndarray:
    lo, hi = bounds
    if wrap and lo > hi:
        return (ch >= lo) | (ch <= hi)
    return (ch >= lo) & (ch <= hi)


def classify_colors(hsv: np.ndarray, lut: ColorThresholds | None = None) -> np.ndarray:
    """Label each pixel GREEN, WHITE or OTHER. White takes precedence."""
    lut = lut or ColorThresholds()
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    green = _in_range(h, lut.green_h, wrap=True) & _in_range(s, lut.green_s) & _in_range(v, lut.green_v)
    white = _in_range(s, lut.white_s) & _in_range(v, lut.white_v)
    labels = np.full(h.shape, OTHER, dtype=np.uint8)
    labels[green] = GREEN
    labels[white] = WHITE
    return labels


def rgb_to_gray(img: np.ndarray) -> np.ndarray:
    rgb = np.asarray(img, dtype=np.float64)
    return np.clip(np.round(rgb @ np.array([0.299, 0.587, 0.114])), 0, 255).astype(np.uint8)
