"""Normalized HSV colour histograms and the Bhattacharyya distance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CHANNEL_RANGE = {"H": 180, "S": 256, "V": 256}
DEFAULT_BINS = (30, 16, 16)


class EmptyHistogramError(ValueError):
    pass


class HistogramShapeError(ValueError):
    pass


@dataclass(frozen=True)
class Histogram:
    bins: np.ndarray
    channel: str

    def __post_init__(self):
        b = np.array(self.bins, dtype=float)
        if np.any(b < 0):
            raise ValueError("histogram bins must be non-negative")
        b.flags.writeable = False
        object.__setattr__(self, "bins", b)

    def normalized(self) -> "Histogram":
        s = self.bins.sum()
        if s <= 0:
            raise EmptyHistogramError("cannot normalize an empty histogram")
        return Histogram(self.bins / s, self.channel)

    def to_list(self) -> list[float]:
        return [float(v) for v in self.bins]


def hsv_histogram(hsv: np.ndarray, mask: np.ndarray, bins=DEFAULT_BINS) -> tuple[Histogram, Histogram, Histogram]:
    """Per-channel normalized histograms over the masked pixels."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise EmptyHistogramError("mask selects no pixels")
    px = np.asarray(hsv)[mask]
    out = []
    for c, (name, nb) in enumerate(zip("HSV", bins)):
        rng = CHANNEL_RANGE[name]
        idx = np.minimum((px[:, c].astype(np.int64) * nb) // rng, nb - 1)
        counts = np.bincount(idx, minlength=nb).astype(float)
        out.append(Histogram(counts / counts.sum(), name))
    return tuple(out)


def bhattacharyya_distance(a: Histogram, b: Histogram) -> float:
    """sqrt(1 - sum_i sqrt(a_i b_i)) for normalized histograms."""
    if a.bins.shape != b.bins.shape:
        raise HistogramShapeError(f"bin count mismatch: {a.bins.size} vs {b.bins.size}")
    bc = float(np.sum(np.sqrt(a.bins * b.bins)))
    return float(np.sqrt(max(0.0, 1.0 - min(bc, 1.0))))


def mean_distance(hists, reference) -> float:
    return float(np.mean([bhattacharyya_distance(h, r) for h, r in zip(hists, reference)]))
