"""Connected component labeling and outer contour extraction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from skimage.measure import find_contours

_STRUCT = {
    4: np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool),
    8: np.ones((3, 3), dtype=bool),
}


@dataclass(frozen=True)
class Component:
    label: int
    rows: np.ndarray
    cols: np.ndarray
    bbox: tuple[int, int, int, int]  # row0, col0, row1 (exclusive), col1 (exclusive)

    @property
    def area(self) -> int:
        return int(self.rows.size)

    @property
    def centroid(self) -> tuple[float, float]:
        """(x, y) pixel centroid."""
        return float(self.cols.mean()), float(self.rows.mean())

    def mask(self, shape: tuple[int, int] | None = None) -> np.ndarray:
        """Boolean mask, either full-image (``shape``) or cropped to the bbox."""
        if shape is not None:
            m = np.zeros(shape, dtype=bool)
            m[self.rows, self.cols] = True
            return m
        r0, c0, r1, c1 = self.bbox
        m = np.zeros((r1 - r0, c1 - c0), dtype=bool)
        m[self.rows - r0, self.cols - c0] = True
        return m


def connected_components(binary: np.ndarray, connectivity: int = 8, min_area: int = 1) -> list[Component]:
    """Foreground components sorted by area (descending, ties by label)."""
    if connectivity not in _STRUCT:
        raise ValueError("connectivity must be 4 or 8")
    labels, n = ndimage.label(np.asarray(binary, dtype=bool), structure=_STRUCT[connectivity])
    if n == 0:
        return []
    flat = labels.ravel()
    order = np.argsort(flat, kind="stable")
    counts = np.bincount(flat, minlength=n + 1)
    starts = np.concatenate([[0], np.cumsum(counts)])
    w = labels.shape[1]
    comps = []
    for lab in range(1, n + 1):
        if counts[lab] < min_area:
            continue
        idx = order[starts[lab] : starts[lab + 1]]
        rows, cols = np.divmod(idx, w)
        bbox = (int(rows.min()), int(cols.min()), int(rows.max()) + 1, int(cols.max()) + 1)
        comps.append(Component(lab, rows, cols, bbox))
    comps.sort(key=lambda c: (-c.area, c.label))
    return comps


def outer_contour(comp: Component, fill_holes: bool = True) -> np.ndarray:
    """Longest closed contour of a component, as (x, y) pixel coordinates."""
    m = comp.mask()
    if fill_holes:
        m = ndimage.binary_fill_holes(m)
    padded = np.pad(m, 1).astype(float)
    contours = find_contours(padded, 0.5)
    if not contours:
        return np.array([[comp.cols[0], comp.rows[0]]], dtype=float)
    c = max(contours, key=len)
    r0, c0 = comp.bbox[0], comp.bbox[1]
    return np.stack([c[:, 1] - 1 + c0, c[:, 0] - 1 + r0], axis=1)
