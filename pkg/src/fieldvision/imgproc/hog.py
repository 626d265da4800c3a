"""Dense histogram of oriented gradients.

Unsigned orientations, votes interpolated bilinearly over neighbouring
cells and linearly over neighbouring orientation bins, blocks of
``block_cells x block_cells`` non-overlapping cells L2-normalized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_EPS = 1e-3


class HogShapeError(ValueError):
    pass


@dataclass(frozen=True)
class HogLayout:
    patch_size: int = 32
    cell_size: int = 8
    bins: int = 9
    block_cells: int = 2

    def __post_init__(self):
        if self.patch_size % self.cell_size:
            raise HogShapeError("patch size must be divisible by the cell size")
        if self.cells % self.block_cells:
            raise HogShapeError("cell count must be divisible by the block size")

    @property
    def cells(self) -> int:
        return self.patch_size // self.cell_size

    @property
    def length(self) -> int:
        return self.cells * self.cells * self.bins


@dataclass(frozen=True)
class HogDescriptor:
    values: np.ndarray
    cells_x: int
    cells_y: int
    bins: int


def _gradients(p: np.ndarray):
    a = np.pad(p, 1, mode="edge")
    gx = a[1:-1, 2:] - a[1:-1, :-2]
    gy = a[2:, 1:-1] - a[:-2, 1:-1]
    return gx, gy


def hog_descriptor(patch: np.ndarray, cell_size: int = 8, bins: int = 9, block_cells: int = 2) -> HogDescriptor:
    p = np.asarray(patch, dtype=np.float64)
    h, w = p.shape
    if h % cell_size or w % cell_size:
        raise HogShapeError(f"patch {w}x{h} not divisible by cell size {cell_size}")
    cy, cx = h // cell_size, w // cell_size
    if cy % block_cells or cx % block_cells:
        raise HogShapeError("cell grid not divisible by block size")
    gx, gy = _gradients(p)
    mag = np.hypot(gx, gy)
    ang = np.mod(np.arctan2(gy, gx), np.pi)

    # orientation interpolation between bin centres
    bpos = ang / np.pi * bins - 0.5
    b0 = np.floor(bpos).astype(int)
    fb = bpos - b0
    b1 = (b0 + 1) % bins
    b0 = b0 % bins

    # spatial interpolation between cell centres
    yy, xx = np.mgrid[0:h, 0:w]
    fy = (yy + 0.5) / cell_size - 0.5
    fx = (xx + 0.5) / cell_size - 0.5
    y0 = np.floor(fy).astype(int)
    x0 = np.floor(fx).astype(int)
    wy1 = fy - y0
    wx1 = fx - x0

    hist = np.zeros((cy + 2, cx + 2, bins))
    for dy, wy in ((0, 1 - wy1), (1, wy1)):
        for dx, wx in ((0, 1 - wx1), (1, wx1)):
            ws = mag * wy * wx
            ry, rx = y0 + dy + 1, x0 + dx + 1
            np.add.at(hist, (ry, rx, b0), ws * (1 - fb))
            np.add.at(hist, (ry, rx, b1), ws * fb)
    hist = hist[1:-1, 1:-1]

    out = np.empty_like(hist)
    for by in range(0, cy, block_cells):
        for bx in range(0, cx, block_cells):
            blk = hist[by : by + block_cells, bx : bx + block_cells]
            out[by : by + block_cells, bx : bx + block_cells] = blk / np.sqrt(np.sum(blk * blk) + _EPS**2)
    return HogDescriptor(out.reshape(-1), cx, cy, bins)
