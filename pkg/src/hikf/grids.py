"""2D structured grids and point sets.

One ordering convention is used everywhere: cells are stored row-major with
the x index fastest, so cell (i, j) has flat index ``k = j * nx + i`` and the
state vector, ray operator columns and tree charges all agree on it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Grid2D:
    nx: int
    ny: int
    dx: float = 1.0
    dy: float = 1.0
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError("nx and ny must be positive")
        if not (self.dx > 0 and self.dy > 0):
            raise ValueError("dx and dy must be positive")

    @property
    def m(self) -> int:
        """Number of cells (state dimension)."""
        return self.nx * self.ny

    @property
    def extent(self) -> tuple[float, float, float, float]:
        """(xmin, xmax, ymin, ymax) of the grid bounding box."""
        x0, y0 = self.origin
        return (x0, x0 + self.nx * self.dx, y0, y0 + self.ny * self.dy)

    def flat_index(self, i, j):
        return np.asarray(j) * self.nx + np.asarray(i)

    def cell_index(self, k):
        k = np.asarray(k)
        return k % self.nx, k // self.nx

    def cell_centers(self) -> "PointSet":
        x0, y0 = self.origin
        xs = x0 + (np.arange(self.nx) + 0.5) * self.dx
        ys = y0 + (np.arange(self.ny) + 0.5) * self.dy
        gx, gy = np.meshgrid(xs, ys)  # rows over y, x fastest when flattened
        return PointSet(np.column_stack([gx.ravel(), gy.ravel()]))


@dataclass(frozen=True)
class PointSet:
    coords: np.ndarray = field(repr=False)

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise ValueError("coords must have shape (m, 2)")
        if coords.shape[0] < 1:
            raise ValueError("need at least one point")
        if not np.all(np.isfinite(coords)):
            raise ValueError("coordinates must be finite")
        object.__setattr__(self, "coords", coords)

    def __len__(self) -> int:
        return self.coords.shape[0]

    @property
    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        return self.coords.min(axis=0), self.coords.max(axis=0)
