"""Synthetic crosswell traveltime benchmark.

Straight rays connect every source on the left well with every receiver on
the right well; the measurement operator is the sparse matrix of exact
ray-cell intersection lengths, so each row sums to the source-receiver
distance to machine precision.  A parametric moving-plume scenario supplies
the slowness-perturbation truth fields.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse

from hikf.grids import Grid2D


@dataclass(frozen=True)
class Acquisition:
    """Fixed crosswell geometry: all source-receiver pairs are rays."""

    sources: np.ndarray = field(repr=False)
    receivers: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name in ("sources", "receivers"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 1:
                raise ValueError(f"{name} must have shape (k, 2) with k >= 1")
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return len(self.sources) * len(self.receivers)

    def ray_endpoints(self):
        """(n, 2) source and receiver coordinates, source-major ordering."""
        ns, nr = len(self.sources), len(self.receivers)
        src = np.repeat(self.sources, nr, axis=0)
        rcv = np.tile(self.receivers, (ns, 1))
        return src, rcv


def default_acquisition(
    grid: Grid2D,
    n_sources: int = 6,
    n_receivers: int = 48,
    source_x: float | None = None,
    receiver_x: float | None = None,
) -> Acquisition:
    """Vertical wells with uniformly spaced stations, just inside the grid.

    The source well sits near the left edge and the receiver well near the
    right edge unless explicit x positions are given.
    """
    xmin, xmax, ymin, ymax = grid.extent
    if source_x is None:
        source_x = xmin + 0.5 * grid.dx
    if receiver_x is None:
        receiver_x = xmax - 0.5 * grid.dx
    for x in (source_x, receiver_x):
        if not (xmin <= x <= xmax):
            raise ValueError("well x position lies outside the grid")

    def stations(k):
        # uniform vertical spacing, symmetric margins
        return ymin + (np.arange(k) + 0.5) * (ymax - ymin) / k

    src = np.column_stack([np.full(n_sources, source_x), stations(n_sources)])
    rcv = np.column_stack([np.full(n_receivers, receiver_x), stations(n_receivers)])
    return Acquisition(src, rcv)


def _trace_ray(grid: Grid2D, p0, p1):
    """Cells crossed by the segment p0 -> p1 and the intersection lengths."""
    d = p1 - p0
    length = float(np.hypot(d[0], d[1]))
    if length == 0.0:
        raise ValueError("source coincides with receiver (zero-length ray)")
    x0, y0 = grid.origin
    ts = [np.array([0.0, 1.0])]
    if d[0] != 0.0:
        lines = x0 + np.arange(1, grid.nx) * grid.dx
        t = (lines - p0[0]) / d[0]
        ts.append(t[(t > 0.0) & (t < 1.0)])
    if d[1] != 0.0:
        lines = y0 + np.arange(1, grid.ny) * grid.dy
        t = (lines - p0[1]) / d[1]
        ts.append(t[(t > 0.0) & (t < 1.0)])
    t = np.unique(np.concatenate(ts))
    seg = np.diff(t) * length
    keep = seg > 0.0
    seg = seg[keep]
    tm = 0.5 * (t[:-1] + t[1:])[keep]
    mx = p0[0] + tm * d[0]
    my = p0[1] + tm * d[1]
    u = (mx - x0) / grid.dx
    w = (my - y0) / grid.dy
    i = np.floor(u).astype(np.int64)
    j = np.floor(w).astype(np.int64)
    # midpoints exactly on a gridline (grazing rays) go to the lower/left cell
    i[(u == i) & (i > 0)] -= 1
    j[(w == j) & (j > 0)] -= 1
    np.clip(i, 0, grid.nx - 1, out=i)
    np.clip(j, 0, grid.ny - 1, out=j)
    return grid.flat_index(i, j), seg


def build_ray_operator(grid: Grid2D, acq: Acquisition) -> scipy.sparse.csr_matrix:
    """Assemble the sparse (n, m) matrix of ray-cell intersection lengths."""
    xmin, xmax, ymin, ymax = grid.extent
    for name, pts in (("sources", acq.sources), ("receivers", acq.receivers)):
        inside = (
            (pts[:, 0] >= xmin) & (pts[:, 0] <= xmax)
            & (pts[:, 1] >= ymin) & (pts[:, 1] <= ymax)
        )
        if not inside.all():
            raise ValueError(f"{name} must lie within the grid bounding box")
    src, rcv = acq.ray_endpoints()
    rows, cols, vals = [], [], []
    for ray, (p0, p1) in enumerate(zip(src, rcv)):
        cells, seg = _trace_ray(grid, p0, p1)
        rows.append(np.full(len(cells), ray))
        cols.append(cells)
        vals.append(seg)
    H = scipy.sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(acq.n, grid.m),
    ).tocsr()
    H.sum_duplicates()
    return H


def apply_forward(H: scipy.sparse.spmatrix, delta_s: np.ndarray) -> np.ndarray:
    """Traveltime delays for a slowness-perturbation field."""
    delta_s = np.asarray(delta_s, dtype=float)
    if delta_s.shape[-1] != H.shape[1]:
        raise ValueError("field length does not match operator columns")
    return H @ delta_s


# ----------------------------------------------------------------------
# synthetic plume scenario
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class BlobSpec:
    """One anisotropic Gaussian feature moving from start to end."""

    amplitude: float
    sigma_x: float
    sigma_y: float
    start: tuple[float, float]
    end: tuple[float, float]
    growth: float = 1.0  # spread multiplier reached at breakthrough


@dataclass(frozen=True)
class PlumeScenario:
    """Slowness-perturbation truth fields; ``fields[t]`` is the state at step t.

    Row 0 is identically zero (nothing present before injection) and rows
    stop changing after the breakthrough step.
    """

    fields: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.fields, dtype=float)
        if arr.ndim != 2 or arr.shape[0] < 2:
            raise ValueError("fields must have shape (T + 1, m) with T >= 1")
        if not np.all(np.isfinite(arr)):
            raise ValueError("plume fields must be finite")
        if np.any(arr[0] != 0.0):
            raise ValueError("initial field must be zero")
        object.__setattr__(self, "fields", arr)

    @property
    def n_steps(self) -> int:
        return self.fields.shape[0] - 1

    @property
    def m(self) -> int:
        return self.fields.shape[1]


def make_plume(
    grid: Grid2D,
    blobs: list[BlobSpec],
    n_steps: int,
    breakthrough_step: int = 1,
) -> PlumeScenario:
    """Deterministic moving-plume fields on the grid cell centers.

    Each blob ramps linearly in amplitude and advances linearly from its
    start toward its end center until the breakthrough step, after which the
    field is frozen.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if breakthrough_step < 1:
        raise ValueError("breakthrough_step must be >= 1")
    centers = grid.cell_centers().coords
    fields = np.zeros((n_steps + 1, grid.m))
    for t in range(1, n_steps + 1):
        s = min(t, breakthrough_step) / breakthrough_step
        f = np.zeros(grid.m)
        for b in blobs:
            cx = b.start[0] + s * (b.end[0] - b.start[0])
            cy = b.start[1] + s * (b.end[1] - b.start[1])
            scale = 1.0 + s * (b.growth - 1.0)
            sx = b.sigma_x * scale
            sy = b.sigma_y * scale
            f += (b.amplitude * s) * np.exp(
                -((centers[:, 0] - cx) ** 2) / (2 * sx * sx)
                - ((centers[:, 1] - cy) ** 2) / (2 * sy * sy)
            )
        fields[t] = f
    return PlumeScenario(fields)


def save_plume(scenario: PlumeScenario, path) -> None:
    """Write the fields as columnar text: step, cell index, value."""
    T1, m = scenario.fields.shape
    step = np.repeat(np.arange(1, T1), m)
    cell = np.tile(np.arange(m), T1 - 1)
    np.savetxt(
        path,
        np.column_stack([step, cell, scenario.fields[1:].ravel()]),
        fmt=("%d", "%d", "%.17g"),
        header="step cell value",
    )


def load_plume(path) -> PlumeScenario:
    """Read fields written by save_plume (or any externally generated table)."""
    data = np.loadtxt(path, ndmin=2)
    if data.shape[1] != 3:
        raise ValueError("expected three columns: step, cell, value")
    step = data[:, 0].astype(int)
    cell = data[:, 1].astype(int)
    if step.min() < 1 or cell.min() < 0:
        raise ValueError("steps must start at 1 and cell indices at 0")
    T = step.max()
    m = cell.max() + 1
    fields = np.zeros((T + 1, m))
    fields[step, cell] = data[:, 2]
    return PlumeScenario(fields)
