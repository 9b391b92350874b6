"""Black-box fast multipole method for kernel Gram-matrix products.

Evaluates ``u_i = sum_j K(x_i, x_j) v_j`` in O(m) by splitting the sum into a
near field (dense blocks between adjacent leaf boxes of a quadtree, assembled
once as a sparse matrix) and a far field where well-separated same-level box
interactions are compressed by tensorized Chebyshev interpolation:

    K(x, y) ~= sum_ab S_a(x) K(xa, yb) S_b(y)

with S the Chebyshev interpolation weights on a box.  The tree uses a uniform
level structure: the depth is increased until every leaf holds at most
``max_leaf_points`` points (subject to hard caps), which keeps interaction
lists and translation operators shared per level.  Same-level boxes interact
in the far field iff they are not adjacent and their parents are adjacent
(one-box-buffer rule); everything else is near field, so every source-target
pair is covered exactly once.

Accuracy is governed by the Chebyshev node count per dimension; no SVD
recompression is applied.  For kernels with a finite length scale the node
count is raised at coarse levels whose boxes are large compared to the
length scale (where a fixed-order interpolant would dominate the error);
``n_cheb`` still sets the baseline accuracy through the finest level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse

from hikf.grids import PointSet
from hikf.kernels import KernelSpec, eval_cross

_MAX_DEPTH = 20


@dataclass(frozen=True)
class FmmConfig:
    """Tree/expansion parameters.

    ``tolerance_hint`` is documentation only; accuracy is set by ``n_cheb``
    (5 gives ~1e-9 relative error for smooth kernels, 7 gives ~1e-11).
    """

    n_cheb: int = 5
    max_leaf_points: int = 64
    tolerance_hint: float | None = None

    def __post_init__(self):
        if not (2 <= self.n_cheb <= 12):
            raise ValueError("n_cheb must lie in [2, 12]")
        if self.max_leaf_points < 1:
            raise ValueError("max_leaf_points must be >= 1")


def _cheb_nodes(n: int) -> np.ndarray:
    """Chebyshev nodes of the first kind on [-1, 1]."""
    k = np.arange(n)
    return np.cos((2 * k + 1) * np.pi / (2 * n))


def _cheb_weights(x: np.ndarray, n: int) -> np.ndarray:
    """Interpolation weights S_k(x) onto the n first-kind Chebyshev nodes.

    S_k(x) = 1/n + (2/n) * sum_{j=1}^{n-1} T_j(x_k) T_j(x); rows index the
    evaluation points, columns the nodes.
    """
    nodes = _cheb_nodes(n)
    Tx = np.empty((len(x), n))
    Tn = np.empty((n, n))
    for T, pts in ((Tx, np.asarray(x, dtype=float)), (Tn, nodes)):
        T[:, 0] = 1.0
        if n > 1:
            T[:, 1] = pts
        for j in range(2, n):
            T[:, j] = 2 * pts * T[:, j - 1] - T[:, j - 2]
    return (1.0 + 2.0 * (Tx[:, 1:] @ Tn[:, 1:].T)) / n


def _grouped_arange(starts: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """Concatenate ``arange(s, s + l)`` for every (s, l) pair."""
    lengths = np.asarray(lengths)
    total = int(lengths.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    offsets = np.repeat(np.asarray(starts, dtype=np.int64), lengths)
    group_start = np.repeat(np.cumsum(lengths) - lengths, lengths)
    return offsets + np.arange(total, dtype=np.int64) - group_start


class FmmTree:
    """Immutable operator state for fast kernel matvecs; built by build_tree."""

    def __init__(self, points: PointSet, kernel: KernelSpec, config: FmmConfig):
        self.points = points
        self.kernel = kernel
        self.config = config
        self.m = len(points)
        self._build()

    # ------------------------------------------------------------------
    # construction
    # ------------------------------------------------------------------

    def _build(self):
        pts = self.points.coords
        lo, hi = self.points.bounding_box
        size = float(max(hi[0] - lo[0], hi[1] - lo[1]))
        if size == 0.0:
            size = 1.0
        size *= 1.0 + 1e-12  # points exactly on the upper face stay inside
        self.root_lo = lo
        self.root_size = size

        self.depth = self._choose_depth(pts, lo, size)
        G = 1 << self.depth
        bx, by = self._box_indices(pts, self.depth)
        flat = bx * G + by
        order = np.argsort(flat, kind="stable")
        self._order = order
        sorted_flat = flat[order]
        occ, starts_in_sorted, counts = np.unique(
            sorted_flat, return_index=True, return_counts=True
        )
        self._leaf_ids = occ
        self._leaf_starts = starts_in_sorted
        self._leaf_counts = counts

        self._build_near(pts, occ, starts_in_sorted, counts, order, G)
        if self.depth >= 2:
            self._select_orders()
            self._build_interp(pts, bx, by)
            self._build_transfer()
            self._build_m2l()

    def _choose_depth(self, pts, lo, size) -> int:
        depth = 0
        m = len(pts)
        while depth < _MAX_DEPTH:
            bx, by = self._box_indices(pts, depth)
            flat = bx * (1 << depth) + by
            _, counts = np.unique(flat, return_counts=True)
            if counts.max() <= self.config.max_leaf_points:
                return depth
            if 4 ** (depth + 1) > max(4096, 8 * m):
                # deeper levels would cost more than they save
                return depth
            depth += 1
        return depth

    def _box_indices(self, pts, depth):
        G = 1 << depth
        h = self.root_size / G
        u = (pts[:, 0] - self.root_lo[0]) / h
        w = (pts[:, 1] - self.root_lo[1]) / h
        bx = np.floor(u).astype(np.int64)
        by = np.floor(w).astype(np.int64)
        # points exactly on a split line belong to the lower/left box
        bx[(u == bx) & (bx > 0)] -= 1
        by[(w == by) & (by > 0)] -= 1
        np.clip(bx, 0, G - 1, out=bx)
        np.clip(by, 0, G - 1, out=by)
        return bx, by

    def _build_near(self, pts, occ, starts, counts, order, G):
        obx, oby = occ // G, occ % G
        t_rank = []
        s_rank = []
        for ox in (-1, 0, 1):
            for oy in (-1, 0, 1):
                nbx, nby = obx + ox, oby + oy
                valid = (nbx >= 0) & (nbx < G) & (nby >= 0) & (nby < G)
                nid = nbx[valid] * G + nby[valid]
                pos = np.searchsorted(occ, nid)
                pos = np.minimum(pos, len(occ) - 1)
                found = occ[pos] == nid
                t_rank.append(np.nonzero(valid)[0][found])
                s_rank.append(pos[found])
        ti = np.concatenate(t_rank)
        si = np.concatenate(s_rank)
        tc = counts[ti]
        sc = counts[si]
        # rows: each target point of a pair repeated (source count) times
        t_pts = order[_grouped_arange(starts[ti], tc)]
        rows = np.repeat(t_pts, np.repeat(sc, tc))
        # cols: the full source slice for every (pair, target point)
        g_starts = np.repeat(starts[si], tc)
        g_lens = np.repeat(sc, tc)
        cols = order[_grouped_arange(g_starts, g_lens)]
        r = np.linalg.norm(pts[rows] - pts[cols], axis=1)
        if self.kernel.family == "logarithm":
            zero = r == 0
            vals = self.kernel.log_amplitude * np.log(np.where(zero, 1.0, r))
            vals[zero] = 0.0
        else:
            p = self.kernel.effective_power
            vals = self.kernel.variance * np.exp(-((r / self.kernel.length_scale) ** p))
        self.near = scipy.sparse.coo_matrix(
            (vals, (rows, cols)), shape=(self.m, self.m)
        ).tocsr()

    # maximum boosted node count at coarse levels
    _MAX_ORDER = 16

    def _interp_error_estimate(self, n: int, h: float) -> float:
        """Worst-case far-field interpolation error at box size h, order n.

        Samples the closest admissible (one-buffer) box pair and compares the
        Chebyshev surrogate against the exact kernel, normalized by the
        kernel point variance.
        """
        u = ((np.arange(9) + 0.5) / 9.0) * 2.0 - 1.0
        pts1d = u * (h / 2.0)
        tpts = np.column_stack([np.repeat(pts1d, 9), np.tile(pts1d, 9)])
        spts = tpts + np.array([2.0 * h, 0.0])
        nodes = _cheb_nodes(n)
        n2d = np.column_stack([np.repeat(nodes, n), np.tile(nodes, n)]) * (h / 2.0)
        tn = n2d
        sn = n2d + np.array([2.0 * h, 0.0])
        W1 = _cheb_weights(u, n)
        S = np.einsum("pi,qj->pqij", W1, W1).reshape(81, n * n)
        approx = S @ eval_cross(self.kernel, tn, sn) @ S.T
        exact = eval_cross(self.kernel, tpts, spts)
        return float(np.abs(approx - exact).max() / max(self.kernel.variance, np.finfo(float).tiny))

    def _select_orders(self):
        """Per-level node counts; coarse levels are boosted so their error
        does not exceed the finest level's baseline."""
        n = self.config.n_cheb
        self._orders = {self.depth: n}
        if self.kernel.family == "logarithm":
            # scale-free kernel; a fixed order behaves the same at every level
            for lev in range(2, self.depth):
                self._orders[lev] = n
            return
        h_leaf = self.root_size / (1 << self.depth)
        baseline = max(self._interp_error_estimate(n, h_leaf), 1e-16)
        for lev in range(2, self.depth):
            h = self.root_size / (1 << lev)
            order = n
            while order < self._MAX_ORDER and self._interp_error_estimate(order, h) > baseline:
                order += 1
            self._orders[lev] = order

    def _build_interp(self, pts, bx, by):
        n = self._orders[self.depth]
        G = 1 << self.depth
        h = self.root_size / G
        # local coordinates within the leaf box, mapped to [-1, 1]
        xi = 2.0 * ((pts[:, 0] - self.root_lo[0]) / h - bx) - 1.0
        eta = 2.0 * ((pts[:, 1] - self.root_lo[1]) / h - by) - 1.0
        Wx = _cheb_weights(xi, n)
        Wy = _cheb_weights(eta, n)
        W2 = np.einsum("pi,pj->pij", Wx, Wy).reshape(self.m, n * n)
        flat = bx * G + by
        n2 = n * n
        indices = (flat[:, None] * n2 + np.arange(n2)[None, :]).ravel()
        indptr = np.arange(self.m + 1, dtype=np.int64) * n2
        self._interp = scipy.sparse.csr_matrix(
            (W2.ravel(), indices, indptr), shape=(self.m, (G * G) * n2)
        )

    def _build_transfer(self):
        # (n_child^2, n_parent^2) shift operators between adjacent levels
        self._shift = {}
        for lev in range(2, self.depth):
            n_par = self._orders[lev]
            n_child = self._orders[lev + 1]
            child_nodes = _cheb_nodes(n_child)
            ops = {}
            for cx in (0, 1):
                for cy in (0, 1):
                    # child nodes expressed in parent box coordinates
                    Bx = _cheb_weights((child_nodes + (2 * cx - 1)) / 2.0, n_par)
                    By = _cheb_weights((child_nodes + (2 * cy - 1)) / 2.0, n_par)
                    ops[(cx, cy)] = np.kron(Bx, By)
            self._shift[lev] = ops

    def _m2l_offsets(self):
        for dx in range(-3, 4):
            for dy in range(-3, 4):
                if max(abs(dx), abs(dy)) >= 2:
                    yield dx, dy

    def _build_m2l(self):
        self._m2l_ops = {}
        self._m2l_pairs = {}
        for lev in range(2, self.depth + 1):
            n = self._orders[lev]
            nodes = _cheb_nodes(n)
            nodes2d = np.column_stack(
                [np.repeat(nodes, n), np.tile(nodes, n)]
            )  # matches the (ix * n + iy) coefficient ordering
            G = 1 << lev
            h = self.root_size / G
            tnodes = nodes2d * (h / 2.0)
            idx = np.arange(G)
            for dx, dy in self._m2l_offsets():
                # parent-adjacency (one-box-buffer) per parity, plus bounds
                mx = (idx + dx >= 0) & (idx + dx < G) & (np.abs(((idx + dx) >> 1) - (idx >> 1)) <= 1)
                my = (idx + dy >= 0) & (idx + dy < G) & (np.abs(((idx + dy) >> 1) - (idx >> 1)) <= 1)
                tx = idx[mx]
                ty = idx[my]
                if len(tx) == 0 or len(ty) == 0:
                    continue
                t_flat = (tx[:, None] * G + ty[None, :]).ravel()
                s_flat = ((tx[:, None] + dx) * G + (ty[None, :] + dy)).ravel()
                snodes = np.array([dx * h, dy * h]) + tnodes
                M = eval_cross(self.kernel, tnodes, snodes)
                self._m2l_ops[(lev, dx, dy)] = M
                self._m2l_pairs[(lev, dx, dy)] = (t_flat, s_flat)

    # ------------------------------------------------------------------
    # application
    # ------------------------------------------------------------------

    def matvec(self, v: np.ndarray) -> np.ndarray:
        """Approximate ``G @ v`` for the kernel Gram matrix over the points."""
        v = np.asarray(v, dtype=float)
        if v.shape != (self.m,):
            raise ValueError(f"expected vector of length {self.m}, got shape {v.shape}")
        return self.matmat(v[:, None])[:, 0]

    def matmat(self, V: np.ndarray) -> np.ndarray:
        """Column-wise matvec: approximate ``G @ V`` for an (m, k) matrix."""
        V = np.asarray(V, dtype=float)
        if V.ndim != 2 or V.shape[0] != self.m:
            raise ValueError(f"expected matrix with {self.m} rows, got shape {V.shape}")
        out = self.near @ V
        if self.depth < 2:
            return out
        k = V.shape[1]

        # upward pass: leaf anterpolation, then child-to-parent shifts
        G = 1 << self.depth
        n2 = self._orders[self.depth] ** 2
        w = {self.depth: (self._interp.T @ V).reshape(G, G, n2, k)}
        for lev in range(self.depth - 1, 1, -1):
            Gp = 1 << lev
            wp = np.zeros((Gp, Gp, self._orders[lev] ** 2, k))
            child = w[lev + 1]
            for (cx, cy), C in self._shift[lev].items():
                wp += np.einsum("xyak,ab->xybk", child[cx::2, cy::2], C)
            w[lev] = wp

        # downward pass: M2L per level plus parent-to-child shifts
        local = None
        for lev in range(2, self.depth + 1):
            Gl = 1 << lev
            nl2 = self._orders[lev] ** 2
            l_lev = np.zeros((Gl * Gl, nl2, k))
            w_flat = w[lev].reshape(Gl * Gl, nl2, k)
            for dx, dy in self._m2l_offsets():
                key = (lev, dx, dy)
                if key not in self._m2l_ops:
                    continue
                t_flat, s_flat = self._m2l_pairs[key]
                l_lev[t_flat] += np.matmul(self._m2l_ops[key], w_flat[s_flat])
            l_lev = l_lev.reshape(Gl, Gl, nl2, k)
            if local is not None:
                for (cx, cy), C in self._shift[lev - 1].items():
                    l_lev[cx::2, cy::2] += np.einsum("xybk,ab->xyak", local, C)
            local = l_lev

        out += self._interp @ local.reshape((G * G) * n2, k)
        return out


def build_tree(points: PointSet, kernel: KernelSpec, config: FmmConfig | None = None) -> FmmTree:
    """Build the quadtree and precompute all translation operators."""
    if config is None:
        config = FmmConfig()
    return FmmTree(points, kernel, config)
