"""Clearance-field skeleton of a rasterized freespace.

Vertices are grid cells that are local ridges of the clearance field,
linked by 8-adjacency. Ridge detection alone can sever the axis where a
wide region drains into a narrow one (the cells under a saddle all have
a strictly higher uphill neighbor), so severed components are re-joined
by bridge chains routed through the widest free cells available, which
is where the continuous axis runs. The graph carries all-pairs
shortest-path tables so routing and projection are table lookups at
runtime.

Edge weights are quantized to integers (1e6 per cell for axis steps,
1414214 for diagonals) so path sums stay exact in float64 regardless of
summation order. World lengths are the integer weights times
cell_size * 1e-6, which misstates a diagonal by 2e-7 relative; every
consumer tolerance sits far above that.
"""

from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra
from scipy.spatial import cKDTree

from .geometry import OccupancyGrid
from .params import DEFAULTS

AXIS_W = 1_000_000
DIAG_W = 1_414_214

_SHIFTS = [
    (0, 1, AXIS_W),
    (0, -1, AXIS_W),
    (1, 0, AXIS_W),
    (-1, 0, AXIS_W),
    (1, 1, DIAG_W),
    (1, -1, DIAG_W),
    (-1, 1, DIAG_W),
    (-1, -1, DIAG_W),
]


@dataclass
class PathPoint:
    position: np.ndarray
    radius: float
    arc: float
    clamped: bool


class SkeletonPath:
    """A shortest path along the skeleton, arc-length parameterized."""

    def __init__(self, indices, positions, radii, cum_length):
        self.indices = indices
        self.positions = positions
        self.radii = radii
        self.cum_length = cum_length
        self.total_length = float(cum_length[-1])

    def __len__(self):
        return len(self.indices)

    def point_at(self, alpha: float) -> PathPoint:
        """Point and interpolated radius at arc-length fraction alpha.

        alpha outside [0, 1] is clamped and flagged.
        """
        clamped = alpha < 0.0 or alpha > 1.0
        a = min(max(alpha, 0.0), 1.0)
        if len(self.indices) == 1 or self.total_length == 0.0:
            return PathPoint(self.positions[0].copy(), float(self.radii[0]), 0.0, clamped)
        s = a * self.total_length
        k = int(np.searchsorted(self.cum_length, s, side="right")) - 1
        k = min(max(k, 0), len(self.indices) - 2)
        seg = self.cum_length[k + 1] - self.cum_length[k]
        t = (s - self.cum_length[k]) / seg if seg > 0 else 0.0
        pos = self.positions[k] + t * (self.positions[k + 1] - self.positions[k])
        rad = self.radii[k] + t * (self.radii[k + 1] - self.radii[k])
        return PathPoint(pos, float(rad), float(s), clamped)

    def tangent(self, end: int) -> np.ndarray:
        """Unit tangent at the start (end=0) or end (end=1), pointing
        along increasing arc length."""
        if len(self.indices) < 2:
            return np.zeros(2)
        if end == 0:
            d = self.positions[1] - self.positions[0]
        else:
            d = self.positions[-1] - self.positions[-2]
        n = np.linalg.norm(d)
        return d / n if n > 0 else np.zeros(2)

    def end_direction(self, end: int, span: float) -> np.ndarray:
        """Unit chord near an endpoint, pointing along increasing arc.

        The chord runs from the endpoint to the point span arc length
        into the path. Single segments zigzag between grid axes and
        diagonals, so anything comparing directions against the path
        should use this, not tangent().
        """
        if len(self.indices) < 2:
            return np.zeros(2)
        f = min(span / self.total_length, 1.0) if self.total_length > 0 else 1.0
        if end == 0:
            d = self.point_at(f).position - self.positions[0]
        else:
            d = self.positions[-1] - self.point_at(1.0 - f).position
        n = np.linalg.norm(d)
        return d / n if n > 0 else self.tangent(end)

    def nearest_vertex(self, p) -> int:
        """Index into the path of the vertex nearest to world point p."""
        d = self.positions - np.asarray(p, float)
        return int(np.argmin(d[:, 0] ** 2 + d[:, 1] ** 2))


class SkeletonGraph:
    """Skeleton vertices, clearance radii, and routing tables."""

    def __init__(self, positions, radii, edges, cells, cell_size, build_log):
        self.positions = positions
        self.radii = radii
        self.edges = edges
        self.cells = cells
        self.cell_size = float(cell_size)
        self.build_log = build_log
        self._factor = self.cell_size * 1e-6
        n = len(positions)
        self.vertex_count = n

        if edges.size:
            rows, cols = edges[:, 0], edges[:, 1]
            w = edges[:, 2].astype(np.float64)
        else:
            rows = cols = np.zeros(0, dtype=int)
            w = np.zeros(0)
        graph = csr_matrix((w, (rows, cols)), shape=(n, n))
        ncomp, labels = connected_components(graph, directed=False)
        self.component = labels
        if ncomp > 1:
            msg = f"skeleton splits into {ncomp} components on a single freespace"
            build_log.append(msg)
            warnings.warn(msg, stacklevel=2)

        steps, pred = dijkstra(
            graph, directed=False, return_predecessors=True
        )
        self.apsp_dist = steps * self._factor
        self.apsp_next = _next_hop_table(pred, steps)
        self._steps = steps
        self._tree = cKDTree(positions)
        self._adj = _adjacency(n, edges)

    def radius(self, v: int) -> float:
        return float(self.radii[v])

    def project(self, p) -> int:
        """Index of the vertex nearest to world point p.

        Exact Euclidean ties resolve to the lowest vertex index, matching
        a linear argmin scan.
        """
        p = np.asarray(p, dtype=float)
        n = self.vertex_count
        k = min(8, n)
        while True:
            dist, idx = self._tree.query(p, k=k)
            idx = np.atleast_1d(idx)
            d2 = self._d2(p, idx)
            dmin = d2.min()
            if k >= n or d2.max() > dmin:
                break
            k = min(2 * k, n)
        winners = idx[d2 == dmin]
        return int(winners.min())

    def _d2(self, p, idx):
        v = self.positions[idx]
        dx = v[:, 0] - p[0]
        dy = v[:, 1] - p[1]
        return dx * dx + dy * dy

    def connected(self, a: int, b: int) -> bool:
        return self.component[a] == self.component[b]

    def shortest_path(self, a: int, b: int) -> SkeletonPath:
        """Shortest path from vertex a to vertex b via the next-hop table.

        Ties between equal-length grid paths are broken the same way for
        both query directions: the walk always starts at the lower index,
        so path(a, b) and path(b, a) trace the same polyline.
        """
        if not self.connected(a, b):
            raise ValueError(f"vertices {a} and {b} lie in different components")
        lo, hi = (a, b) if a <= b else (b, a)
        order = [lo]
        cur = lo
        while cur != hi:
            cur = int(self.apsp_next[cur, hi])
            order.append(cur)
        if a > b:
            order.reverse()
        indices = np.array(order, dtype=int)
        positions = self.positions[indices]
        radii = self.radii[indices]
        cum_int = np.zeros(len(order), dtype=np.int64)
        for i in range(1, len(order)):
            cum_int[i] = cum_int[i - 1] + _edge_weight(
                self.cells[order[i - 1]], self.cells[order[i]]
            )
        cum = cum_int.astype(np.float64) * self._factor
        return SkeletonPath(indices, positions, radii, cum)

    def degree(self, v: int) -> int:
        return len(self._adj[v])


def _edge_weight(cell_a, cell_b) -> int:
    dx = abs(int(cell_a[0]) - int(cell_b[0]))
    dy = abs(int(cell_a[1]) - int(cell_b[1]))
    if dx + dy == 1:
        return AXIS_W
    if dx == 1 and dy == 1:
        return DIAG_W
    raise ValueError("path steps must join 8-adjacent cells")


def _adjacency(n, edges):
    adj = [[] for _ in range(n)]
    for a, b, _ in edges:
        adj[a].append(b)
    return adj


def _next_hop_table(pred: np.ndarray, steps: np.ndarray) -> np.ndarray:
    """Next-hop table from a predecessor matrix by pointer doubling.

    next[i, j] is the vertex after i on the shortest path to j, i on the
    diagonal, and -1 for unreachable pairs.
    """
    n = pred.shape[0]
    nxt = np.full((n, n), -1, dtype=np.int32)
    cols = np.arange(n)
    done_marker = n  # out of range, flags entries that need no resolution
    for i in range(n):
        row = pred[i]
        res = np.full(n, -1, dtype=np.int64)
        res[row == i] = cols[row == i]
        res[i] = i
        res[~np.isfinite(steps[i])] = done_marker
        anc = row.astype(np.int64)
        anc[anc < 0] = i
        while True:
            unknown = res < 0
            if not unknown.any():
                break
            hop = res[anc]
            take = unknown & (hop >= 0) & (hop != done_marker)
            res[take] = hop[take]
            anc = anc[anc]
        res[res == done_marker] = -1
        nxt[i] = res.astype(np.int32)
    return nxt


_EIGHT = np.ones((3, 3), dtype=bool)


def _bfs_bridge(mask: np.ndarray, sources: np.ndarray, targets: np.ndarray):
    """Shortest 8-connected chain inside mask from any source to any target.

    Returns the strictly-interior cells of the chain as (iy, ix) pairs.
    Fixed neighbor order plus first-hit backtracking keeps the choice
    deterministic among equal-length chains.
    """
    ny, nx = mask.shape
    parent = np.full((ny, nx), -1, dtype=np.int64)
    queue = deque()
    src = np.flatnonzero(sources.ravel())
    parent.ravel()[src] = src
    queue.extend(src)
    hit = -1
    while queue:
        cur = queue.popleft()
        cy, cx = divmod(cur, nx)
        if targets[cy, cx]:
            hit = cur
            break
        for dy, dx, _ in _SHIFTS:
            y, x = cy + dy, cx + dx
            if 0 <= y < ny and 0 <= x < nx and mask[y, x] and parent[y, x] < 0:
                parent[y, x] = cur
                queue.append(y * nx + x)
    if hit < 0:
        return None
    chain = []
    cur = hit
    while parent.ravel()[cur] != cur:
        chain.append(cur)
        cur = parent.ravel()[cur]
    return [divmod(c, nx) for c in chain[1:]]


def _bridge_ridge_gaps(keep: np.ndarray, substrate: np.ndarray, clear: np.ndarray,
                       build_log: list) -> None:
    """Re-join severed ridge components in place.

    Each pass finds the highest clearance threshold at which two ridge
    components share one thresholded free blob, then adds the shortest
    chain through that blob. Components only a sealed wall separates
    stay apart; the caller's component check reports those.
    """
    added = 0
    while True:
        labels, ncomp = ndimage.label(keep, structure=_EIGHT)
        if ncomp <= 1:
            break
        values = np.unique(clear[substrate])

        def linked_pair(level):
            # Lowest pair of ridge components meeting in one blob at this
            # clearance level, or None.
            mask = substrate & (clear >= level)
            blobs, _ = ndimage.label(mask, structure=_EIGHT)
            attach = (labels > 0) & mask
            pair_best = None
            blob_ids = blobs[attach]
            comp_ids = labels[attach]
            for b in np.unique(blob_ids):
                comps = np.unique(comp_ids[blob_ids == b])
                if len(comps) > 1:
                    cand = (int(comps[0]), int(comps[1]), int(b))
                    if pair_best is None or cand[:2] < pair_best[:2]:
                        pair_best = cand
            return pair_best

        lo, hi = 0, len(values) - 1
        if linked_pair(float(values[lo])) is None:
            break
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if linked_pair(float(values[mid])) is not None:
                lo = mid
            else:
                hi = mid - 1
        level = float(values[lo])
        a, b, blob = linked_pair(level)
        mask = substrate & (clear >= level)
        blobs, _ = ndimage.label(mask, structure=_EIGHT)
        inside = blobs == blob
        chain = _bfs_bridge(inside, inside & (labels == a), inside & (labels == b))
        if not chain:
            break
        for iy, ix in chain:
            keep[iy, ix] = True
        added += len(chain)
    if added:
        build_log.append(f"bridged ridge gaps with {added} connector cells")


def extract_skeleton(grid: OccupancyGrid, min_clearance: float | None = None) -> SkeletonGraph:
    """Extract the clearance-ridge skeleton of a rasterized freespace.

    A free cell stays only where it is a local ridge of the clearance
    field: no 8-neighbor may exceed its clearance by a full cell. The
    margin is one cell for diagonal neighbors too; requiring the full
    diagonal step there would strand smooth slopes along slanted walls
    as fake ridges and blow the vertex count up. Cells under the
    min_clearance floor (default: half the vehicle bounding radius) are
    dropped, as are isolated vertices. Vertex radii are the cell
    clearance minus half a cell, which keeps the reported circular
    domain inside the freespace despite the raster quantization.
    """
    if min_clearance is None:
        min_clearance = 0.5 * DEFAULTS.bounding_radius
    cs = grid.cell_size
    clear = grid.clearance
    tol = 1e-9 * cs
    removable = np.zeros_like(grid.free)
    for dy, dx, _ in _SHIFTS:
        own = _window(clear, -dy, -dx)
        neighbor = _window(clear, dy, dx)
        flag = _window(removable, -dy, -dx)
        flag |= neighbor >= own + cs - tol
    keep = grid.free & ~removable & (clear >= min_clearance)

    build_log: list[str] = []
    substrate = grid.free & (clear >= min_clearance)
    _bridge_ridge_gaps(keep, substrate, clear, build_log)

    iy, ix = np.nonzero(keep)
    # Row-major (row, col) order fixes vertex numbering.
    cells = np.stack([ix, iy], axis=1)
    positions = grid.origin + (cells + 0.5) * cs
    radii = np.maximum(clear[iy, ix] - 0.5 * cs, 0.0)

    index = np.full(grid.shape, -1, dtype=np.int64)
    index[iy, ix] = np.arange(len(cells))
    edges = []
    for dy, dx, w in _SHIFTS:
        a = _window(index, dy, dx)
        b = _window(index, -dy, -dx)
        mask = (a >= 0) & (b >= 0)
        ea = a[mask]
        eb = b[mask]
        ew = np.full(len(ea), w, dtype=np.int64)
        edges.append(np.stack([ea, eb, ew], axis=1))
    edges = np.concatenate(edges, axis=0) if edges else np.zeros((0, 3), dtype=np.int64)

    degree = np.zeros(len(cells), dtype=int)
    if edges.size:
        np.add.at(degree, edges[:, 0], 1)
    connected_mask = degree > 0
    if not connected_mask.all():
        dropped = int((~connected_mask).sum())
        build_log.append(f"pruned {dropped} isolated vertices")
        remap = np.full(len(cells), -1, dtype=np.int64)
        remap[connected_mask] = np.arange(connected_mask.sum())
        cells = cells[connected_mask]
        positions = positions[connected_mask]
        radii = radii[connected_mask]
        if edges.size:
            keep_e = connected_mask[edges[:, 0]] & connected_mask[edges[:, 1]]
            edges = edges[keep_e]
            edges[:, 0] = remap[edges[:, 0]]
            edges[:, 1] = remap[edges[:, 1]]
    if len(cells) == 0:
        raise ValueError("no skeleton vertices survive the clearance floor")
    return SkeletonGraph(positions, radii, edges, cells, cs, build_log)


def _window(arr: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """View of arr shifted so index (y, x) aligns with (y+dy, x+dx)."""
    ny, nx = arr.shape[:2]
    ys = slice(max(dy, 0), ny + min(dy, 0))
    xs = slice(max(dx, 0), nx + min(dx, 0))
    return arr[ys, xs]
