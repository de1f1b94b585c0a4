"""Polygonal environments and their occupancy rasterization.

The freespace is a simple polygon with optional polygonal holes. A uniform
grid raster of the freespace carries an exact Euclidean clearance field that
downstream modules (skeleton extraction, spawn validation) read from.
"""

from __future__ import annotations

import numpy as np

# Points closer than this to a boundary segment are treated as boundary
# points, which count as inside the freespace.
BOUNDARY_EPS = 1e-9


def signed_area(ring: np.ndarray) -> float:
    """Signed area of a closed ring given as an (N, 2) vertex array.

    Positive for counterclockwise orientation. The ring is implicitly
    closed; do not repeat the first vertex.
    """
    x = ring[:, 0]
    y = ring[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _as_ring(points) -> np.ndarray:
    ring = np.asarray(points, dtype=float)
    if ring.ndim != 2 or ring.shape[1] != 2 or ring.shape[0] < 3:
        raise ValueError("polygon ring needs at least 3 (x, y) vertices")
    if abs(signed_area(ring)) < 1e-12:
        raise ValueError("degenerate polygon ring with zero area")
    return ring


class PolyEnvironment:
    """Freespace bounded by an outer polygon minus polygonal holes.

    The outer boundary is stored counterclockwise and holes clockwise;
    inputs with the opposite orientation are silently reversed. Holes must
    lie strictly inside the outer boundary and must not intersect each
    other; violations surface as geometry errors downstream, not here.
    """

    def __init__(self, outer, holes=()):
        outer = _as_ring(outer)
        if signed_area(outer) < 0:
            outer = outer[::-1].copy()
        fixed_holes = []
        for hole in holes:
            ring = _as_ring(hole)
            if signed_area(ring) > 0:
                ring = ring[::-1].copy()
            fixed_holes.append(ring)
        self.outer = outer
        self.holes = fixed_holes
        xmin, ymin = outer.min(axis=0)
        xmax, ymax = outer.max(axis=0)
        self.bounds = (float(xmin), float(ymin), float(xmax), float(ymax))
        self._segments = self._build_segments()

    @classmethod
    def from_dict(cls, data: dict) -> "PolyEnvironment":
        return cls(data["outer"], data.get("holes", ()))

    def to_dict(self) -> dict:
        return {
            "outer": self.outer.tolist(),
            "holes": [h.tolist() for h in self.holes],
        }

    def _build_segments(self) -> np.ndarray:
        segs = []
        for ring in [self.outer, *self.holes]:
            nxt = np.roll(ring, -1, axis=0)
            segs.append(np.stack([ring, nxt], axis=1))
        return np.concatenate(segs, axis=0)

    @property
    def segments(self) -> np.ndarray:
        """All boundary segments as an (S, 2, 2) array."""
        return self._segments

    def contains_many(self, points: np.ndarray) -> np.ndarray:
        """Vectorized freespace membership test for an (N, 2) point array.

        Boundary points count as inside. Interior membership follows the
        even-odd rule: inside the outer ring and inside no hole.
        """
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[None, :]
        on_edge = _min_dist_to_segments(pts, self._segments) <= BOUNDARY_EPS
        inside = _crossing_parity(pts, self.outer)
        for hole in self.holes:
            inside &= ~_crossing_parity(pts, hole)
        return inside | on_edge

    def contains(self, p) -> bool:
        """True iff point p lies in the freespace (boundary inclusive)."""
        return bool(self.contains_many(np.asarray(p, dtype=float)[None, :])[0])


def _crossing_parity(pts: np.ndarray, ring: np.ndarray) -> np.ndarray:
    """Even-odd ray-cast parity of pts against one ring, vectorized."""
    px = pts[:, 0][:, None]
    py = pts[:, 1][:, None]
    a = ring
    b = np.roll(ring, -1, axis=0)
    ay, by = a[None, :, 1], b[None, :, 1]
    ax, bx = a[None, :, 0], b[None, :, 0]
    straddles = (ay > py) != (by > py)
    # Intersection abscissa of the edge with the horizontal ray through p.
    denom = by - ay
    with np.errstate(divide="ignore", invalid="ignore"):
        xin = ax + (py - ay) * (bx - ax) / denom
    crosses = straddles & (px < xin)
    return np.count_nonzero(crosses, axis=1) % 2 == 1


def _min_dist_to_segments(pts: np.ndarray, segs: np.ndarray) -> np.ndarray:
    """Minimum distance from each point to any segment in (S, 2, 2)."""
    a = segs[:, 0]
    d = segs[:, 1] - segs[:, 0]
    dd = np.einsum("sk,sk->s", d, d)
    dd = np.where(dd == 0.0, 1.0, dd)
    rel = pts[:, None, :] - a[None, :, :]
    t = np.einsum("psk,sk->ps", rel, d) / dd
    t = np.clip(t, 0.0, 1.0)
    closest = a[None, :, :] + t[:, :, None] * d[None, :, :]
    dist = np.linalg.norm(pts[:, None, :] - closest, axis=2)
    return dist.min(axis=1)


def closest_point_on_segment(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = b - a
    dd = float(d @ d)
    if dd == 0.0:
        return a
    t = float((p - a) @ d) / dd
    return a + min(max(t, 0.0), 1.0) * d


def segments_intersect(p1, p2, q1, q2) -> bool:
    """Segment intersection test, touching endpoints included."""
    p1 = np.asarray(p1, float)
    p2 = np.asarray(p2, float)
    q1 = np.asarray(q1, float)
    q2 = np.asarray(q2, float)

    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if v > 1e-12:
            return 1
        if v < -1e-12:
            return -1
        return 0

    def on_seg(a, b, c):
        return (
            min(a[0], b[0]) - 1e-12 <= c[0] <= max(a[0], b[0]) + 1e-12
            and min(a[1], b[1]) - 1e-12 <= c[1] <= max(a[1], b[1]) + 1e-12
        )

    o1 = orient(p1, p2, q1)
    o2 = orient(p1, p2, q2)
    o3 = orient(q1, q2, p1)
    o4 = orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and on_seg(p1, p2, q1):
        return True
    if o2 == 0 and on_seg(p1, p2, q2):
        return True
    if o3 == 0 and on_seg(q1, q2, p1):
        return True
    if o4 == 0 and on_seg(q1, q2, p2):
        return True
    return False


class OccupancyGrid:
    """Uniform raster of a PolyEnvironment with an exact clearance field.

    origin is the world position of the lower-left corner of cell (0, 0);
    cell (ix, iy) has its center at origin + (ix + 0.5, iy + 0.5) * cell_size.
    Arrays are indexed [iy, ix]. clearance holds, for each free cell center,
    the exact Euclidean distance to the nearest occupied cell center, and
    zero on occupied cells.
    """

    def __init__(self, env: PolyEnvironment, cell_size: float, pad_cells: int = 2):
        if cell_size <= 0:
            raise ValueError("cell_size must be positive")
        xmin, ymin, xmax, ymax = env.bounds
        nx = int(np.ceil((xmax - xmin) / cell_size)) + 2 * pad_cells
        ny = int(np.ceil((ymax - ymin) / cell_size)) + 2 * pad_cells
        self.env = env
        self.cell_size = float(cell_size)
        self.origin = np.array([xmin - pad_cells * cell_size, ymin - pad_cells * cell_size])
        self.shape = (ny, nx)

        ix = np.arange(nx)
        iy = np.arange(ny)
        cx = self.origin[0] + (ix + 0.5) * cell_size
        cy = self.origin[1] + (iy + 0.5) * cell_size
        xx, yy = np.meshgrid(cx, cy)
        centers = np.stack([xx.ravel(), yy.ravel()], axis=1)
        self.free = env.contains_many(centers).reshape(ny, nx)
        sq = _edt_squared(~self.free)
        self.clearance = np.sqrt(sq) * cell_size
        self.clearance[~self.free] = 0.0

    def cell_of(self, p) -> tuple[int, int]:
        """(ix, iy) of the cell containing world point p."""
        ix = int(np.floor((p[0] - self.origin[0]) / self.cell_size))
        iy = int(np.floor((p[1] - self.origin[1]) / self.cell_size))
        return ix, iy

    def cell_center(self, ix: int, iy: int) -> np.ndarray:
        return self.origin + (np.array([ix, iy]) + 0.5) * self.cell_size

    def clearance_at(self, p) -> float:
        """Clearance of the cell containing p, zero outside the raster."""
        ix, iy = self.cell_of(p)
        ny, nx = self.shape
        if 0 <= ix < nx and 0 <= iy < ny:
            return float(self.clearance[iy, ix])
        return 0.0


def rasterize(env: PolyEnvironment, cell_size: float) -> OccupancyGrid:
    """Rasterize env at the given cell size. See OccupancyGrid."""
    return OccupancyGrid(env, cell_size)


def default_cell_size(env: PolyEnvironment) -> float:
    """Default raster resolution: 2% of the larger bounding-box extent."""
    xmin, ymin, xmax, ymax = env.bounds
    return 0.02 * max(xmax - xmin, ymax - ymin)


def _edt_1d(f: np.ndarray) -> np.ndarray:
    """Exact 1D squared distance transform by lower envelope of parabolas.

    f holds finite sample costs; the result at q is min_j (q - j)^2 + f[j].
    """
    n = len(f)
    d = np.empty(n)
    v = np.empty(n, dtype=int)
    z = np.empty(n + 1)
    k = 0
    v[0] = 0
    z[0] = -np.inf
    z[1] = np.inf
    for q in range(1, n):
        s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2 * q - 2 * v[k])
        while s <= z[k]:
            k -= 1
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2 * q - 2 * v[k])
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = np.inf
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        d[q] = (q - v[k]) ** 2 + f[v[k]]
    return d


def _edt_squared(occupied: np.ndarray) -> np.ndarray:
    """Exact squared Euclidean distance (in cells) to the occupied set.

    Two passes: a column scan that records the vertical distance to the
    nearest occupied cell, then a parabola lower envelope along each row.
    Every column must contain an occupied cell, which the grid padding
    guarantees.
    """
    ny, nx = occupied.shape
    coldist = np.empty((ny, nx))
    run = np.full(nx, np.inf)
    for y in range(ny):
        run = np.where(occupied[y], 0.0, run + 1.0)
        coldist[y] = run
    run = np.full(nx, np.inf)
    for y in range(ny - 1, -1, -1):
        run = np.where(occupied[y], 0.0, run + 1.0)
        coldist[y] = np.minimum(coldist[y], run)
    if not np.all(np.isfinite(coldist)):
        raise ValueError("raster has a column with no occupied cell")
    f = coldist * coldist
    out = np.empty_like(f)
    for y in range(ny):
        out[y] = _edt_1d(f[y])
    return out
