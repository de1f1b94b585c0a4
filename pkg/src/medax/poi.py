"""Conflict points between opposing agents on the skeleton.

When two agents approach each other along the same skeleton route, the
spot where they would meet is predictable from their speeds. If that
spot has enough clearance for everyone involved, nothing needs to
happen; local avoidance sorts it out. If it does not, the point is
relocated to the nearest sufficiently wide vertex and the agents steer
for it instead, which empties the narrow section: whoever sits between
the relocated point and the narrows backs out into the open.

Everything here works on per-frame position snapshots of the neighbors
plus the immutable skeleton, so agents need no communication and every
agent runs the same computation.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .agents import AgentState
from .navigation import clamp_norm
from .params import DEFAULTS, Params
from .skeleton import SkeletonGraph, SkeletonPath


@dataclass(frozen=True)
class Poi:
    """A predicted meeting point of mutually approaching agents."""

    position: np.ndarray
    participants: frozenset
    radius: float
    shifted: bool = False
    anchor_vertex: int | None = None
    source: tuple[int, int] | None = None
    path: SkeletonPath | None = None
    arc: float | None = None

    @property
    def n(self) -> int:
        return len(self.participants)


def clearance_threshold(n: int, params: Params) -> float:
    """Minimum local radius that can host n agents around one point."""
    return params.eta * params.bounding_radius * (n + 1)


def detect_pois(agent: AgentState, neighbors, graph: SkeletonGraph, dt: float,
                params: Params | None = None, v_self=None) -> list[Poi]:
    """Meeting points between this agent and each opposing neighbor.

    A neighbor opposes when both travel nearly along the connecting
    skeleton route toward each other: the route tangent at either end
    must align with that agent's velocity direction within the epsilon
    gate. Near-stationary agents oppose nobody. The meeting point splits
    the route arc length in proportion to the two speeds, so the faster
    agent covers more of it.

    Neighbors are judged by observed displacement; the agent itself by
    v_self, its intended velocity, when given. Judging self by observed
    motion breaks yielding: the moment an agent turns back its own gate
    fails, the conflict point vanishes, and it swings forward again.
    """
    params = params if params is not None else agent.params
    p_i = agent.position
    v_i = np.asarray(v_self, dtype=float) if v_self is not None else agent.velocity(dt)
    speed_i = float(np.linalg.norm(v_i))
    out: list[Poi] = []
    if speed_i < params.v_min:
        return out
    s_i = graph.project(p_i)

    for other in sorted(neighbors, key=lambda a: a.id):
        if other.id == agent.id:
            continue
        if np.linalg.norm(other.position - p_i) > params.sensing_radius:
            continue
        v_j = other.velocity(dt)
        speed_j = float(np.linalg.norm(v_j))
        if speed_j < params.v_min:
            continue
        s_j = graph.project(other.position)
        if not graph.connected(s_i, s_j):
            continue
        participants = frozenset((agent.id, other.id))
        if s_i == s_j:
            # Zero-length route: the shared vertex is the meeting point.
            out.append(
                Poi(
                    position=graph.positions[s_i].copy(),
                    participants=participants,
                    radius=float(graph.radii[s_i]),
                    anchor_vertex=s_i,
                    source=(agent.id, other.id),
                )
            )
            continue
        path = graph.shortest_path(s_i, s_j)
        gate = 1.0 - params.epsilon
        span = 2.0 * params.bounding_radius
        if float(path.end_direction(0, span) @ v_i) / speed_i <= gate:
            continue
        if float(-path.end_direction(1, span) @ v_j) / speed_j <= gate:
            continue
        alpha = speed_i / (speed_i + speed_j)
        pt = path.point_at(alpha)
        out.append(
            Poi(
                position=pt.position,
                participants=participants,
                radius=pt.radius,
                source=(agent.id, other.id),
                path=path,
                arc=pt.arc,
            )
        )
    return out


def _nearest_satisfying(point, positions, radii, threshold):
    """Index into the given arrays of the nearest roomy vertex.

    Exact distance ties resolve to the first (lowest) index; the shift
    table builder reproduces these semantics bit for bit.
    """
    ok = radii >= threshold
    if not ok.any():
        return None
    cand = np.flatnonzero(ok)
    dx = positions[cand, 0] - point[0]
    dy = positions[cand, 1] - point[1]
    return int(cand[np.argmin(dx * dx + dy * dy)])


def _anchored(poi: Poi, vertex: int, graph: SkeletonGraph) -> Poi:
    return replace(
        poi,
        position=graph.positions[vertex].copy(),
        radius=float(graph.radii[vertex]),
        shifted=True,
        anchor_vertex=int(vertex),
    )


def snap_vertex(poi: Poi, graph: SkeletonGraph) -> int:
    """Skeleton vertex standing in for the point in table lookups.

    Edge-interior points take the nearer endpoint of their containing
    route edge (ties to the lower vertex index); anything else falls
    back to plain projection.
    """
    if poi.anchor_vertex is not None:
        return int(poi.anchor_vertex)
    path = poi.path
    if path is not None and len(path) > 1 and poi.arc is not None:
        k = int(np.searchsorted(path.cum_length, poi.arc, side="right")) - 1
        k = min(max(k, 0), len(path) - 2)
        a, b = int(path.indices[k]), int(path.indices[k + 1])
        da = float(np.linalg.norm(graph.positions[a] - poi.position))
        db = float(np.linalg.norm(graph.positions[b] - poi.position))
        if da < db:
            return a
        if db < da:
            return b
        return min(a, b)
    return graph.project(poi.position)


def shift_poi(poi: Poi, n: int, graph: SkeletonGraph, path: SkeletonPath | None = None,
              params: Params = DEFAULTS, table: "ShiftTable | None" = None) -> Poi | None:
    """Relocate a conflict point somewhere wide enough for n agents.

    Returns the point untouched when its own clearance suffices. The
    search prefers vertices on the point's route, then anywhere on the
    skeleton; None means the whole map is too narrow. With a table, the
    global phase becomes a lookup keyed on the snapped vertex.
    """
    threshold = clearance_threshold(n, params)
    if poi.radius >= threshold:
        return poi
    path = path if path is not None else poi.path
    if path is not None and len(path) > 0:
        idx = path.indices
        k = _nearest_satisfying(
            poi.position, graph.positions[idx], graph.radii[idx], threshold
        )
        if k is not None:
            return _anchored(poi, int(idx[k]), graph)
    if table is not None and n <= table.n_max:
        target = table.lookup(snap_vertex(poi, graph), n)
        return None if target is None else _anchored(poi, target, graph)
    k = _nearest_satisfying(poi.position, graph.positions, graph.radii, threshold)
    return None if k is None else _anchored(poi, k, graph)


def preshift_pois(pois, graph: SkeletonGraph, params: Params = DEFAULTS,
                  table: "ShiftTable | None" = None) -> list[Poi]:
    """Relocation attempt on every fresh detection; originals survive
    when no roomy vertex exists."""
    out = []
    for poi in pois:
        shifted = shift_poi(poi, poi.n, graph, params=params, table=table)
        out.append(shifted if shifted is not None else poi)
    return out


def merge_pois(agent: AgentState, pois, graph: SkeletonGraph,
               params: Params | None = None,
               table: "ShiftTable | None" = None) -> list[Poi]:
    """Collapse conflict points crowding the same area.

    Expects relocation-attempted inputs (preshift_pois). Pairs closer
    than the capacity of the smaller one are re-homed with their summed
    count, first at one point then the other; a successful attempt
    replaces the pair, participants pooled. Pairs with nowhere to go
    stay split. Every merge removes a point, so this terminates.
    """
    params = params if params is not None else agent.params
    pois = list(pois)
    merged = True
    while merged:
        merged = False
        for i in range(len(pois)):
            for j in range(i + 1, len(pois)):
                a, b = pois[i], pois[j]
                limit = clearance_threshold(min(a.n, b.n), params)
                if np.linalg.norm(a.position - b.position) > limit:
                    continue
                total = a.n + b.n
                cand = shift_poi(a, total, graph, params=params, table=table)
                if cand is None:
                    cand = shift_poi(b, total, graph, params=params, table=table)
                if cand is None:
                    continue
                cand = replace(
                    cand, participants=a.participants | b.participants, source=None
                )
                pois = [p for k, p in enumerate(pois) if k != i and k != j]
                pois.append(cand)
                merged = True
                break
            if merged:
                break
    return pois


def modulate(v_star, agent: AgentState, pois, params: Params | None = None):
    """Steer for the nearest conflict point if it was moved somewhere roomy.

    Unmoved points either had enough clearance (no intervention needed)
    or had nowhere better to go; both keep the original velocity.
    """
    params = params if params is not None else agent.params
    v_star = np.asarray(v_star, dtype=float)
    if not pois:
        return v_star
    p = agent.position
    dists = [float(np.linalg.norm(poi.position - p)) for poi in pois]
    nearest = pois[int(np.argmin(dists))]
    if not nearest.shifted:
        return v_star
    return clamp_norm(nearest.position - p, params.v_max)


def poi_pipeline(agent: AgentState, neighbors, graph: SkeletonGraph, dt: float,
                 params: Params | None = None,
                 table: "ShiftTable | None" = None, v_self=None) -> list[Poi]:
    """One agent's full per-frame pass: detect, relocate, merge."""
    params = params if params is not None else agent.params
    pois = detect_pois(agent, neighbors, graph, dt, params=params, v_self=v_self)
    pois = preshift_pois(pois, graph, params=params, table=table)
    return merge_pois(agent, pois, graph, params=params, table=table)


@dataclass
class ShiftTable:
    """Precomputed relocation target per (vertex, participant count)."""

    table: np.ndarray
    n_max: int

    def lookup(self, vertex: int, n: int) -> int | None:
        target = int(self.table[vertex, n])
        return None if target < 0 else target


def build_shift_table(graph: SkeletonGraph, n_max: int = DEFAULTS.n_max,
                      params: Params = DEFAULTS) -> ShiftTable:
    """Tabulate the global relocation phase for every vertex and count.

    Row semantics match shift_poi from a vertex-anchored point exactly:
    a vertex roomy enough maps to itself, otherwise to the nearest roomy
    vertex (ties to the lowest index), or -1 when none exists.
    """
    count = graph.vertex_count
    table = np.full((count, n_max + 1), -1, dtype=np.int64)
    for n in range(2, n_max + 1):
        threshold = clearance_threshold(n, params)
        ok = graph.radii >= threshold
        if not ok.any():
            continue
        cand = np.flatnonzero(ok)
        dx = graph.positions[cand, 0][None, :] - graph.positions[:, 0][:, None]
        dy = graph.positions[cand, 1][None, :] - graph.positions[:, 1][:, None]
        table[:, n] = cand[np.argmin(dx * dx + dy * dy, axis=1)]
    return ShiftTable(table=table, n_max=n_max)
