"""Built-in benchmark environments.

All four maps stage the same regime on a roughly 200x100-unit canvas:
spawn chambers wide enough for any yield maneuver, connected through
passages that admit one enlarged disc but never two abreast. The regime
is asserted from the extracted skeleton at build time, not hand-trusted,
so a map edit that silently breaks the premise fails loudly.

  dumbbell  two chambers joined by one straight narrow corridor
  bee       honeycomb belt of hexagonal pillars between two open bands
  maze      two long parallel bars forming three narrow aisles
  garage    one long corridor with a wide pocket halfway along it

A U-shaped demo map ships alongside; it has no narrow regime and skips
the benchmark assertions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .geometry import PolyEnvironment
from .params import DEFAULTS, Params
from .poi import clearance_threshold
from .simulation import World

CORRIDOR_WIDTH = 9.0


@dataclass(frozen=True)
class BenchmarkMap:
    name: str
    env: PolyEnvironment
    cell_size: float
    # ((start_rect, goal_rect), ...) with rect = (xmin, ymin, xmax, ymax)
    spawn_regions: tuple
    check_regime: bool = True


def dumbbell() -> BenchmarkMap:
    """Two 70x100 chambers joined by a single 60x9 corridor."""
    y0, y1 = 45.5, 54.5
    outer = [
        [0, 0], [70, 0], [70, y0], [130, y0], [130, 0], [200, 0],
        [200, 100], [130, 100], [130, y1], [70, y1], [70, 100], [0, 100],
    ]
    left = (6.0, 8.0, 64.0, 92.0)
    right = (136.0, 8.0, 194.0, 92.0)
    return BenchmarkMap(
        name="dumbbell",
        env=PolyEnvironment(outer),
        cell_size=1.0,
        spawn_regions=((left, right), (right, left)),
    )


def garage() -> BenchmarkMap:
    """A 160-unit corridor between two chambers, with a mid-span pocket."""
    y0, y1 = 45.5, 54.5
    outer = [
        [0, 0], [40, 0], [40, y0], [200, y0], [200, 0], [240, 0],
        [240, 100], [200, 100], [200, y1], [194, y1], [194, 98.5],
        [150, 98.5], [150, y1], [40, y1], [40, 100], [0, 100],
    ]
    left = (6.0, 8.0, 34.0, 92.0)
    right = (206.0, 8.0, 234.0, 92.0)
    return BenchmarkMap(
        name="garage",
        env=PolyEnvironment(outer),
        cell_size=1.0,
        spawn_regions=((left, right), (right, left)),
    )


def maze() -> BenchmarkMap:
    """Two parallel bars carving three aisles between two chambers."""
    outer = [[0, 0], [240, 0], [240, 83], [0, 83]]
    bars = [
        [[53, 9], [187, 9], [187, 37], [53, 37]],
        [[53, 46], [187, 46], [187, 74], [53, 74]],
    ]
    left = (6.0, 8.0, 38.0, 75.0)
    right = (202.0, 8.0, 234.0, 75.0)
    return BenchmarkMap(
        name="maze",
        env=PolyEnvironment(outer, bars),
        cell_size=1.0,
        spawn_regions=((left, right), (right, left)),
    )


def _hexagon(cx: float, cy: float, radius: float) -> list[list[float]]:
    # Pointy-top: vertices at 90 + 60k degrees, flat vertical sides.
    return [
        [cx + radius * math.cos(a), cy + radius * math.sin(a)]
        for a in (math.radians(90 + 60 * k) for k in range(6))
    ]


def bee() -> BenchmarkMap:
    """Honeycomb belt of hexagonal pillars between two open bands.

    Every pillar-to-pillar and belt-edge slot is one corridor width, so
    any band-to-band route threads at least two narrow slots; the bands
    themselves are wide enough to absorb displaced conflicts.
    """
    radius = 25.0
    flat = radius * math.sqrt(3.0) / 2.0
    pitch = 2.0 * flat + CORRIDOR_WIDTH
    band = 41.0

    x1 = CORRIDOR_WIDTH + flat
    row_a = [x1, x1 + pitch, x1 + 2 * pitch]
    row_b = [x1 + 0.5 * pitch, x1 + 1.5 * pitch]
    width = row_a[-1] + flat + CORRIDOR_WIDTH
    y_a = band + radius
    step = pitch * math.sqrt(3.0) / 2.0
    y_b = y_a + step
    y_c = y_a + 2 * step
    height = y_c + radius + band

    holes = (
        [_hexagon(x, y_a, radius) for x in row_a]
        + [_hexagon(x, y_b, radius) for x in row_b]
        + [_hexagon(x, y_c, radius) for x in row_a]
    )
    outer = [[0, 0], [width, 0], [width, height], [0, height]]
    bottom = (10.0, 6.0, width - 10.0, 33.0)
    top = (10.0, height - 33.0, width - 10.0, height - 6.0)
    return BenchmarkMap(
        name="bee",
        env=PolyEnvironment(outer, holes),
        cell_size=1.0,
        spawn_regions=((bottom, top), (top, bottom)),
    )


def u_map() -> BenchmarkMap:
    """U-shaped demo freespace: two wide arms around a central block."""
    outer = [
        [0, 0], [100, 0], [100, 100], [80, 100],
        [80, 20], [20, 20], [20, 100], [0, 100],
    ]
    left = (4.0, 78.0, 16.0, 96.0)
    right = (84.0, 78.0, 96.0, 96.0)
    return BenchmarkMap(
        name="u",
        env=PolyEnvironment(outer),
        cell_size=1.0,
        spawn_regions=((left, right), (right, left)),
        check_regime=False,
    )


BUILDERS = {
    "dumbbell": dumbbell,
    "bee": bee,
    "maze": maze,
    "garage": garage,
    "u": u_map,
}

SUITES = {"I": "dumbbell", "II": "bee", "III": "maze", "IV": "garage"}


def _rect_center(rect) -> np.ndarray:
    xmin, ymin, xmax, ymax = rect
    return np.array([0.5 * (xmin + xmax), 0.5 * (ymin + ymax)])


def _connected_above(graph, a: int, b: int, min_radius: float) -> bool:
    """Whether a route from a to b survives dropping vertices under min_radius."""
    keep = graph.radii >= min_radius
    if not (keep[a] and keep[b]):
        return False
    e = graph.edges
    mask = keep[e[:, 0]] & keep[e[:, 1]]
    n = graph.vertex_count
    sub = csr_matrix(
        (np.ones(int(mask.sum())), (e[mask, 0], e[mask, 1])), shape=(n, n)
    )
    _, labels = connected_components(sub, directed=False)
    return labels[a] == labels[b]


def route_pinch_width(world: World, p_a, p_b) -> float:
    """Width of the widest-route bottleneck between two world points.

    The length-shortest skeleton route may clip corner spurs with tiny
    clearance, so the honest passage measure is the maximin one: the
    largest vertex radius threshold at which the endpoints stay
    connected, doubled into a width.
    """
    g = world.graph
    a = g.project(p_a)
    b = g.project(p_b)
    values = np.unique(g.radii)
    if not _connected_above(g, a, b, float(values[0])):
        return 0.0
    lo, hi = 0, len(values) - 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if _connected_above(g, a, b, float(values[mid])):
            lo = mid
        else:
            hi = mid - 1
    return 2.0 * float(values[lo])


def verify_regime(world: World, spawn_regions, params: Params) -> None:
    """Check the narrow-passage premise against the extracted skeleton.

    Raises unless every spawn-to-goal route pinches to a width that fits
    one enlarged disc but not two abreast, while somewhere on the map a
    displaced two-agent conflict has room to settle.
    """
    g = world.graph
    one_disc = 2.0 * params.enlarged_radius
    two_abreast = 4.0 * params.enlarged_radius
    bottleneck = math.inf
    for start_rect, goal_rect in spawn_regions:
        width = route_pinch_width(world, _rect_center(start_rect), _rect_center(goal_rect))
        bottleneck = min(bottleneck, width)
    if not one_disc < bottleneck < two_abreast:
        raise ValueError(
            f"route bottleneck width {bottleneck:.2f} outside "
            f"({one_disc:.2f}, {two_abreast:.2f})"
        )
    widest = 2.0 * float(g.radii.max())
    if widest <= two_abreast:
        raise ValueError(f"widest chamber {widest:.2f} cannot host a yield")
    if float(g.radii.max()) < clearance_threshold(2, params):
        raise ValueError("no vertex roomy enough for a displaced pair")


def build_world(bmap: BenchmarkMap, params: Params = DEFAULTS) -> World:
    world = World.build(bmap.env, cell_size=bmap.cell_size, params=params)
    if bmap.check_regime:
        verify_regime(world, bmap.spawn_regions, params)
    return world
