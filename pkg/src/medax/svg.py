"""Plain-text SVG rendering of environments, skeletons, and runs.

Everything is assembled by string formatting with fixed float precision,
so the same inputs always produce byte-identical files. No drawing
library is involved; the formats needed here are a handful of SVG
primitives and keeping them explicit is what makes the output stable
across platforms and library versions.
"""

from __future__ import annotations

import numpy as np

from .geometry import PolyEnvironment
from .skeleton import SkeletonGraph

OBSTACLE_FILL = "#3b3b3b"
FREESPACE_FILL = "#ffffff"
SKELETON_STROKE = "#c0392b"
DOMAIN_STROKE = "#e8a49c"

# Agent polyline colors, cycled in sorted-id order.
PALETTE = (
    "#1f77b4",
    "#ff7f0e",
    "#2ca02c",
    "#d62728",
    "#9467bd",
    "#8c564b",
    "#e377c2",
    "#7f7f7f",
    "#bcbd22",
    "#17becf",
)

# Every n-th skeleton vertex gets its clearance circle drawn; all of
# them would hide the map under ink.
DOMAIN_STRIDE = 12


def _fmt(v: float) -> str:
    return f"{float(v):.3f}"


def _ring(points, sy) -> str:
    parts = []
    for k, p in enumerate(points):
        cmd = "M" if k == 0 else "L"
        parts.append(f"{cmd}{_fmt(p[0])},{_fmt(sy(p[1]))}")
    parts.append("Z")
    return " ".join(parts)


def render_svg(
    env: PolyEnvironment,
    graph: SkeletonGraph | None = None,
    trajectories: dict | None = None,
    pois=None,
    width: int = 900,
) -> str:
    """SVG document for a map, optionally with skeleton and run overlays.

    trajectories maps agent id to an (n, 2) array of positions; pois is
    a sequence of objects with position and shifted attributes.
    """
    pts = np.asarray(env.outer, dtype=float)
    xmin, ymin = pts.min(axis=0)
    xmax, ymax = pts.max(axis=0)
    pad = 0.03 * max(xmax - xmin, ymax - ymin)
    x0, y0 = xmin - pad, ymin - pad
    w, h = (xmax - xmin) + 2 * pad, (ymax - ymin) + 2 * pad
    height = int(round(width * h / w))

    def sy(y):
        # SVG y runs downward; world y runs up.
        return (ymax + ymin) - y

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="{_fmt(x0)} {_fmt(sy(y0 + h))} {_fmt(w)} {_fmt(h)}">',
        f'<rect x="{_fmt(x0)}" y="{_fmt(sy(y0 + h))}" width="{_fmt(w)}" '
        f'height="{_fmt(h)}" fill="{OBSTACLE_FILL}"/>',
    ]

    rings = [_ring(env.outer, sy)] + [_ring(hole, sy) for hole in env.holes]
    out.append(
        f'<path d="{" ".join(rings)}" fill="{FREESPACE_FILL}" fill-rule="evenodd"/>'
    )

    if graph is not None:
        for k in range(0, graph.vertex_count, DOMAIN_STRIDE):
            p = graph.positions[k]
            out.append(
                f'<circle cx="{_fmt(p[0])}" cy="{_fmt(sy(p[1]))}" '
                f'r="{_fmt(graph.radii[k])}" fill="none" '
                f'stroke="{DOMAIN_STROKE}" stroke-width="0.15" opacity="0.6"/>'
            )
        segs = []
        for a, b in graph.edges[:, :2]:
            pa, pb = graph.positions[int(a)], graph.positions[int(b)]
            segs.append(
                f'M{_fmt(pa[0])},{_fmt(sy(pa[1]))} L{_fmt(pb[0])},{_fmt(sy(pb[1]))}'
            )
        out.append(
            f'<path d="{" ".join(segs)}" stroke="{SKELETON_STROKE}" '
            f'stroke-width="0.3" fill="none"/>'
        )

    if trajectories:
        for slot, aid in enumerate(sorted(trajectories)):
            xy = np.asarray(trajectories[aid], dtype=float)
            color = PALETTE[slot % len(PALETTE)]
            coords = " ".join(f"{_fmt(p[0])},{_fmt(sy(p[1]))}" for p in xy)
            out.append(
                f'<polyline points="{coords}" fill="none" stroke="{color}" '
                f'stroke-width="0.5" opacity="0.9"/>'
            )
            out.append(
                f'<circle cx="{_fmt(xy[0, 0])}" cy="{_fmt(sy(xy[0, 1]))}" '
                f'r="1.2" fill="{color}"/>'
            )
            out.append(
                f'<circle cx="{_fmt(xy[-1, 0])}" cy="{_fmt(sy(xy[-1, 1]))}" '
                f'r="1.2" fill="none" stroke="{color}" stroke-width="0.5"/>'
            )

    for poi in pois or ():
        p = poi.position
        color = "#27ae60" if poi.shifted else "#f39c12"
        out.append(
            f'<circle cx="{_fmt(p[0])}" cy="{_fmt(sy(p[1]))}" r="1.0" '
            f'fill="{color}" opacity="0.9"/>'
        )

    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path, env, graph=None, trajectories=None, pois=None, width: int = 900):
    text = render_svg(env, graph=graph, trajectories=trajectories, pois=pois, width=width)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
