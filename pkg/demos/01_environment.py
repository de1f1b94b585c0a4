"""Polygonal environments and their clearance fields.

Builds a small world with one obstacle, rasterizes it, and samples the
clearance field that every later stage (skeleton, conflict handling)
is built on.
"""

import numpy as np

from medax import PolyEnvironment
from medax.geometry import rasterize
from medax.svg import write_svg

env = PolyEnvironment(
    outer=[[0, 0], [100, 0], [100, 60], [0, 60]],
    holes=([[35, 20], [65, 20], [65, 40], [35, 40]],),
)

print("A 100x60 room with a rectangular pillar in the middle.")
print(f"outer boundary: {len(env.outer)} vertices, holes: {len(env.holes)}")

grid = rasterize(env, cell_size=0.5)
print(f"\nrasterized at cell 0.5 -> {grid.free.shape[1]}x{grid.free.shape[0]} cells, "
      f"{int(grid.free.sum())} free")

print("\nclearance at a few probe points (distance to the nearest wall):")
for p in ([5, 5], [50, 10], [50, 50], [20, 30]):
    inside = env.contains(np.asarray(p, float))
    print(f"  {p}: contains={inside} clearance={grid.clearance_at(p):.2f}")

out = "demos/out_01_environment.svg"
write_svg(out, env)
print(f"\nmap rendered to {out}")
