"""Extracting the clearance skeleton of a map.

The skeleton is the ridge of the clearance field: a graph of points
that sit as far from the walls as locally possible, each carrying the
radius of the free disc around it. Routes along it stay maximally clear
of obstacles, which is what makes it a good backbone for navigation.
"""

import numpy as np

from medax import maps
from medax.svg import write_svg

bmap = maps.u_map()
world = maps.build_world(bmap)
g = world.graph

print("U-shaped map, 100x100 with a wide blocked slab in the middle.")
print(f"skeleton: {g.vertex_count} vertices, {len(g.edges)} edges")
print(f"clearance radii: min {g.radii.min():.2f}, median "
      f"{np.median(g.radii):.2f}, max {g.radii.max():.2f}")

a = g.project(np.array([10.0, 90.0]))
b = g.project(np.array([90.0, 90.0]))
path = g.shortest_path(a, b)
print(f"\nroute between the two arm tips: {len(path)} vertices, "
      f"length {path.total_length:.1f} (straight line would cross the slab)")
print(f"narrowest clearance along it: {path.radii.min():.2f}")

out = "demos/out_02_skeleton.svg"
write_svg(out, world.env, graph=g)
print(f"\nskeleton plot written to {out}")
print("every 12th vertex shows its clearance disc; note how the discs")
print("shrink into the arms and widen in the open corners")
