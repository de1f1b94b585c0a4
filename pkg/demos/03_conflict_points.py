"""Conflict points: predicting where opposing agents will meet.

Two agents head toward each other through the dumbbell corridor. Each
one, on its own, projects both positions onto the skeleton, checks that
the two velocities oppose along the connecting route, and splits the
route by speed to predict the meeting point. If that point is too
narrow for a yield, it is shifted to the nearest roomy vertex.
"""

import numpy as np

from medax import AgentState, clearance_threshold, detect_pois, shift_poi
from medax import maps
from medax.params import DEFAULTS

world = maps.build_world(maps.dumbbell())
g = world.graph


def moving(aid, x, y, vx, vy):
    # prev_pos one frame back gives the finite-difference velocity
    dt = 0.05
    return AgentState(
        id=aid,
        model="diff_drive",
        pose=np.array([x, y, np.arctan2(vy, vx)]),
        goal=np.array([x + 100 * np.sign(vx), y]),
        prev_pos=np.array([x - vx * dt, y - vy * dt]),
    )


east = moving(0, 88.0, 50.0, 2.0, 0.0)    # entering the corridor eastbound
west = moving(1, 112.0, 50.0, -1.0, 0.0)  # oncoming at half speed

print("eastbound agent at x=88 (speed 2.0), westbound at x=112 (speed 1.0)")
pois = detect_pois(east, [west], g, dt=0.05)
poi = pois[0]
print(f"\npredicted meeting point: ({poi.position[0]:.1f}, {poi.position[1]:.1f})")
print("the faster agent covers two thirds of the separation, so the point")
print("lies twice as far from it as from the slow one")
print(f"local clearance there: {poi.radius:.2f}")

need = clearance_threshold(poi.n, DEFAULTS)
print(f"\nroom needed for {poi.n} agents to yield: {need:.2f}")
print("the corridor cannot host that, so the point is shifted:")

shifted = shift_poi(poi, poi.n, g, params=DEFAULTS)
print(f"shifted to ({shifted.position[0]:.1f}, {shifted.position[1]:.1f}) "
      f"with clearance {shifted.radius:.2f}")
print("\nthat is the east chamber: whoever sits between the narrows and the")
print("shifted point retreats into the open and the corridor empties")
