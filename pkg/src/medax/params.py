"""Shared tunables with their default values.

One Params instance travels through the whole stack (navigation, conflict
handling, benchmarks) so scenario files can override any single knob.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class Params:
    # Vehicle body. All models share one oriented-rectangle footprint.
    body_length: float = 5.0
    body_width: float = 4.0
    trailer_length: float = 5.0

    # Control limits.
    v_max: float = 2.0
    omega_max: float = 2.0
    a_max: float = math.inf
    kappa_max_dubins: float = 0.19
    kappa_max_truck: float = 0.22

    # Local navigation.
    tau_agents: float = 5.0
    tau_obstacles: float = 2.0
    eps_track: float = 0.5
    w_follow: float = 1.0
    w_bias: float = 0.3
    center_offset: float = 2.5
    max_obstacle_segments: int = 8
    sensing_radius: float = 25.0

    # Conflict-point handling.
    eta: float = 2.0
    epsilon: float = 0.2
    v_min_fraction: float = 0.05
    n_max: int = 16
    snap_tolerance: float = 2.0

    @property
    def bounding_radius(self) -> float:
        """Radius of the smallest circle covering the body rectangle."""
        return math.hypot(self.body_length / 2.0, self.body_width / 2.0)

    @property
    def enlarged_radius(self) -> float:
        return self.bounding_radius + self.eps_track

    @property
    def v_min(self) -> float:
        return self.v_min_fraction * self.v_max

    def with_overrides(self, **kwargs) -> "Params":
        return replace(self, **kwargs)

    @classmethod
    def from_dict(cls, data: dict) -> "Params":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown parameter keys: {sorted(unknown)}")
        return cls(**data)


DEFAULTS = Params()
