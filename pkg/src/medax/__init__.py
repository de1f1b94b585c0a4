"""Decentralized multi-agent navigation over medial-axis maps.

The package splits into map analysis (geometry, skeleton), per-agent
behavior (agents, navigation, poi), and orchestration (simulation, maps,
scenario, cli). The usual entry points are World.build for turning a
polygonal environment into a navigable map and simulation.run for
executing a scenario on it.
"""

from .agents import AgentState, collide, collide_env, step
from .geometry import OccupancyGrid, PolyEnvironment
from .navigation import GrvoPlanner, ReferenceTrajectory, desired_velocity
from .params import DEFAULTS, Params
from .poi import (
    Poi,
    ShiftTable,
    build_shift_table,
    clearance_threshold,
    detect_pois,
    merge_pois,
    modulate,
    poi_pipeline,
    shift_poi,
)
from .simulation import (
    AgentResult,
    BatchReport,
    SimConfig,
    SimReport,
    World,
    batch,
    dump_trajectory_csv,
    place_random_agents,
    run,
)
from .skeleton import SkeletonGraph, extract_skeleton
from .svg import render_svg, write_svg

__version__ = "0.1.0"

__all__ = [
    "AgentResult",
    "AgentState",
    "BatchReport",
    "DEFAULTS",
    "GrvoPlanner",
    "OccupancyGrid",
    "Params",
    "Poi",
    "PolyEnvironment",
    "ReferenceTrajectory",
    "ShiftTable",
    "SimConfig",
    "SimReport",
    "SkeletonGraph",
    "World",
    "batch",
    "build_shift_table",
    "clearance_threshold",
    "collide",
    "collide_env",
    "desired_velocity",
    "detect_pois",
    "dump_trajectory_csv",
    "extract_skeleton",
    "merge_pois",
    "modulate",
    "place_random_agents",
    "poi_pipeline",
    "render_svg",
    "run",
    "shift_poi",
    "step",
    "write_svg",
]
