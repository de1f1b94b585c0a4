"""Frame-synchronous multi-agent runs over a shared skeleton.

The loop is decentralized in the decision sense: every agent plans each
frame from a snapshot of the previous frame, so the update order within
a frame cannot leak into trajectories. Agents that reach their goal park
in place and drop out of sensing, collision checks, and the deadlock
test; leaving them solid would let a parked vehicle seal a corridor and
turn every later arrival into a failure.

Per-agent decisions are pure functions of the snapshot and may fan out
to a thread pool (MEDAX_THREADS); results join before any state is
integrated, which keeps runs bit-identical across worker counts.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .agents import AgentState, collide, collide_env, step
from .geometry import OccupancyGrid, PolyEnvironment, default_cell_size, rasterize
from .navigation import (
    GrvoPlanner,
    ReferenceTrajectory,
    desired_velocity,
    velocity_to_control,
)
from .params import DEFAULTS, Params
from .poi import ShiftTable, build_shift_table, modulate, poi_pipeline
from .skeleton import SkeletonGraph, extract_skeleton

METHODS = ("grvo_plain", "grvo_modulated")

TRAJ_COLUMNS = ("frame", "x", "y", "theta", "trailer_angle", "vx", "vy")


def worker_count() -> int:
    """Worker cap from the MEDAX_THREADS variable; unusable values mean 1."""
    raw = os.environ.get("MEDAX_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass
class World:
    """An environment bundled with its precomputed navigation structures."""

    env: PolyEnvironment
    grid: OccupancyGrid
    graph: SkeletonGraph
    table: ShiftTable | None
    params: Params = field(default_factory=lambda: DEFAULTS)

    @classmethod
    def build(
        cls,
        env: PolyEnvironment,
        cell_size: float | None = None,
        params: Params = DEFAULTS,
        with_table: bool = True,
    ) -> "World":
        cs = default_cell_size(env) if cell_size is None else float(cell_size)
        grid = rasterize(env, cs)
        graph = extract_skeleton(grid, min_clearance=0.5 * params.bounding_radius)
        table = build_shift_table(graph, params.n_max, params) if with_table else None
        return cls(env, grid, graph, table, params)


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.05
    max_frames: int = 6000
    goal_tolerance: float = 2.0
    deadlock_window: int = 200
    deadlock_displacement: float = 0.5
    rng_seed: int = 0
    method: str = "grvo_modulated"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}, expected one of {METHODS}")
        for name in (
            "dt",
            "max_frames",
            "goal_tolerance",
            "deadlock_window",
            "deadlock_displacement",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def with_overrides(self, **kwargs) -> "SimConfig":
        return replace(self, **kwargs)

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class AgentResult:
    id: int
    model: str
    reached: bool
    path_length: float
    trajectory: np.ndarray  # one row per frame, columns TRAJ_COLUMNS


@dataclass
class SimReport:
    success: bool
    outcome: str  # success | collision | deadlock | timeout
    collision_count: int
    frames_used: int
    mean_frame_ms: float
    poi_overhead_ms: float
    method: str
    seed: int
    agents: list[AgentResult]


def _setup_or_raise(world: World, states: list[AgentState]) -> None:
    ids = [s.id for s in states]
    if len(set(ids)) != len(ids):
        raise ValueError("agent ids must be unique")
    for s in states:
        if not world.env.contains(s.position):
            raise ValueError(f"agent {s.id} starts outside the freespace")
        if collide_env(s, world.env):
            raise ValueError(f"agent {s.id} starts in contact with an obstacle")
    for i in range(len(states)):
        for j in range(i + 1, len(states)):
            if collide(states[i], states[j]):
                raise ValueError(f"agents {states[i].id} and {states[j].id} start in collision")


def _routes(world: World, states: list[AgentState]) -> dict[int, ReferenceTrajectory]:
    refs = {}
    for s in states:
        va = world.graph.project(s.position)
        vb = world.graph.project(s.goal)
        if not world.graph.connected(va, vb):
            raise ValueError(f"agent {s.id} has no skeleton route to its goal")
        refs[s.id] = ReferenceTrajectory(world.graph.shortest_path(va, vb), s.goal)
    return refs


def run(world: World, agents: list[AgentState], config: SimConfig,
        poi_log: list | None = None) -> SimReport:
    """Run one scenario to success, collision, deadlock, or frame budget.

    Passing a list as poi_log records every conflict point a modulated
    agent saw, one (frame, agent_id, x, y, n, shifted) row per point,
    ordered by frame then agent id regardless of worker count.
    """
    params = world.params
    if config.goal_tolerance < 0.5 * params.bounding_radius:
        raise ValueError("goal_tolerance below half the bounding radius cannot settle")
    if config.method == "grvo_modulated" and world.table is None:
        raise ValueError("modulated runs need a world built with a shift table")

    states = [a.copy() for a in agents]
    _setup_or_raise(world, states)
    refs = _routes(world, states)
    planner = GrvoPlanner(world.env, params)
    modulated = config.method == "grvo_modulated"

    n = len(states)
    rows: list[list[tuple]] = [[] for _ in range(n)]
    pos_hist = np.zeros((config.max_frames + 1, n, 2))

    def record(frame: int) -> None:
        for k, s in enumerate(states):
            vx, vy = s.velocity(config.dt)
            rows[k].append(
                (frame, s.pose[0], s.pose[1], s.pose[2], s.trailer_angle, vx, vy)
            )

    for k, s in enumerate(states):
        pos_hist[0, k] = s.position
        if float(np.linalg.norm(s.position - s.goal)) <= config.goal_tolerance:
            s.reached = True
            s.prev_pos = s.pose[:2].copy()
    record(0)

    def decide(idx: int):
        s = snapshot[idx]
        p = s.position
        neigh = [
            o
            for o in snapshot
            if o.id != s.id
            and not o.reached
            and float(np.linalg.norm(o.position - p)) <= params.sensing_radius
        ]
        v_des = desired_velocity(s, refs[s.id], params)
        poi_sec = 0.0
        pois = []
        if modulated:
            t0 = time.perf_counter()
            pois = poi_pipeline(s, neigh, world.graph, config.dt, params=params,
                                table=world.table, v_self=v_des)
            v_pref = modulate(v_des, s, pois, params=params)
            poi_sec = time.perf_counter() - t0
        else:
            v_pref = v_des
        v_new = planner.admissible_velocity(s, neigh, v_pref, config.dt)
        return velocity_to_control(s, v_new), poi_sec, pois

    workers = worker_count()
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 and n > 1 else None

    outcome = "timeout"
    collision_count = 0
    frames_used = 0
    wall_sec = 0.0
    poi_sec_total = 0.0
    if all(s.reached for s in states):
        outcome = "success"

    try:
        if outcome != "success":
            for t in range(1, config.max_frames + 1):
                f0 = time.perf_counter()
                snapshot = [s.copy() for s in states]
                active = [k for k in range(n) if not states[k].reached]
                if pool is not None:
                    decisions = list(pool.map(decide, active))
                else:
                    decisions = [decide(k) for k in active]
                frame_log = [] if poi_log is not None else None
                for k, (control, poi_sec, pois) in zip(active, decisions):
                    poi_sec_total += poi_sec
                    if frame_log is not None:
                        frame_log.extend(
                            (t, states[k].id, float(q.position[0]),
                             float(q.position[1]), q.n, q.shifted)
                            for q in pois
                        )
                    states[k] = step(states[k], control, config.dt)
                if frame_log is not None:
                    poi_log.extend(sorted(frame_log, key=lambda r: r[1]))
                frames_used = t
                for k, s in enumerate(states):
                    pos_hist[t, k] = s.position
                record(t)
                wall_sec += time.perf_counter() - f0

                hit = any(collide_env(states[k], world.env) for k in active)
                if not hit:
                    for a in range(len(active)):
                        for b in range(a + 1, len(active)):
                            if collide(states[active[a]], states[active[b]]):
                                hit = True
                                break
                        if hit:
                            break
                if hit:
                    collision_count += 1
                    outcome = "collision"
                    break

                for k in active:
                    s = states[k]
                    if float(np.linalg.norm(s.position - s.goal)) <= config.goal_tolerance:
                        s.reached = True
                        s.prev_pos = s.pose[:2].copy()
                if all(s.reached for s in states):
                    outcome = "success"
                    break

                if t >= config.deadlock_window:
                    unfinished = [k for k in range(n) if not states[k].reached]
                    if unfinished:
                        moved = np.linalg.norm(
                            pos_hist[t, unfinished] - pos_hist[t - config.deadlock_window, unfinished],
                            axis=1,
                        )
                        if moved.max() < config.deadlock_displacement:
                            outcome = "deadlock"
                            break
    finally:
        if pool is not None:
            pool.shutdown()

    results = []
    for k, s in enumerate(states):
        traj = np.array(rows[k], dtype=float)
        deltas = np.diff(traj[:, 1:3], axis=0)
        results.append(
            AgentResult(
                id=s.id,
                model=s.model,
                reached=s.reached,
                path_length=float(np.linalg.norm(deltas, axis=1).sum()),
                trajectory=traj,
            )
        )

    return SimReport(
        success=outcome == "success",
        outcome=outcome,
        collision_count=collision_count,
        frames_used=frames_used,
        mean_frame_ms=1000.0 * wall_sec / frames_used if frames_used else 0.0,
        poi_overhead_ms=1000.0 * poi_sec_total / frames_used if frames_used else 0.0,
        method=config.method,
        seed=config.rng_seed,
        agents=results,
    )


@dataclass
class BatchReport:
    method: str
    trials: int
    success_rate: float
    mean_path_length: float  # over agents that reached their goal, NaN if none
    mean_fps: float
    mean_poi_overhead_ms: float
    runs: list[SimReport]

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "trials": self.trials,
            "success_rate": self.success_rate,
            "mean_path_length": None if math.isnan(self.mean_path_length) else self.mean_path_length,
            "mean_fps": self.mean_fps,
            "mean_poi_overhead_ms": self.mean_poi_overhead_ms,
            "runs": [
                {
                    "seed": r.seed,
                    "outcome": r.outcome,
                    "success": r.success,
                    "frames_used": r.frames_used,
                    "collision_count": r.collision_count,
                    "mean_frame_ms": r.mean_frame_ms,
                    "poi_overhead_ms": r.poi_overhead_ms,
                    "agents": [
                        {
                            "id": a.id,
                            "model": a.model,
                            "reached": a.reached,
                            "path_length": a.path_length,
                        }
                        for a in r.agents
                    ],
                }
                for r in self.runs
            ],
        }


def batch(world: World, scenario_generator, config: SimConfig, trials: int) -> BatchReport:
    """Repeat a generated scenario over consecutive seeds and aggregate.

    Trial k runs with seed rng_seed + k; scenario_generator receives a
    generator seeded that way and returns the agent list. Mean trajectory
    length counts only agents that reached their goals.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    runs = []
    for k in range(trials):
        seed = config.rng_seed + k
        agents = scenario_generator(np.random.default_rng(seed))
        runs.append(run(world, agents, config.with_overrides(rng_seed=seed)))
    lengths = [a.path_length for r in runs for a in r.agents if a.reached]
    fps = [1000.0 / r.mean_frame_ms for r in runs if r.mean_frame_ms > 0]
    return BatchReport(
        method=config.method,
        trials=trials,
        success_rate=sum(r.success for r in runs) / trials,
        mean_path_length=float(np.mean(lengths)) if lengths else math.nan,
        mean_fps=float(np.mean(fps)) if fps else 0.0,
        mean_poi_overhead_ms=float(np.mean([r.poi_overhead_ms for r in runs])),
        runs=runs,
    )


def place_random_agents(
    world: World,
    n: int,
    rng: np.random.Generator,
    spawn_regions,
    models=("diff_drive",),
) -> list[AgentState]:
    """Rejection-sample collision-free agents across start/goal rectangles.

    spawn_regions is a sequence of (start_rect, goal_rect) pairs, each
    rect (xmin, ymin, xmax, ymax) inside the freespace; agents take
    regions round-robin and face their goals. Placement needs point
    clearance of at least the bounding radius and pairwise separation
    of a diameter plus margin, so fresh fleets never start in contact.
    """
    if n == 0:
        return []
    params = world.params
    r = params.bounding_radius
    sep = 2.0 * r + 0.5

    def sample(rect, taken) -> np.ndarray:
        xmin, ymin, xmax, ymax = rect
        for _ in range(10_000):
            p = rng.uniform((xmin, ymin), (xmax, ymax))
            if world.grid.clearance_at(p) < r:
                continue
            if taken and min(float(np.linalg.norm(p - q)) for q in taken) < sep:
                continue
            return p
        raise RuntimeError("could not place an agent after 10000 attempts")

    starts: list[np.ndarray] = []
    goals: list[np.ndarray] = []
    agents = []
    for k in range(n):
        start_rect, goal_rect = spawn_regions[k % len(spawn_regions)]
        p = sample(start_rect, starts)
        g = sample(goal_rect, goals)
        starts.append(p)
        goals.append(g)
        heading = math.atan2(g[1] - p[1], g[0] - p[0])
        agents.append(
            AgentState(
                id=k,
                model=models[k % len(models)],
                pose=np.array([p[0], p[1], heading]),
                goal=g,
                trailer_angle=heading,
                params=params,
            )
        )
    return agents


def dump_trajectory_csv(report: SimReport, path) -> None:
    """Write every agent's trajectory, frame-major, agents by ascending id.

    Floats are written with repr so repeated runs of the same scenario
    produce byte-identical files.
    """
    order = sorted(range(len(report.agents)), key=lambda k: report.agents[k].id)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("frame,agent_id,x,y,theta,trailer_angle,vx,vy\n")
        for t in range(report.frames_used + 1):
            for k in order:
                a = report.agents[k]
                row = a.trajectory[t]
                vals = ",".join(repr(float(v)) for v in row[1:])
                fh.write(f"{t},{a.id},{vals}\n")
