"""Scenario files: one JSON document describing a complete run.

A scenario names a map (a built-in benchmark or inline polygons), the
agents on it (explicit poses or a random-spawn request), and overrides
for the run settings and shared tunables. Loading is strict: unknown
keys and malformed blocks raise ValueError rather than being ignored,
because a silently dropped override invalidates a benchmark without
anyone noticing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import maps
from .agents import MODELS, AgentState
from .geometry import PolyEnvironment
from .params import DEFAULTS, Params
from .simulation import METHODS, SimConfig, World, place_random_agents

_TOP_KEYS = {"map", "cell_size", "agents", "spawn", "spawn_regions",
             "config", "params", "methods", "name"}


@dataclass(frozen=True)
class Scenario:
    name: str
    env: PolyEnvironment
    cell_size: float | None
    agents: tuple | None          # explicit agent blocks, already validated
    spawn_count: int | None
    spawn_models: tuple
    spawn_regions: tuple | None
    config: SimConfig
    params: Params
    methods: tuple

    @property
    def agent_count(self) -> int:
        return len(self.agents) if self.agents is not None else self.spawn_count


def _fail(msg: str):
    raise ValueError(f"scenario: {msg}")


def _load_env(spec, data):
    if isinstance(spec, str):
        if spec not in maps.BUILDERS:
            _fail(f"unknown map {spec!r}, expected one of {sorted(maps.BUILDERS)}")
        bmap = maps.BUILDERS[spec]()
        regions = data.get("spawn_regions", bmap.spawn_regions)
        cell = data.get("cell_size", bmap.cell_size)
        return spec, bmap.env, cell, regions
    if isinstance(spec, dict):
        extra = set(spec) - {"outer", "holes"}
        if extra:
            _fail(f"unknown map keys: {sorted(extra)}")
        if "outer" not in spec:
            _fail("inline map needs an outer polygon")
        env = PolyEnvironment(spec["outer"], tuple(spec.get("holes", ())))
        regions = data.get("spawn_regions")
        return data.get("name", "custom"), env, data.get("cell_size"), regions
    _fail("map must be a built-in name or an inline polygon dict")


def _check_agent_block(k, block):
    if not isinstance(block, dict):
        _fail(f"agent {k} is not an object")
    extra = set(block) - {"model", "start", "goal", "params", "trailer_angle"}
    if extra:
        _fail(f"agent {k}: unknown keys {sorted(extra)}")
    model = block.get("model", "diff_drive")
    if model not in MODELS:
        _fail(f"agent {k}: unknown model {model!r}")
    start = block.get("start")
    goal = block.get("goal")
    if start is None or len(start) != 3:
        _fail(f"agent {k}: start must be [x, y, theta]")
    if goal is None or len(goal) != 2:
        _fail(f"agent {k}: goal must be [x, y]")


def load_scenario(source) -> Scenario:
    """Parse a scenario from a JSON file path or an equivalent dict."""
    if isinstance(source, dict):
        data = source
        default_name = "inline"
    else:
        path = Path(source)
        if not path.is_file():
            _fail(f"no such file: {path}")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            _fail(f"{path}: invalid JSON ({exc})")
        default_name = path.stem
    if not isinstance(data, dict):
        _fail("top level must be an object")
    extra = set(data) - _TOP_KEYS
    if extra:
        _fail(f"unknown keys: {sorted(extra)}")
    if "map" not in data:
        _fail("missing required key 'map'")

    name, env, cell_size, regions = _load_env(data["map"], data)
    name = data.get("name", name if isinstance(data["map"], str) else default_name)

    try:
        params = Params.from_dict({**_asdict(DEFAULTS), **data.get("params", {})})
    except (TypeError, ValueError) as exc:
        _fail(str(exc))
    try:
        config = SimConfig.from_dict(data.get("config", {}))
    except (TypeError, ValueError) as exc:
        _fail(str(exc))

    methods = tuple(data.get("methods", (config.method,)))
    for m in methods:
        if m not in METHODS:
            _fail(f"unknown method {m!r}, expected one of {METHODS}")
    if not methods:
        _fail("methods must not be empty")

    agents = data.get("agents")
    spawn = data.get("spawn")
    if (agents is None) == (spawn is None):
        _fail("exactly one of 'agents' or 'spawn' is required")

    spawn_count = None
    spawn_models = ("diff_drive",)
    if agents is not None:
        if not agents:
            _fail("agent list is empty")
        for k, block in enumerate(agents):
            _check_agent_block(k, block)
        agents = tuple(dict(b) for b in agents)
    else:
        extra = set(spawn) - {"count", "models"}
        if extra:
            _fail(f"spawn: unknown keys {sorted(extra)}")
        spawn_count = spawn.get("count")
        if not isinstance(spawn_count, int) or spawn_count < 1:
            _fail("spawn.count must be a positive integer")
        spawn_models = tuple(spawn.get("models", spawn_models))
        for m in spawn_models:
            if m not in MODELS:
                _fail(f"spawn: unknown model {m!r}")
        if regions is None:
            _fail("random spawn needs a built-in map or explicit spawn_regions")

    return Scenario(
        name=name,
        env=env,
        cell_size=cell_size,
        agents=agents,
        spawn_count=spawn_count,
        spawn_models=spawn_models,
        spawn_regions=tuple(tuple(r) for r in regions) if regions is not None else None,
        config=config,
        params=params,
        methods=methods,
    )


def _asdict(params: Params) -> dict:
    from dataclasses import fields
    return {f.name: getattr(params, f.name) for f in fields(params)}


def build_scenario_world(sc: Scenario, with_table: bool = True) -> World:
    return World.build(sc.env, cell_size=sc.cell_size, params=sc.params,
                       with_table=with_table)


def scenario_agents(sc: Scenario, world: World, rng=None) -> list[AgentState]:
    """Concrete agent states for one run of the scenario.

    Explicit blocks are instantiated as written; a spawn request places
    agents randomly, so it needs the rng.
    """
    if sc.agents is not None:
        out = []
        for k, block in enumerate(sc.agents):
            p = sc.params
            if "params" in block:
                try:
                    p = p.with_overrides(**block["params"])
                except TypeError as exc:
                    _fail(f"agent {k}: {exc}")
            theta = float(block["start"][2])
            out.append(
                AgentState(
                    id=k,
                    model=block.get("model", "diff_drive"),
                    pose=np.asarray(block["start"], dtype=float),
                    goal=np.asarray(block["goal"], dtype=float),
                    trailer_angle=float(block.get("trailer_angle", theta)),
                    params=p,
                )
            )
        return out
    if rng is None:
        rng = np.random.default_rng(sc.config.rng_seed)
    return place_random_agents(
        world, sc.spawn_count, rng, sc.spawn_regions, models=sc.spawn_models
    )
