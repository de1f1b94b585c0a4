"""Command-line front end: single runs, benchmark batches, skeleton plots.

Exit codes follow the usual convention: 0 for a successful run, 1 when
the simulation itself fails (collision, deadlock, timeout), 2 for
anything wrong with the invocation or its input files.
"""

from __future__ import annotations

import argparse
import importlib.resources
import json
import sys

import jsonschema
import numpy as np

from . import maps
from .scenario import build_scenario_world, load_scenario, scenario_agents
from .simulation import METHODS, SimConfig, batch, dump_trajectory_csv, run
from .svg import write_svg

POI_CSV_COLUMNS = ("frame", "agent", "poi_x", "poi_y", "n", "shifted")


def report_schema() -> dict:
    text = (
        importlib.resources.files("medax")
        .joinpath("data/report_schema.json")
        .read_text(encoding="utf-8")
    )
    return json.loads(text)


def validate_report(report: dict) -> None:
    jsonschema.validate(report, report_schema())


def dump_poi_csv(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(POI_CSV_COLUMNS) + "\n")
        for frame, agent, x, y, n, shifted in rows:
            fh.write(f"{frame},{agent},{x!r},{y!r},{n},{int(shifted)}\n")


def _unique_pois(rows):
    """Deduplicated plot markers from a poi log; insertion order kept."""

    class _Marker:
        __slots__ = ("position", "shifted")

        def __init__(self, x, y, shifted):
            self.position = np.array([x, y])
            self.shifted = bool(shifted)

    seen = {}
    for _, _, x, y, _, shifted in rows:
        key = (round(x, 3), round(y, 3), bool(shifted))
        if key not in seen:
            seen[key] = _Marker(x, y, shifted)
    return list(seen.values())


def _cmd_run(args) -> int:
    sc = load_scenario(args.scenario)
    config = sc.config
    if args.seed is not None:
        config = config.with_overrides(rng_seed=args.seed)
    if args.method is not None:
        config = config.with_overrides(method=args.method)
    world = build_scenario_world(sc)
    agents = scenario_agents(sc, world, np.random.default_rng(config.rng_seed))
    poi_log = [] if (args.dump_poi or args.plot) else None
    report = run(world, agents, config, poi_log=poi_log)

    if args.dump_traj:
        dump_trajectory_csv(report, args.dump_traj)
    if args.dump_poi:
        dump_poi_csv(poi_log, args.dump_poi)
    if args.plot:
        trajectories = {
            a.id: np.asarray(a.trajectory)[:, 1:3] for a in report.agents
        }
        write_svg(
            args.plot,
            world.env,
            graph=world.graph,
            trajectories=trajectories,
            pois=_unique_pois(poi_log or []),
        )

    reached = sum(a.reached for a in report.agents)
    print(
        f"{sc.name}: method={config.method} seed={config.rng_seed} "
        f"outcome={report.outcome} frames={report.frames_used} "
        f"reached={reached}/{len(report.agents)} "
        f"collisions={report.collision_count} "
        f"mean_frame_ms={report.mean_frame_ms:.2f} "
        f"poi_overhead_ms={report.poi_overhead_ms:.2f}"
    )
    return 0 if report.success else 1


def _cmd_bench(args) -> int:
    if args.agents < 1:
        raise ValueError("--agents must be >= 1")
    keys = list(maps.SUITES) if args.suite == "all" else [args.suite]
    suites = {}
    for key in keys:
        name = maps.SUITES[key]
        bmap = maps.BUILDERS[name]()
        world = maps.build_world(bmap)

        def generator(rng, _world=world, _regions=bmap.spawn_regions):
            from .simulation import place_random_agents

            return place_random_agents(_world, args.agents, rng, _regions)

        methods = {}
        for method in METHODS:
            config = SimConfig(method=method, rng_seed=args.seed)
            result = batch(world, generator, config, args.trials)
            methods[method] = result.to_dict()
            print(
                f"suite {key} ({name}) {method}: "
                f"success_rate={result.success_rate:.2f} "
                f"mean_path_length={result.mean_path_length:.1f} "
                f"mean_fps={result.mean_fps:.0f} "
                f"poi_overhead_ms={result.mean_poi_overhead_ms:.2f}"
            )
        suites[key] = {
            "map": name,
            "agents": args.agents,
            "trials": args.trials,
            "methods": methods,
        }

    report = {"suites": suites}
    validate_report(report)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"report written to {args.out}")
    return 0


def _cmd_skeleton(args) -> int:
    sc = load_scenario(args.scenario)
    world = build_scenario_world(sc, with_table=False)
    write_svg(args.plot, world.env, graph=world.graph)
    print(
        f"{sc.name}: {world.graph.vertex_count} vertices, "
        f"{len(world.graph.edges)} edges, plot written to {args.plot}"
    )
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="medax",
        description="Multi-agent navigation on medial-axis maps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario")
    p_run.add_argument("--scenario", required=True, help="scenario JSON file")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--method", choices=METHODS, default=None)
    p_run.add_argument("--dump-traj", metavar="CSV", default=None)
    p_run.add_argument("--dump-poi", metavar="CSV", default=None)
    p_run.add_argument("--plot", metavar="SVG", default=None)
    p_run.set_defaults(func=_cmd_run)

    p_bench = sub.add_parser("bench", help="run benchmark suites")
    p_bench.add_argument(
        "--suite", choices=["all", *maps.SUITES], default="all"
    )
    p_bench.add_argument("--trials", type=int, default=20)
    p_bench.add_argument("--agents", type=int, default=4)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--out", metavar="JSON", default="report.json")
    p_bench.set_defaults(func=_cmd_bench)

    p_skel = sub.add_parser("skeleton", help="plot a scenario's skeleton")
    p_skel.add_argument("--scenario", required=True, help="scenario JSON file")
    p_skel.add_argument("--plot", metavar="SVG", required=True)
    p_skel.set_defaults(func=_cmd_skeleton)

    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
