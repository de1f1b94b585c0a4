"""A small benchmark batch with a machine-checkable report.

Runs the parking-garage map with two agents spawned head-on, a handful
of trials per method, and aggregates success rate, path length, frame
rate, and conflict-point overhead. The resulting document is validated
against the bundled JSON schema, the same path the bench command uses.
"""

import json

import numpy as np

from medax import SimConfig, batch, place_random_agents
from medax import maps
from medax.cli import validate_report

TRIALS = 3
AGENTS = 2

bmap = maps.garage()
world = maps.build_world(bmap)
config = SimConfig(rng_seed=0)

suite = {"map": bmap.name, "agents": AGENTS, "trials": TRIALS, "methods": {}}
for method in ("grvo_plain", "grvo_modulated"):
    gen = lambda rng: place_random_agents(world, AGENTS, rng, bmap.spawn_regions)
    rep = batch(world, gen, config.with_overrides(method=method), TRIALS)
    suite["methods"][method] = rep.to_dict()

report = {"suites": {"IV": suite}}
validate_report(report)
print("report validates against the bundled schema\n")

print(f"{'method':>16} {'success':>8} {'mean path':>10} {'overhead ms':>12}")
for name, m in suite["methods"].items():
    path = "-" if m["mean_path_length"] is None else f"{m['mean_path_length']:.1f}"
    print(f"{name:>16} {m['success_rate']:>8.2f} {path:>10} "
          f"{m['mean_poi_overhead_ms']:>12.2f}")

with open("demos/out_05_report.json", "w") as fh:
    json.dump(report, fh, indent=2, sort_keys=True)
    fh.write("\n")
print("\nfull report written to demos/out_05_report.json")
