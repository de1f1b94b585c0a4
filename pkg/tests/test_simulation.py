"""Frame-loop behavior: termination, determinism, and placement.

Determinism assertions compare trajectories bit for bit; timing fields
are the one part of a report allowed to vary between identical runs.
"""

import csv

import numpy as np
import pytest

from medax.agents import AgentState, collide
from medax.geometry import PolyEnvironment
from medax.params import DEFAULTS
from medax.simulation import (
    SimConfig,
    World,
    batch,
    dump_trajectory_csv,
    place_random_agents,
    run,
    worker_count,
)


def box_world(w, h, holes=(), cs=1.0):
    env = PolyEnvironment([[0, 0], [w, 0], [w, h], [0, h]], holes)
    return World.build(env, cell_size=cs)


def make_agent(aid, pos, goal, model="diff_drive"):
    heading = np.arctan2(goal[1] - pos[1], goal[0] - pos[0])
    return AgentState(
        id=aid,
        model=model,
        pose=np.array([pos[0], pos[1], heading]),
        goal=np.asarray(goal, dtype=float),
        trailer_angle=heading,
    )


def agent_traj(report, aid):
    for a in report.agents:
        if a.id == aid:
            return a
    raise KeyError(aid)


# Wide arena: two enlarged discs pass with room to spare.
WIDE = None
# Tight corridor: the midline clearance cannot fit two enlarged discs.
TIGHT = None


def setup_module():
    global WIDE, TIGHT
    WIDE = box_world(60, 30)
    TIGHT = box_world(80, 9)


class TestRun:
    def test_single_agent_tracks_straight(self):
        world = box_world(60, 14)
        a = make_agent(0, (8.0, 7.0), (52.0, 7.0))
        report = run(world, [a], SimConfig(method="grvo_plain"))
        assert report.success and report.outcome == "success"
        straight = 44.0
        res = agent_traj(report, 0)
        assert abs(res.path_length - straight) / straight <= 0.05

    def test_two_agents_pass_in_open_arena(self):
        agents = [
            make_agent(0, (10.0, 15.0), (50.0, 15.0)),
            make_agent(1, (50.0, 15.0), (10.0, 15.0)),
        ]
        report = run(WIDE, agents, SimConfig(method="grvo_plain"))
        assert report.success
        assert report.collision_count == 0

    def test_head_on_in_tight_corridor_deadlocks(self):
        agents = [
            make_agent(0, (12.0, 4.5), (68.0, 4.5)),
            make_agent(1, (68.0, 4.5), (12.0, 4.5)),
        ]
        report = run(TIGHT, agents, SimConfig(method="grvo_plain"))
        assert not report.success
        assert report.outcome == "deadlock"
        assert report.collision_count == 0
        assert report.frames_used < SimConfig().max_frames

    def test_success_flag_matches_agents(self):
        agents = [
            make_agent(0, (10.0, 10.0), (50.0, 20.0)),
            make_agent(1, (10.0, 20.0), (50.0, 10.0)),
        ]
        report = run(WIDE, agents, SimConfig(method="grvo_modulated"))
        assert report.success == (
            all(a.reached for a in report.agents) and report.collision_count == 0
        )

    def test_no_agents_is_immediate_success(self):
        report = run(WIDE, [], SimConfig())
        assert report.success and report.frames_used == 0

    def test_agent_already_at_goal(self):
        a = make_agent(0, (30.0, 15.0), (30.5, 15.0))
        report = run(WIDE, [a], SimConfig())
        assert report.success and report.frames_used == 0
        assert agent_traj(report, 0).path_length == 0.0


class TestSetupErrors:
    def test_overlapping_start(self):
        agents = [
            make_agent(0, (20.0, 15.0), (50.0, 15.0)),
            make_agent(1, (21.0, 15.0), (10.0, 15.0)),
        ]
        with pytest.raises(ValueError, match="start in collision"):
            run(WIDE, agents, SimConfig())

    def test_start_outside_freespace(self):
        a = make_agent(0, (-5.0, 15.0), (50.0, 15.0))
        with pytest.raises(ValueError, match="outside"):
            run(WIDE, [a], SimConfig())

    def test_start_touching_wall(self):
        a = make_agent(0, (30.0, 1.0), (50.0, 15.0))
        with pytest.raises(ValueError, match="contact"):
            run(WIDE, [a], SimConfig())

    def test_unreachable_goal(self):
        # Wall splits the box into two sealed rooms.
        world = box_world(60, 30, holes=[[[29, 0.0], [31, 0.0], [31, 30.0], [29, 30.0]]])
        a = make_agent(0, (10.0, 15.0), (50.0, 15.0))
        with pytest.raises(ValueError, match="no skeleton route"):
            run(world, [a], SimConfig())

    def test_duplicate_ids(self):
        agents = [
            make_agent(0, (10.0, 10.0), (50.0, 10.0)),
            make_agent(0, (10.0, 20.0), (50.0, 20.0)),
        ]
        with pytest.raises(ValueError, match="unique"):
            run(WIDE, agents, SimConfig())

    def test_bad_method_rejected(self):
        with pytest.raises(ValueError, match="method"):
            SimConfig(method="teleport")


class TestDeterminism:
    def scenario(self):
        return [
            make_agent(0, (10.0, 13.0), (50.0, 17.0)),
            make_agent(1, (50.0, 17.0), (10.0, 13.0)),
            make_agent(2, (30.0, 25.0), (30.0, 6.0)),
        ]

    def test_same_scenario_bit_identical(self):
        cfg = SimConfig(method="grvo_modulated")
        r1 = run(WIDE, self.scenario(), cfg)
        r2 = run(WIDE, self.scenario(), cfg)
        assert r1.outcome == r2.outcome
        assert r1.frames_used == r2.frames_used
        for a1, a2 in zip(r1.agents, r2.agents):
            assert np.array_equal(a1.trajectory, a2.trajectory)

    def test_agent_order_permutation_invariant(self):
        cfg = SimConfig(method="grvo_modulated")
        r1 = run(WIDE, self.scenario(), cfg)
        r2 = run(WIDE, list(reversed(self.scenario())), cfg)
        assert r1.outcome == r2.outcome
        for aid in (0, 1, 2):
            assert np.array_equal(
                agent_traj(r1, aid).trajectory, agent_traj(r2, aid).trajectory
            )

    def test_worker_count_invariant(self, monkeypatch):
        cfg = SimConfig(method="grvo_modulated", max_frames=400)
        monkeypatch.setenv("MEDAX_THREADS", "1")
        assert worker_count() == 1
        r1 = run(WIDE, self.scenario(), cfg)
        monkeypatch.setenv("MEDAX_THREADS", "4")
        assert worker_count() == 4
        r2 = run(WIDE, self.scenario(), cfg)
        for aid in (0, 1, 2):
            assert np.array_equal(
                agent_traj(r1, aid).trajectory, agent_traj(r2, aid).trajectory
            )

    def test_garbage_thread_var_means_serial(self, monkeypatch):
        monkeypatch.setenv("MEDAX_THREADS", "many")
        assert worker_count() == 1


class TestFrozenAgents:
    def test_parked_agent_does_not_block(self):
        # Agent 0 parks mid-corridor; agent 1 must still get through.
        agents = [
            make_agent(0, (30.0, 4.5), (40.0, 4.5)),
            make_agent(1, (8.0, 4.5), (72.0, 4.5)),
        ]
        report = run(TIGHT, agents, SimConfig(method="grvo_plain"))
        assert report.success
        assert agent_traj(report, 1).reached

    def test_pose_constant_after_reaching(self):
        agents = [
            make_agent(0, (30.0, 4.5), (40.0, 4.5)),
            make_agent(1, (8.0, 4.5), (72.0, 4.5)),
        ]
        report = run(TIGHT, agents, SimConfig(method="grvo_plain"))
        traj = agent_traj(report, 0).trajectory
        goal = np.array([40.0, 4.5])
        inside = np.linalg.norm(traj[:, 1:3] - goal, axis=1) <= 2.0
        first = int(np.argmax(inside))
        assert inside[first]
        tail = traj[first:, 1:5]
        assert np.array_equal(tail, np.repeat(tail[:1], len(tail), axis=0))


class TestReports:
    def test_path_length_matches_dump(self, tmp_path):
        agents = [
            make_agent(0, (10.0, 12.0), (50.0, 18.0)),
            make_agent(1, (50.0, 18.0), (10.0, 12.0)),
        ]
        report = run(WIDE, agents, SimConfig(method="grvo_modulated"))
        out = tmp_path / "traj.csv"
        dump_trajectory_csv(report, out)

        sums = {}
        last = {}
        with open(out, newline="") as fh:
            for row in csv.DictReader(fh):
                aid = int(row["agent_id"])
                p = np.array([float(row["x"]), float(row["y"])])
                if aid in last:
                    sums[aid] += float(np.linalg.norm(p - last[aid]))
                else:
                    sums[aid] = 0.0
                last[aid] = p
        for a in report.agents:
            assert np.isclose(sums[a.id], a.path_length, atol=1e-9)

    def test_dump_byte_identical_across_runs(self, tmp_path):
        agents = [
            make_agent(0, (10.0, 12.0), (50.0, 18.0)),
            make_agent(1, (50.0, 18.0), (10.0, 12.0)),
        ]
        cfg = SimConfig(method="grvo_modulated")
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        dump_trajectory_csv(run(WIDE, agents, cfg), p1)
        dump_trajectory_csv(run(WIDE, agents, cfg), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_trailer_column_present_for_truck(self, tmp_path):
        world = box_world(60, 30)
        a = make_agent(0, (10.0, 15.0), (50.0, 15.0), model="truck")
        report = run(world, [a], SimConfig(method="grvo_plain"))
        out = tmp_path / "t.csv"
        dump_trajectory_csv(report, out)
        header = out.read_text().splitlines()[0]
        assert header == "frame,agent_id,x,y,theta,trailer_angle,vx,vy"


class TestBatch:
    @staticmethod
    def generator(world):
        regions = [(((6, 6, 22, 24)), ((38, 6, 54, 24))), (((38, 6, 54, 24)), ((6, 6, 22, 24)))]

        def gen(rng):
            return place_random_agents(world, 2, rng, regions)

        return gen

    def test_single_trial_reduces_to_run(self):
        cfg = SimConfig(method="grvo_plain", rng_seed=7)
        gen = self.generator(WIDE)
        rep = batch(WIDE, gen, cfg, trials=1)
        direct = run(WIDE, gen(np.random.default_rng(7)), cfg)
        assert rep.trials == 1
        assert rep.runs[0].outcome == direct.outcome
        for a1, a2 in zip(rep.runs[0].agents, direct.agents):
            assert np.array_equal(a1.trajectory, a2.trajectory)

    def test_same_seed_repeatable(self):
        cfg = SimConfig(method="grvo_plain", rng_seed=3)
        gen = self.generator(WIDE)
        r1 = batch(WIDE, gen, cfg, trials=3)
        r2 = batch(WIDE, gen, cfg, trials=3)
        assert r1.success_rate == r2.success_rate
        assert r1.mean_path_length == r2.mean_path_length
        for a, b in zip(r1.runs, r2.runs):
            assert a.seed == b.seed and a.outcome == b.outcome

    def test_consecutive_seeds(self):
        cfg = SimConfig(method="grvo_plain", rng_seed=11)
        rep = batch(WIDE, self.generator(WIDE), cfg, trials=3)
        assert [r.seed for r in rep.runs] == [11, 12, 13]

    def test_report_dict_schema_fields(self):
        cfg = SimConfig(method="grvo_plain", rng_seed=1)
        rep = batch(WIDE, self.generator(WIDE), cfg, trials=2).to_dict()
        assert set(rep) == {
            "method",
            "trials",
            "success_rate",
            "mean_path_length",
            "mean_fps",
            "mean_poi_overhead_ms",
            "runs",
        }
        assert {r["outcome"] for r in rep["runs"]} <= {
            "success",
            "collision",
            "deadlock",
            "timeout",
        }


class TestPlacement:
    def test_zero_agents(self):
        rng = np.random.default_rng(0)
        assert place_random_agents(WIDE, 0, rng, [((5, 5, 20, 20), (40, 5, 55, 20))]) == []

    def test_crowd_is_collision_free(self):
        world = box_world(120, 60)
        regions = [
            ((8, 8, 50, 52), (70, 8, 112, 52)),
            ((70, 8, 112, 52), (8, 8, 50, 52)),
        ]
        agents = place_random_agents(world, 15, np.random.default_rng(2), regions)
        assert len(agents) == 15
        r = DEFAULTS.bounding_radius
        for i in range(15):
            assert world.grid.clearance_at(agents[i].position) >= r
            for j in range(i + 1, 15):
                assert not collide(agents[i], agents[j])

    def test_deterministic_under_seed(self):
        regions = [((6, 6, 22, 24), (38, 6, 54, 24))]
        a1 = place_random_agents(WIDE, 4, np.random.default_rng(9), regions)
        a2 = place_random_agents(WIDE, 4, np.random.default_rng(9), regions)
        for x, y in zip(a1, a2):
            assert np.array_equal(x.pose, y.pose)
            assert np.array_equal(x.goal, y.goal)

    def test_impossible_placement_raises(self):
        # A region far smaller than one body cannot host five agents.
        regions = [((14.0, 14.0, 16.0, 16.0), (40, 10, 50, 20))]
        with pytest.raises(RuntimeError, match="10000 attempts"):
            place_random_agents(WIDE, 5, np.random.default_rng(1), regions)

    def test_round_robin_models(self):
        regions = [((6, 6, 22, 24), (38, 6, 54, 24))]
        agents = place_random_agents(
            WIDE, 4, np.random.default_rng(5), regions, models=("diff_drive", "dubins")
        )
        assert [a.model for a in agents] == ["diff_drive", "dubins", "diff_drive", "dubins"]
