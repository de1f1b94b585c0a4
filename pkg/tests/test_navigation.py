import math

import numpy as np
import pytest

from medax.agents import AgentState, collide, footprint, step
from medax.geometry import PolyEnvironment
from medax.navigation import (
    GrvoPlanner,
    Line,
    ReferenceTrajectory,
    _lp2,
    _lp3,
    clamp_norm,
    desired_velocity,
    line_from_halfplane,
    velocity_to_control,
)
from medax.params import DEFAULTS
from medax.skeleton import SkeletonPath


def make_agent(aid, pose, goal, model="diff_drive"):
    return AgentState(
        id=aid, model=model, pose=np.array(pose, float), goal=np.array(goal, float)
    )


def open_box(side=100.0):
    return PolyEnvironment([[0, 0], [side, 0], [side, side], [0, side]])


def feasible(lines, v, tol=0.0):
    for line in lines:
        d = line.direction
        q = line.point - v
        if d[0] * q[1] - d[1] * q[0] > tol:
            return False
    return True


def sampled_optimum(lines, radius, pref, n=481):
    """Brute-force argmin of |v - pref| over a dense disc grid."""
    ax = np.linspace(-radius, radius, n)
    gx, gy = np.meshgrid(ax, ax)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    pts = pts[np.einsum("ij,ij->i", pts, pts) <= radius * radius]
    ok = np.ones(len(pts), bool)
    for line in lines:
        d, p = line.direction, line.point
        ok &= d[0] * (p[1] - pts[:, 1]) - d[1] * (p[0] - pts[:, 0]) <= 1e-12
    if not ok.any():
        return None
    cand = pts[ok]
    err = np.einsum("ij,ij->i", cand - pref, cand - pref)
    return cand[np.argmin(err)]


class TestLinearProgram:
    def test_unconstrained_returns_preference(self):
        _, res = _lp2([], 2.0, np.array([0.5, -0.3]), False)
        assert np.allclose(res, [0.5, -0.3])

    def test_preference_clamped_to_disc(self):
        _, res = _lp2([], 2.0, np.array([30.0, 40.0]), False)
        assert np.linalg.norm(res) == pytest.approx(2.0)
        assert np.allclose(res / np.linalg.norm(res), [0.6, 0.8])

    def test_single_halfplane_projection(self):
        lines = [line_from_halfplane([0.0, 1.0], 0.5)]
        _, res = _lp2(lines, 2.0, np.array([0.0, 2.0]), False)
        assert np.allclose(res, [0.0, 0.5], atol=1e-12)

    def test_matches_dense_sampling(self):
        rng = np.random.default_rng(7)
        checked = 0
        for _ in range(60):
            m = rng.integers(1, 5)
            lines = []
            for _ in range(m):
                ang = rng.uniform(0, 2 * math.pi)
                lines.append(
                    line_from_halfplane(
                        [math.cos(ang), math.sin(ang)], rng.uniform(-0.3, 1.5)
                    )
                )
            pref = rng.uniform(-2, 2, 2)
            oracle = sampled_optimum(lines, 2.0, pref)
            if oracle is None:
                continue
            fail, res = _lp2(lines, 2.0, pref, False)
            if fail < len(lines):
                continue
            checked += 1
            assert feasible(lines, res, tol=1e-7)
            grid_step = 4.0 / 480
            assert np.linalg.norm(res - pref) <= np.linalg.norm(oracle - pref) + 2 * grid_step
        assert checked >= 30

    def test_infeasible_fallback_balances_violation(self):
        # v_x <= -1 and v_x >= 1 cannot both hold; the relaxed answer sits
        # between them.
        lines = [
            line_from_halfplane([1.0, 0.0], -1.0),
            line_from_halfplane([-1.0, 0.0], -1.0),
        ]
        fail, res = _lp2(lines, 2.0, np.array([0.0, 1.0]), False)
        assert fail < len(lines)
        res = _lp3(lines, 0, fail, 2.0, res)
        assert abs(res[0]) < 1e-6

    def test_fallback_keeps_fixed_lines_hard(self):
        hard = line_from_halfplane([0.0, 1.0], 0.2)
        soft_a = line_from_halfplane([1.0, 0.0], -1.0)
        soft_b = line_from_halfplane([-1.0, 0.0], -1.0)
        lines = [hard, soft_a, soft_b]
        fail, res = _lp2(lines, 2.0, np.array([0.0, 2.0]), False)
        assert fail < len(lines)
        res = _lp3(lines, 1, fail, 2.0, res)
        assert res[1] <= 0.2 + 1e-9


class TestObstacleConstraints:
    def test_wall_approach_speed_capped(self):
        planner = GrvoPlanner(open_box())
        agent = make_agent(0, (10.0, 5.0, -math.pi / 2), (10.0, 0.0))
        res = planner.admissible_velocity(agent, [], np.array([0.0, -2.0]), 0.05)
        cap = (5.0 - DEFAULTS.enlarged_radius) / DEFAULTS.tau_obstacles
        assert res[1] >= -cap - 1e-9
        assert res[1] == pytest.approx(-cap, abs=1e-6)

    def test_far_from_walls_unconstrained(self):
        planner = GrvoPlanner(open_box(200.0))
        agent = make_agent(0, (100.0, 100.0, 0.0), (150.0, 100.0))
        pref = np.array([1.5, 0.0])
        res = planner.admissible_velocity(agent, [], pref, 0.05)
        # Only the deliberate tie-break rotation separates them.
        assert np.linalg.norm(res) == pytest.approx(1.5, abs=1e-9)
        assert np.linalg.norm(res - pref) < 0.08

    def test_corner_blocks_diagonal(self):
        planner = GrvoPlanner(open_box())
        agent = make_agent(0, (5.0, 5.0, 0.0), (0.0, 0.0))
        res = planner.admissible_velocity(agent, [], np.array([-2.0, -2.0]), 0.05)
        cap = (5.0 - DEFAULTS.enlarged_radius) / DEFAULTS.tau_obstacles
        assert res[0] >= -cap - 1e-9 and res[1] >= -cap - 1e-9


class TestEncounters:
    def run_encounter(self, a, b, frames=1200, env_side=100.0):
        env = open_box(env_side)
        planner = GrvoPlanner(env)
        agents = [a, b]
        dt = 0.05
        for _ in range(frames):
            snapshot = [ag.copy() for ag in agents]
            new = []
            for i, ag in enumerate(snapshot):
                pref = clamp_norm(ag.goal - ag.position, DEFAULTS.v_max)
                vel = planner.admissible_velocity(
                    ag, [snapshot[1 - i]], pref, dt
                )
                new.append(step(agents[i], velocity_to_control(ag, vel), dt))
            agents = new
            assert not collide(agents[0], agents[1])
            if all(np.linalg.norm(ag.position - ag.goal) < 2.0 for ag in agents):
                return True
        return False

    def test_head_on_pass(self):
        a = make_agent(0, (35.0, 50.0, 0.0), (65.0, 50.0))
        b = make_agent(1, (65.0, 50.0, math.pi), (35.0, 50.0))
        assert self.run_encounter(a, b)

    def test_crossing_pass(self):
        a = make_agent(0, (50.0, 35.0, math.pi / 2), (50.0, 65.0))
        b = make_agent(1, (35.0, 50.0, 0.0), (65.0, 50.0))
        assert self.run_encounter(a, b)

    def test_head_on_dubins(self):
        a = make_agent(0, (30.0, 50.0, 0.0), (70.0, 50.0), model="dubins")
        b = make_agent(1, (70.0, 50.0, math.pi), (30.0, 50.0), model="dubins")
        assert self.run_encounter(a, b, frames=2000)

    def test_head_on_trucks(self):
        a = make_agent(0, (30.0, 50.0, 0.0), (70.0, 50.0), model="truck")
        b = make_agent(1, (70.0, 50.0, math.pi), (30.0, 50.0), model="truck")
        assert self.run_encounter(a, b, frames=2000)

    def test_random_circle_swaps_stay_safe(self):
        env = open_box(200.0)
        planner = GrvoPlanner(env)
        dt = 0.05
        models = ["diff_drive", "dubins", "truck"]
        for seed in range(25):
            rng = np.random.default_rng(seed)
            base = rng.uniform(0, 2 * math.pi)
            agents = []
            for i in range(4):
                ang = base + i * math.pi / 2
                start = 100.0 + 30.0 * np.array([math.cos(ang), math.sin(ang)])
                goal = 100.0 + 30.0 * np.array([math.cos(ang + math.pi), math.sin(ang + math.pi)])
                heading = math.atan2(*(goal - start)[::-1])
                agents.append(
                    make_agent(i, (*start, heading), goal, model=models[i % 3])
                )
            for _ in range(400):
                snapshot = [ag.copy() for ag in agents]
                new = []
                for i, ag in enumerate(snapshot):
                    pref = clamp_norm(ag.goal - ag.position, DEFAULTS.v_max)
                    others = [s for s in snapshot if s.id != ag.id]
                    vel = planner.admissible_velocity(ag, others, pref, dt)
                    new.append(step(agents[i], velocity_to_control(ag, vel), dt))
                agents = new
                for i in range(4):
                    for j in range(i + 1, 4):
                        assert not collide(agents[i], agents[j]), f"seed {seed}"

    def test_determinism(self):
        planner = GrvoPlanner(open_box())
        a = make_agent(0, (40.0, 50.0, 0.0), (60.0, 50.0))
        b = make_agent(1, (60.0, 50.0, math.pi), (40.0, 50.0))
        pref = np.array([2.0, 0.0])
        r1 = planner.admissible_velocity(a, [b], pref, 0.05)
        r2 = planner.admissible_velocity(a, [b], pref, 0.05)
        assert np.array_equal(r1, r2)


def straight_path(n=12, spacing=1.0):
    pos = np.column_stack([np.arange(n) * spacing, np.zeros(n)])
    cum = np.arange(n) * spacing
    return SkeletonPath(np.arange(n), pos, np.full(n, 5.0), cum.astype(float))


def hairpin_path():
    # Out along y=0, back along y=3: two spatially close runs.
    out = np.column_stack([np.arange(15, dtype=float), np.zeros(15)])
    turn = np.array([[14.5, 1.5]])
    back = np.column_stack([np.arange(14, -1, -1, dtype=float), np.full(15, 3.0)])
    pos = np.vstack([out, turn, back])
    cum = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pos, axis=0), axis=1))])
    return SkeletonPath(np.arange(len(pos)), pos, np.full(len(pos), 5.0), cum)


class TestReferenceTrajectory:
    def test_localize_advances(self):
        ref = ReferenceTrajectory(straight_path(), goal=(11.0, 0.0))
        i0, _ = ref.localize(np.array([0.2, 0.1]))
        i1, t1 = ref.localize(np.array([4.6, -0.1]))
        assert i0 == 0
        assert i1 == 4 and t1 == pytest.approx(0.6, abs=1e-9)

    def test_window_blocks_jump_across_hairpin(self):
        ref = ReferenceTrajectory(hairpin_path(), goal=(0.0, 3.0))
        ref.localize(np.array([2.0, 0.0]))
        # Nearest segment globally is the return run at y=3, but that is
        # far ahead along the path; the window must hold the match nearby.
        i, _ = ref.localize(np.array([2.0, 1.2]))
        assert i < 12

    def test_backward_window_is_small(self):
        ref = ReferenceTrajectory(straight_path(), goal=(11.0, 0.0))
        start, _ = ref.localize(np.array([8.3, 0.0]))
        assert start == 8
        i, _ = ref.localize(np.array([0.0, 0.0]))
        assert i == start - ReferenceTrajectory.BACK_WINDOW

    def test_desired_velocity_follows_tangent(self):
        ref = ReferenceTrajectory(straight_path(), goal=(11.0, 0.0))
        agent = make_agent(0, (2.3, 0.4, 0.0), (11.0, 0.0))
        v = desired_velocity(agent, ref)
        expect = np.array([DEFAULTS.w_follow * DEFAULTS.v_max, 0.0]) - DEFAULTS.w_bias * (
            np.array([2.3, 0.4]) - np.array([2.0, 0.0])
        )
        assert np.allclose(v, clamp_norm(expect, DEFAULTS.v_max))

    def test_desired_velocity_goal_direct_at_end(self):
        ref = ReferenceTrajectory(straight_path(), goal=(11.3, 0.5))
        agent = make_agent(0, (10.2, 0.0, 0.0), (11.3, 0.5))
        v = desired_velocity(agent, ref)
        want = np.array([1.1, 0.5])
        assert np.allclose(v, want, atol=1e-12)

    def test_single_vertex_path(self):
        path = SkeletonPath(np.array([3]), np.array([[5.0, 5.0]]), np.array([4.0]), np.array([0.0]))
        ref = ReferenceTrajectory(path, goal=(6.0, 5.0))
        agent = make_agent(0, (5.0, 5.0, 0.0), (6.0, 5.0))
        v = desired_velocity(agent, ref)
        assert np.allclose(v, [1.0, 0.0])


class TestVelocityToControl:
    def test_straight_ahead(self):
        agent = make_agent(0, (0, 0, 0), (10, 0))
        c = velocity_to_control(agent, np.array([1.2, 0.0]))
        assert c.u1 == pytest.approx(1.2) and c.u2 == pytest.approx(1.2)

    def test_lateral_command_turns(self):
        agent = make_agent(0, (0, 0, 0), (10, 0))
        c = velocity_to_control(agent, np.array([0.0, 1.0]))
        omega = (c.u2 - c.u1) / DEFAULTS.body_width
        assert omega == pytest.approx(1.0 / DEFAULTS.center_offset)
        assert c.u1 + c.u2 == pytest.approx(0.0)

    def test_dubins_never_reverses(self):
        agent = make_agent(0, (0, 0, 0), (10, 0), model="dubins")
        c = velocity_to_control(agent, np.array([-1.0, 0.0]))
        assert c.u1 >= 0.0

    def test_dubins_rear_command_arcs_around(self):
        # A stopped car cannot rotate, so a rear command must keep it
        # rolling at full lock rather than freeze it in place.
        agent = make_agent(0, (0, 0, 0), (10, 0), model="dubins")
        for vy in (0.5, -0.5):
            c = velocity_to_control(agent, np.array([-1.5, vy]))
            assert c.u1 > 0.0
            assert abs(c.u2) == pytest.approx(DEFAULTS.kappa_max_dubins)
            assert math.copysign(1.0, c.u2) == math.copysign(1.0, vy)

    def test_dubins_sideways_command_keeps_rolling(self):
        agent = make_agent(0, (0, 0, 0), (10, 0), model="dubins")
        c = velocity_to_control(agent, np.array([0.0, 2.0]))
        assert c.u1 == pytest.approx(1.0)
        assert c.u2 == pytest.approx(DEFAULTS.kappa_max_dubins)

    def test_dubins_stop_command_stops(self):
        agent = make_agent(0, (0, 0, 0), (10, 0), model="dubins")
        c = velocity_to_control(agent, np.array([0.0, 0.0]))
        assert c.u1 == 0.0 and c.u2 == 0.0

    def test_respects_speed_limit(self):
        agent = make_agent(0, (0, 0, 0.3), (10, 0))
        c = velocity_to_control(agent, np.array([5.0, 0.0]))
        v = 0.5 * (c.u1 + c.u2)
        assert v <= DEFAULTS.v_max + 1e-12

    def test_heading_frame(self):
        # Command along +y while facing +y: pure forward.
        agent = make_agent(0, (0, 0, math.pi / 2), (0, 10))
        c = velocity_to_control(agent, np.array([0.0, 1.5]))
        assert c.u1 == pytest.approx(1.5) and c.u2 == pytest.approx(1.5)
