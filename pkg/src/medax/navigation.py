"""Local velocity planning.

Each agent picks the admissible velocity closest to its preferred one,
where admissibility is a set of half-plane constraints: reciprocal
avoidance lines against nearby agents and conservative approach limits
against nearby boundary pieces. The solver is a deterministic sequential
linear program over the disc of reachable speeds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .agents import AgentState, ControlInput, clamp_controls
from .geometry import PolyEnvironment, closest_point_on_segment
from .params import DEFAULTS, Params
from .skeleton import SkeletonPath

# Boundary segments are split into pieces no longer than this before
# constraint extraction, so a single long wall yields local constraints.
OBSTACLE_PIECE_LENGTH = 5.0

# Horizon for repaying penetration of the enlarged obstacle margin. Much
# shorter than tau_obstacles: nonholonomic tracking error drifts agents
# into the margin at a roughly constant rate, and the equilibrium depth
# scales with this horizon. The demand is capped below v_max so a wall
# can never make the hard constraint set infeasible on its own.
_RECOVERY_TAU = 0.25

_LP_EPS = 1e-9

# Preferred velocities get a fixed small rotation before solving. Perfectly
# symmetric encounters otherwise produce mirrored constraint sets whose
# solutions cancel each other frame after frame; curvature-limited models
# need a perceptible bias to develop lateral offset before closing in.
_TIEBREAK_ANGLE = 0.05


@dataclass
class Line:
    """Directed line bounding a half-plane; feasible points lie to its left."""

    point: np.ndarray
    direction: np.ndarray


def line_from_halfplane(normal, offset: float) -> Line:
    """Constraint ``normal . v <= offset`` in directed-line form."""
    n = np.asarray(normal, dtype=float)
    return Line(point=offset * n, direction=np.array([-n[1], n[0]]))


def clamp_norm(v, limit: float) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = float(np.linalg.norm(v))
    if n > limit:
        return v * (limit / n)
    return v


def _det(a, b) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def _rotate(v: np.ndarray, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])


def _lp1(lines, lineno, radius, opt, direction_opt, result):
    """Optimize along one line subject to the previous lines and the disc."""
    p = lines[lineno].point
    d = lines[lineno].direction
    dot = float(p @ d)
    disc = dot * dot + radius * radius - float(p @ p)
    if disc < 0.0:
        return False, result
    sqrt_disc = math.sqrt(disc)
    t_left = -dot - sqrt_disc
    t_right = -dot + sqrt_disc

    for i in range(lineno):
        denom = _det(d, lines[i].direction)
        numer = _det(lines[i].direction, p - lines[i].point)
        if abs(denom) <= _LP_EPS:
            if numer < 0.0:
                return False, result
            continue
        t = numer / denom
        if denom >= 0.0:
            t_right = min(t_right, t)
        else:
            t_left = max(t_left, t)
        if t_left > t_right:
            return False, result

    if direction_opt:
        t = t_right if float(opt @ d) > 0.0 else t_left
    else:
        t = min(max(float(d @ (opt - p)), t_left), t_right)
    return True, p + t * d


def _lp2(lines, radius, opt, direction_opt):
    """Sequential 2D program; returns (first failing line index or len, result)."""
    if direction_opt:
        result = opt * radius
    elif float(opt @ opt) > radius * radius:
        result = opt / np.linalg.norm(opt) * radius
    else:
        result = np.array(opt, dtype=float)

    for i, line in enumerate(lines):
        if _det(line.direction, line.point - result) > 0.0:
            ok, new = _lp1(lines, i, radius, opt, direction_opt, result)
            if not ok:
                return i, result
            result = new
    return len(lines), result


def _lp3(lines, num_fixed, begin, radius, result):
    """Infeasible fallback: minimize the worst violation of the soft lines.

    The first num_fixed lines (boundary constraints) stay hard; only the
    reciprocal lines are relaxed.
    """
    distance = 0.0
    for i in range(begin, len(lines)):
        if _det(lines[i].direction, lines[i].point - result) <= distance:
            continue
        proj = list(lines[:num_fixed])
        for j in range(num_fixed, i):
            denom = _det(lines[i].direction, lines[j].direction)
            if abs(denom) <= _LP_EPS:
                if float(lines[i].direction @ lines[j].direction) > 0.0:
                    continue
                point = 0.5 * (lines[i].point + lines[j].point)
            else:
                scale = _det(lines[j].direction, lines[i].point - lines[j].point) / denom
                point = lines[i].point + scale * lines[i].direction
            direction = lines[j].direction - lines[i].direction
            direction = direction / np.linalg.norm(direction)
            proj.append(Line(point, direction))

        perp = np.array([-lines[i].direction[1], lines[i].direction[0]])
        fail, new = _lp2(proj, radius, perp, True)
        if fail >= len(proj):
            result = new
        distance = _det(lines[i].direction, lines[i].point - result)
    return result


def _reciprocal_line(p_i, v_i, p_j, v_j, combined_r, tau, dt) -> Line:
    """Half-plane of velocities that defers half the avoidance effort."""
    rel_pos = p_j - p_i
    rel_vel = v_i - v_j
    dist_sq = float(rel_pos @ rel_pos)
    r_sq = combined_r * combined_r

    if dist_sq > r_sq:
        w = rel_vel - rel_pos / tau
        w_sq = float(w @ w)
        dot1 = float(w @ rel_pos)
        if dot1 < 0.0 and dot1 * dot1 > r_sq * w_sq:
            # Cut-off disc of the truncated cone is the nearest boundary.
            w_len = math.sqrt(w_sq)
            unit_w = w / w_len
            direction = np.array([unit_w[1], -unit_w[0]])
            u = (combined_r / tau - w_len) * unit_w
        else:
            leg = math.sqrt(dist_sq - r_sq)
            if _det(rel_pos, w) > 0.0:
                direction = np.array(
                    [
                        rel_pos[0] * leg - rel_pos[1] * combined_r,
                        rel_pos[0] * combined_r + rel_pos[1] * leg,
                    ]
                ) / dist_sq
            else:
                direction = -np.array(
                    [
                        rel_pos[0] * leg + rel_pos[1] * combined_r,
                        -rel_pos[0] * combined_r + rel_pos[1] * leg,
                    ]
                ) / dist_sq
            u = float(rel_vel @ direction) * direction - rel_vel
    else:
        # Discs already overlap: resolve within one step.
        inv_dt = 1.0 / dt
        w = rel_vel - rel_pos * inv_dt
        w_len = float(np.linalg.norm(w))
        if w_len < 1e-12:
            dist = math.sqrt(dist_sq)
            unit_w = -rel_pos / dist if dist > 1e-12 else np.array([1.0, 0.0])
        else:
            unit_w = w / w_len
        direction = np.array([unit_w[1], -unit_w[0]])
        u = (combined_r * inv_dt - w_len) * unit_w

    return Line(v_i + 0.5 * u, direction)


def _planning_discs(agent: AgentState, dt: float):
    """Disc centers (with center velocities) that jointly cover the body.

    Trucks get a second disc on the trailer; its center velocity is
    approximated by the tractor's, which the tracking margin absorbs.
    """
    v = agent.velocity(dt)
    discs = [(agent.position, v)]
    if agent.model == "truck":
        t = agent.trailer_angle
        hitch = agent.params.trailer_length * np.array([math.cos(t), math.sin(t)])
        discs.append((agent.position - hitch, v))
    return discs


def _chop_boundary(env: PolyEnvironment):
    pieces = []
    for seg in env.segments:
        a, b = seg[0], seg[1]
        n = max(1, math.ceil(np.linalg.norm(b - a) / OBSTACLE_PIECE_LENGTH))
        for k in range(n):
            pieces.append((a + (k / n) * (b - a), a + ((k + 1) / n) * (b - a)))
    arr = np.asarray(pieces)
    return arr, cKDTree(arr.mean(axis=1))


class GrvoPlanner:
    """Velocity solver shared by every agent in one environment."""

    def __init__(self, env: PolyEnvironment, params: Params = DEFAULTS):
        self.params = params
        self._pieces, self._piece_tree = _chop_boundary(env)

    def _obstacle_lines(self, p: np.ndarray, r_enl: float) -> list[Line]:
        dists, idx = self._piece_tree.query(
            p,
            k=self.params.max_obstacle_segments,
            distance_upper_bound=self.params.sensing_radius,
        )
        lines = []
        for d_mid, i in zip(np.atleast_1d(dists), np.atleast_1d(idx)):
            if not np.isfinite(d_mid):
                continue
            c = closest_point_on_segment(p, self._pieces[i, 0], self._pieces[i, 1])
            diff = c - p
            dist = float(np.linalg.norm(diff))
            if dist < 1e-9:
                continue
            gap = dist - r_enl
            if gap >= 0.0:
                offset = gap / self.params.tau_obstacles
            else:
                # Inside the margin the constraint demands an outward
                # velocity component, so tracking drift that eats into
                # the margin gets paid back instead of pooling.
                offset = max(gap / _RECOVERY_TAU, -0.75 * self.params.v_max)
            lines.append(line_from_halfplane(diff / dist, offset))
        return lines

    def admissible_velocity(self, agent: AgentState, neighbors, preferred, dt: float):
        """Closest velocity to ``preferred`` that respects every constraint.

        neighbors: other agents, already filtered for liveness; ordering is
        normalized by id here so callers need not care.
        """
        p = agent.position
        r_enl = self.params.enlarged_radius
        ego_discs = _planning_discs(agent, dt)

        lines = []
        for center, _ in ego_discs:
            lines.extend(self._obstacle_lines(center, r_enl))
        num_fixed = len(lines)

        for other in sorted(neighbors, key=lambda a: a.id):
            if other.id == agent.id:
                continue
            if np.linalg.norm(other.position - p) > self.params.sensing_radius:
                continue
            for oc, ov in _planning_discs(other, dt):
                for ec, ev in ego_discs:
                    lines.append(
                        _reciprocal_line(
                            ec, ev, oc, ov, 2.0 * r_enl, self.params.tau_agents, dt
                        )
                    )

        pref = _rotate(np.asarray(preferred, dtype=float), _TIEBREAK_ANGLE)
        fail, result = _lp2(lines, self.params.v_max, pref, False)
        if fail < len(lines):
            result = _lp3(lines, num_fixed, fail, self.params.v_max, result)
        return result


class ReferenceTrajectory:
    """Progress tracker along a skeleton path.

    Localization searches a bounded window around the last matched segment:
    a few segments backward, a generous stretch forward. That keeps the
    match monotone where the path folds close to itself, while still
    tolerating detours forced by avoidance.
    """

    BACK_WINDOW = 2
    FWD_WINDOW = 25

    def __init__(self, path: SkeletonPath, goal):
        self.path = path
        self.goal = np.asarray(goal, dtype=float)
        self._seg = 0

    @property
    def segment_index(self) -> int:
        return self._seg

    def localize(self, p) -> tuple[int, float]:
        """Nearest (segment index, parameter in [0, 1]) within the window."""
        pts = self.path.positions
        nseg = len(pts) - 1
        if nseg <= 0:
            return 0, 0.0
        lo = max(0, self._seg - self.BACK_WINDOW)
        hi = min(nseg, self._seg + self.FWD_WINDOW)
        a = pts[lo:hi]
        ab = pts[lo + 1 : hi + 1] - a
        denom = np.maximum(np.einsum("ij,ij->i", ab, ab), 1e-18)
        t = np.clip(np.einsum("ij,ij->i", p - a, ab) / denom, 0.0, 1.0)
        closest = a + t[:, None] * ab
        d2 = np.einsum("ij,ij->i", p - closest, p - closest)
        k = int(np.argmin(d2))
        self._seg = lo + k
        return lo + k, float(t[k])


def desired_velocity(agent: AgentState, ref: ReferenceTrajectory, params: Params | None = None):
    """Path-following preferred velocity.

    Full speed along the current segment plus a pull back toward it; once
    the final segment is reached, head straight for the goal so the last
    stretch is not quantized to the grid.
    """
    params = params if params is not None else agent.params
    p = agent.position
    i, _ = ref.localize(p)
    pts = ref.path.positions
    nseg = len(pts) - 1
    if nseg <= 0 or i >= nseg - 1:
        return clamp_norm(ref.goal - p, params.v_max)
    tangent = pts[i + 1] - pts[i]
    tangent = tangent / np.linalg.norm(tangent)
    v = params.w_follow * params.v_max * tangent - params.w_bias * (p - pts[i])
    return clamp_norm(v, params.v_max)


def velocity_to_control(agent: AgentState, v_new) -> ControlInput:
    """Convert a planar velocity command into model controls.

    The command is interpreted at a point center_offset ahead of the axle,
    which makes the map invertible: forward speed from the heading
    component, turn rate from the lateral one. A dubins car cannot realize
    a command pointing sideways or behind it; such commands become a
    forward arc at full lock so the car comes around instead of stalling.
    """
    params = agent.params
    h = np.array([math.cos(agent.heading), math.sin(agent.heading)])
    v = float(v_new @ h)
    omega = float(v_new @ np.array([-h[1], h[0]])) / params.center_offset

    if agent.model == "dubins":
        mag = float(math.hypot(float(v_new[0]), float(v_new[1])))
        if mag <= 1e-9:
            raw = ControlInput(0.0, 0.0)
        elif v > 0.5 * mag:
            raw = ControlInput(v, omega / v)
        else:
            # No reverse gear and no turning in place. Rolling at half the
            # commanded magnitude keeps speed continuous across the branch
            # switch; the heading rate is speed * kappa, so a stopped car
            # would never come around.
            side = 1.0 if omega >= 0.0 else -1.0
            raw = ControlInput(0.5 * mag, side * params.kappa_max_dubins)
    else:
        half = 0.5 * omega * params.body_width
        raw = ControlInput(v - half, v + half)
    return clamp_controls(agent, raw)[0]
