"""Vehicle models, footprints, and collision predicates.

Three nonholonomic models share one oriented-rectangle body:

  diff_drive  controls (u1, u2) = left/right wheel speeds
  dubins      controls (u1, u2) = forward speed, curvature (no reverse)
  truck       diff_drive tractor towing an on-axle hitched trailer,
              controls like diff_drive with a curvature cap

States integrate with a single classical RK4 step per call; headings wrap
to (-pi, pi].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import PolyEnvironment, segments_intersect
from .params import DEFAULTS, Params

MODELS = ("diff_drive", "dubins", "truck")


@dataclass
class ControlInput:
    """Model-specific control pair, see the module docstring."""

    u1: float
    u2: float


@dataclass
class AgentState:
    id: int
    model: str
    pose: np.ndarray  # (x, y, theta)
    goal: np.ndarray
    trailer_angle: float = 0.0
    prev_pos: np.ndarray | None = None
    params: Params = field(default_factory=lambda: DEFAULTS)
    reached: bool = False

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}")
        self.pose = np.asarray(self.pose, dtype=float)
        self.goal = np.asarray(self.goal, dtype=float)
        if self.prev_pos is None:
            self.prev_pos = self.pose[:2].copy()
        else:
            self.prev_pos = np.asarray(self.prev_pos, dtype=float)

    @property
    def position(self) -> np.ndarray:
        return self.pose[:2]

    @property
    def heading(self) -> float:
        return float(self.pose[2])

    def velocity(self, dt: float) -> np.ndarray:
        """Finite-difference velocity over the last frame."""
        return (self.pose[:2] - self.prev_pos) / dt

    def copy(self) -> "AgentState":
        return replace(
            self,
            pose=self.pose.copy(),
            goal=self.goal.copy(),
            prev_pos=self.prev_pos.copy(),
        )


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    elif a > math.pi:
        a -= 2.0 * math.pi
    return a


def clamp_controls(
    state: AgentState, control: ControlInput, prev_speed: float | None = None
) -> tuple[ControlInput, bool]:
    """Clamp a control to the model limits; flags whether anything changed.

    Out-of-limit requests are clamped, not rejected. With a finite a_max and
    a known previous speed the forward speed may change by at most
    a_max per unit time.
    """
    p = state.params
    if state.model == "dubins":
        s = min(max(control.u1, 0.0), p.v_max)
        k = min(max(control.u2, -p.kappa_max_dubins), p.kappa_max_dubins)
        out = ControlInput(s, k)
        return out, (s != control.u1 or k != control.u2)

    width = p.body_width
    v = 0.5 * (control.u1 + control.u2)
    omega = (control.u2 - control.u1) / width
    v_new = min(max(v, -p.v_max), p.v_max)
    omega_cap = p.omega_max
    if state.model == "truck":
        omega_cap = min(omega_cap, p.kappa_max_truck * abs(v_new))
    omega_new = min(max(omega, -omega_cap), omega_cap)
    if prev_speed is not None and math.isfinite(p.a_max):
        lo = prev_speed - p.a_max
        hi = prev_speed + p.a_max
        v_new = min(max(v_new, lo), hi)
    out = ControlInput(v_new - 0.5 * omega_new * width, v_new + 0.5 * omega_new * width)
    changed = abs(v_new - v) > 1e-15 or abs(omega_new - omega) > 1e-15
    return out, changed


def _derivative(model: str, q: np.ndarray, control: ControlInput, p: Params) -> np.ndarray:
    x, y, th, tt = q
    if model == "dubins":
        s, k = control.u1, control.u2
        return np.array([s * math.cos(th), s * math.sin(th), s * k, 0.0])
    v = 0.5 * (control.u1 + control.u2)
    omega = (control.u2 - control.u1) / p.body_width
    d = np.array([v * math.cos(th), v * math.sin(th), omega, 0.0])
    if model == "truck":
        d[3] = (v / p.trailer_length) * math.sin(th - tt)
    return d


def step(state: AgentState, control: ControlInput, dt: float) -> AgentState:
    """Advance one frame with a single RK4 step under constant controls."""
    p = state.params
    q0 = np.array([state.pose[0], state.pose[1], state.pose[2], state.trailer_angle])
    k1 = _derivative(state.model, q0, control, p)
    k2 = _derivative(state.model, q0 + 0.5 * dt * k1, control, p)
    k3 = _derivative(state.model, q0 + 0.5 * dt * k2, control, p)
    k4 = _derivative(state.model, q0 + dt * k3, control, p)
    q = q0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    new = state.copy()
    new.prev_pos = state.pose[:2].copy()
    new.pose = np.array([q[0], q[1], wrap_angle(q[2])])
    new.trailer_angle = wrap_angle(q[3])
    return new


def _rect_corners(center: np.ndarray, heading: float, length: float, width: float) -> np.ndarray:
    c, s = math.cos(heading), math.sin(heading)
    fwd = np.array([c, s])
    left = np.array([-s, c])
    hl, hw = 0.5 * length, 0.5 * width
    return np.array(
        [
            center + hl * fwd + hw * left,
            center - hl * fwd + hw * left,
            center - hl * fwd - hw * left,
            center + hl * fwd - hw * left,
        ]
    )


def footprint(state: AgentState) -> list[np.ndarray]:
    """Oriented rectangle(s) of the body, one per rigid element.

    The body rectangle is centered on the pose with its length along the
    heading. The truck adds a trailer rectangle centered on the trailer
    axle, one trailer length behind the on-axle hitch at the pose point.
    """
    p = state.params
    rects = [_rect_corners(state.position, state.heading, p.body_length, p.body_width)]
    if state.model == "truck":
        tt = state.trailer_angle
        axle = state.position - p.trailer_length * np.array([math.cos(tt), math.sin(tt)])
        rects.append(_rect_corners(axle, tt, p.body_length, p.body_width))
    return rects


def _project_interval(corners: np.ndarray, axis: np.ndarray) -> tuple[float, float]:
    d = corners @ axis
    return float(d.min()), float(d.max())


def _rects_collide(a: np.ndarray, b: np.ndarray) -> bool:
    """Separating-axis test for two convex quadrilaterals.

    Touching boundaries count as a collision, so separation requires a
    strictly positive gap on some axis.
    """
    for rect in (a, b):
        for i in range(4):
            edge = rect[(i + 1) % 4] - rect[i]
            axis = np.array([-edge[1], edge[0]])
            amin, amax = _project_interval(a, axis)
            bmin, bmax = _project_interval(b, axis)
            if amax < bmin or bmax < amin:
                return False
    return True


def collide(a: AgentState, b: AgentState) -> bool:
    """Footprint overlap test between two agents, touching included."""
    ra = a.params.bounding_radius + (a.params.trailer_length + a.params.bounding_radius if a.model == "truck" else 0.0)
    rb = b.params.bounding_radius + (b.params.trailer_length + b.params.bounding_radius if b.model == "truck" else 0.0)
    gap = np.linalg.norm(a.position - b.position)
    if gap > ra + rb:
        return False
    for rect_a in footprint(a):
        for rect_b in footprint(b):
            if _rects_collide(rect_a, rect_b):
                return True
    return False


def _point_in_rect(p: np.ndarray, rect: np.ndarray) -> bool:
    for i in range(4):
        edge = rect[(i + 1) % 4] - rect[i]
        if edge[0] * (p[1] - rect[i][1]) - edge[1] * (p[0] - rect[i][0]) < -1e-12:
            return False
    return True


def collide_env(state: AgentState, env: PolyEnvironment) -> bool:
    """True when the footprint crosses or leaves the freespace boundary."""
    rects = footprint(state)
    for rect in rects:
        if not env.contains_many(rect).all():
            return True
        for i in range(4):
            p1, p2 = rect[i], rect[(i + 1) % 4]
            for q1, q2 in env.segments:
                if segments_intersect(p1, p2, q1, q2):
                    return True
        # A hole swallowed whole leaves no edge crossing behind.
        for hole in env.holes:
            if _point_in_rect(hole[0], rect):
                return True
    return False
