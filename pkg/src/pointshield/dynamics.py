"""Point-robot dynamics on a fixed control grid.

State is planar position, velocity and heading; the two inputs are thrust
along the heading and yaw rate:

    phi' = phi + u2*dt
    v'   = v + u1*(cos phi, sin phi)*dt      (pre-step heading)
    p'   = p + v'*dt                          (post-step velocity)

A hard speed cap keeps the stopping horizon finite: thrust that would push
the speed past ``v_cap`` is scaled back just enough to land on the cap.

The failsafe maneuver is a per-step state machine: yaw toward the direction
of travel at full rate (the last yaw step is partial, so alignment lands
exactly), then brake the aligned velocity to zero (again with an exact final
partial step), then hold zero control.  Every failsafe therefore ends truly
at rest, which is what makes a committed stop plan safe to fall back on.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

# Below this speed the robot counts as at rest and the failsafe holds zero
# control; exact-landing braking leaves |v| many orders below this.
V_REST = 1e-10  # m/s

# Headings closer than this to the travel direction count as aligned.
ALIGN_EPS = 1e-12  # rad


class Control(NamedTuple):
    u1: float  # thrust along heading, m/s^2
    u2: float  # yaw rate, rad/s


ZERO_CONTROL = Control(0.0, 0.0)


@dataclass(frozen=True)
class RobotLimits:
    """Actuation bounds and the speed cap."""

    u1_max: float = 0.05  # m/s^2
    u2_max: float = 1.0   # rad/s
    v_cap: float = 0.1    # m/s


@dataclass(frozen=True)
class TimeGrid:
    """Shield-rate time discretization.

    ``dt`` is the shield step, ``horizon`` the number of shield steps per
    agent action, ``k_failsafe`` the fixed padded length of every stopping
    maneuver (must cover worst-case yaw-around plus braking from the cap).
    """

    dt: float = 0.01       # s
    horizon: int = 10      # shield steps per agent step
    k_failsafe: int = 520  # shield steps

    def min_failsafe_steps(self, limits: RobotLimits) -> int:
        """Worst-case rotate+brake step count for states within limits."""
        rot = math.ceil(math.pi / (limits.u2_max * self.dt))
        brake = math.ceil(limits.v_cap / (limits.u1_max * self.dt))
        return rot + brake + 3  # slack for the exact-landing partial steps


DEFAULT_LIMITS = RobotLimits()
DEFAULT_GRID = TimeGrid()


@dataclass
class RobotState:
    p: np.ndarray   # position, m
    v: np.ndarray   # velocity, m/s
    phi: float      # heading, rad, in (-pi, pi]

    def __post_init__(self) -> None:
        self.p = np.asarray(self.p, dtype=np.float64).reshape(2)
        self.v = np.asarray(self.v, dtype=np.float64).reshape(2)
        self.phi = float(self.phi)

    @property
    def speed(self) -> float:
        return math.sqrt(float(self.v[0] * self.v[0] + self.v[1] * self.v[1]))

    def copy(self) -> "RobotState":
        return RobotState(self.p.copy(), self.v.copy(), self.phi)


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    w = a - math.tau * math.floor(a / math.tau + 0.5)
    if w <= -math.pi:
        w += math.tau
    elif w > math.pi:
        w -= math.tau
    return w


def heading_vec(phi: float) -> np.ndarray:
    return np.array([math.cos(phi), math.sin(phi)])


def step(s: RobotState, u: Control, dt: float, limits: RobotLimits = DEFAULT_LIMITS) -> RobotState:
    """One semi-implicit Euler step with cap-aware thrust clamping."""
    assert abs(u.u1) <= limits.u1_max * (1 + 1e-12), "thrust out of bounds"
    assert abs(u.u2) <= limits.u2_max * (1 + 1e-12), "yaw rate out of bounds"
    phi2 = wrap_angle(s.phi + u.u2 * dt)
    w = u.u1 * dt * heading_vec(s.phi)
    v2 = s.v + w
    vv = float(v2[0] * v2[0] + v2[1] * v2[1])
    cap2 = limits.v_cap * limits.v_cap
    if vv > cap2:
        # scale the thrust impulse so the new speed lands exactly on the cap
        ww = float(w[0] * w[0] + w[1] * w[1])
        vw = float(s.v[0] * w[0] + s.v[1] * w[1])
        disc = vw * vw - ww * (float(s.v[0] * s.v[0] + s.v[1] * s.v[1]) - cap2)
        scale = 0.0
        if ww > 0.0 and disc >= 0.0:
            scale = max(0.0, (-vw + math.sqrt(disc)) / ww)
        v2 = s.v + scale * w
    p2 = s.p + v2 * dt
    return RobotState(p2, v2, phi2)


def failsafe_control(s: RobotState, dt: float, limits: RobotLimits = DEFAULT_LIMITS) -> Control:
    """Stopping-maneuver control law for the current state.

    Yaw toward the direction of travel until exactly aligned, then brake to
    an exact stop; both phases clamp their final step instead of
    bang-banging across the target.
    """
    speed = s.speed
    if speed <= V_REST:
        return ZERO_CONTROL
    travel = math.atan2(s.v[1], s.v[0])
    err = wrap_angle(travel - s.phi)
    if abs(err) > ALIGN_EPS:
        u2 = max(-limits.u2_max, min(limits.u2_max, err / dt))
        return Control(0.0, u2)
    h = heading_vec(s.phi)
    v_par = float(s.v[0] * h[0] + s.v[1] * h[1])
    mag = min(limits.u1_max, abs(v_par) / dt)
    return Control(-math.copysign(mag, v_par), 0.0)


@dataclass
class Trajectory:
    """A rolled-out state sequence on the shield grid.

    ``positions``/``velocities`` have n_steps+1 rows; ``controls`` has
    n_steps rows.  ``kind`` records how the rollout was assembled:

    - ``intended``:   constant action, no stopping tail
    - ``failsafe``:   stopping maneuver only
    - ``shielded``:   one intended step + failsafe tail
    - ``validation``: a full agent step (horizon intended steps) + failsafe
    """

    kind: str
    positions: np.ndarray   # (n+1, 2)
    velocities: np.ndarray  # (n+1, 2)
    headings: np.ndarray    # (n+1,)
    controls: np.ndarray    # (n, 2)

    @property
    def n_steps(self) -> int:
        return len(self.controls)

    def state_at(self, i: int) -> RobotState:
        return RobotState(self.positions[i].copy(), self.velocities[i].copy(), float(self.headings[i]))

    @property
    def states(self) -> Iterator[RobotState]:
        for i in range(self.n_steps + 1):
            yield self.state_at(i)

    @property
    def end_speed(self) -> float:
        vx, vy = self.velocities[-1]
        return math.sqrt(float(vx * vx + vy * vy))


class _Rollout:
    """Mutable accumulator for building trajectories step by step."""

    def __init__(self, s0: RobotState):
        self.pos = [s0.p.copy()]
        self.vel = [s0.v.copy()]
        self.phi = [s0.phi]
        self.ctl: list[tuple[float, float]] = []
        self.state = s0.copy()

    def push(self, u: Control, dt: float, limits: RobotLimits) -> None:
        self.state = step(self.state, u, dt, limits)
        self.pos.append(self.state.p.copy())
        self.vel.append(self.state.v.copy())
        self.phi.append(self.state.phi)
        self.ctl.append((u.u1, u.u2))

    def freeze(self, kind: str) -> Trajectory:
        return Trajectory(
            kind,
            np.array(self.pos),
            np.array(self.vel),
            np.array(self.phi),
            np.array(self.ctl).reshape(-1, 2),
        )


def intended_trajectory(
    s0: RobotState,
    u: Control,
    grid: TimeGrid = DEFAULT_GRID,
    limits: RobotLimits = DEFAULT_LIMITS,
) -> Trajectory:
    """Constant-control rollout over one agent step (``horizon`` shield steps)."""
    roll = _Rollout(s0)
    for _ in range(grid.horizon):
        roll.push(u, grid.dt, limits)
    return roll.freeze("intended")


def _extend_with_failsafe(roll: _Rollout, n_steps: int, grid: TimeGrid, limits: RobotLimits) -> None:
    stopped_at = None
    for k in range(n_steps):
        u = failsafe_control(roll.state, grid.dt, limits)
        roll.push(u, grid.dt, limits)
        if stopped_at is None and roll.state.speed <= V_REST:
            stopped_at = k
    assert roll.state.speed <= V_REST, (
        f"failsafe did not reach rest within {n_steps} steps (speed {roll.state.speed:.3e}); "
        "k_failsafe is too small for the limits"
    )


def failsafe_trajectory(
    s0: RobotState,
    grid: TimeGrid = DEFAULT_GRID,
    limits: RobotLimits = DEFAULT_LIMITS,
) -> Trajectory:
    """Stopping maneuver from ``s0``, padded to exactly ``k_failsafe`` steps."""
    assert s0.speed <= limits.v_cap * (1 + 1e-9), "state exceeds the speed cap"
    roll = _Rollout(s0)
    _extend_with_failsafe(roll, grid.k_failsafe, grid, limits)
    return roll.freeze("failsafe")


def shielded_trajectory(
    s0: RobotState,
    u: Control,
    grid: TimeGrid = DEFAULT_GRID,
    limits: RobotLimits = DEFAULT_LIMITS,
) -> Trajectory:
    """One intended step under ``u`` followed by a full stopping maneuver."""
    roll = _Rollout(s0)
    roll.push(u, grid.dt, limits)
    _extend_with_failsafe(roll, grid.k_failsafe, grid, limits)
    return roll.freeze("shielded")


def validation_trajectory(
    s0: RobotState,
    u: Control,
    grid: TimeGrid = DEFAULT_GRID,
    limits: RobotLimits = DEFAULT_LIMITS,
) -> Trajectory:
    """A whole agent step under ``u`` followed by a full stopping maneuver."""
    roll = _Rollout(s0)
    for _ in range(grid.horizon):
        roll.push(u, grid.dt, limits)
    _extend_with_failsafe(roll, grid.k_failsafe, grid, limits)
    return roll.freeze("validation")


def plan_control_to_point(
    s0: RobotState,
    target,
    grid: TimeGrid = DEFAULT_GRID,
    limits: RobotLimits = DEFAULT_LIMITS,
) -> Control:
    """Constant control that steers toward ``target`` over one agent step.

    One-shot proportional rule: yaw to cancel the bearing error across the
    agent step; thrust to cover the remaining distance under constant
    acceleration, both clamped to the limits.
    """
    target = np.asarray(target, dtype=np.float64).reshape(2)
    rel = target - s0.p
    d = math.sqrt(float(rel[0] * rel[0] + rel[1] * rel[1]))
    t_act = grid.horizon * grid.dt
    if d < 1e-12:
        u2 = 0.0
    else:
        bearing_err = wrap_angle(math.atan2(rel[1], rel[0]) - s0.phi)
        u2 = max(-limits.u2_max, min(limits.u2_max, bearing_err / t_act))
    u1 = 2.0 * (d - s0.speed * t_act) / (t_act * t_act)
    u1 = max(-limits.u1_max, min(limits.u1_max, u1))
    return Control(u1, u2)


def plan_to_point(
    s0: RobotState,
    target,
    grid: TimeGrid = DEFAULT_GRID,
    limits: RobotLimits = DEFAULT_LIMITS,
) -> Trajectory:
    """Validation-shaped rollout of :func:`plan_control_to_point`."""
    return validation_trajectory(s0, plan_control_to_point(s0, target, grid, limits), grid, limits)
