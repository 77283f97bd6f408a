"""Per-step safety shield with a committed stopping fallback.

Every shield step builds a candidate plan — one step of the proposed control
followed by a complete stopping maneuver — and verifies its swept occupancy
against every obstacle's predicted occupancy, interval by interval.  If the
candidate verifies, its first step is executed and the plan becomes the new
committed fallback.  If not, the previously committed plan (still valid: it
was verified from its own commit time onward) is advanced by one step
instead, braking the robot to a stop.

Verification ends with a terminal check: the plan's rest position must clear
every obstacle's all-time position bound.  A rest point chosen this way stays
safe indefinitely, which closes the induction — the robot is only ever
committed to plans that end somewhere no obstacle can ever reach.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    DEFAULT_GRID,
    DEFAULT_LIMITS,
    V_REST,
    Control,
    RobotLimits,
    RobotState,
    TimeGrid,
    Trajectory,
    ZERO_CONTROL,
    failsafe_trajectory,
    shielded_trajectory,
    validation_trajectory,
)
from .geometry import Ball, intersects
from .reachability import (
    Obstacle,
    linearization_error,
    obstacle_occupancy,
    robot_occupancy,
)


@dataclass(frozen=True)
class ShieldConfig:
    """Geometry and timing the shield verifies against."""

    robot_radius: float = 0.1  # m
    grid: TimeGrid = field(default_factory=TimeGrid)
    limits: RobotLimits = field(default_factory=RobotLimits)

    @property
    def zeta(self) -> float:
        return linearization_error(self.grid.dt, self.limits.u1_max)


@dataclass(frozen=True)
class Verdict:
    """Outcome of verifying one trajectory.

    ``first_violation`` is the offending step index; ``n_steps`` of the
    trajectory denotes the terminal rest-point check.  ``obstacle_index``
    refers to the obstacle list passed to verify.
    """

    safe: bool
    first_violation: int | None = None
    obstacle_index: int | None = None


SAFE = Verdict(True)


def verify(
    traj: Trajectory,
    obstacles: list[Obstacle],
    t_abs: float,
    cfg: ShieldConfig,
) -> Verdict:
    """Check a trajectory's occupancy against all obstacle predictions.

    Predictions are anchored at ``t_abs`` (the trajectory's start time).
    The check is interval-matched: robot capsule k against obstacle disc k.
    Trajectories that end at rest additionally have their rest position
    checked against each obstacle's all-time bound.
    """
    rocc = robot_occupancy(traj, cfg.robot_radius, cfg.zeta)
    oocc = [obstacle_occupancy(ob, t_abs, traj.n_steps, cfg.grid.dt) for ob in obstacles]
    for k in range(traj.n_steps):
        for j in range(len(obstacles)):
            if intersects(rocc[k].prim, oocc[j][k].prim):
                return Verdict(False, k, j)
    if traj.end_speed <= V_REST:
        rest = Ball(traj.positions[-1], cfg.robot_radius + cfg.zeta)
        for j, ob in enumerate(obstacles):
            if intersects(rest, ob.all_time_bound()):
                return Verdict(False, traj.n_steps, j)
    return SAFE


@dataclass
class ShieldState:
    """Committed fallback plan plus the execution cursor into it."""

    committed: Trajectory
    cursor: int        # next committed step to execute when falling back
    commit_time: float  # absolute time of committed.positions[0]
    engaged: bool      # currently executing the fallback


@dataclass(frozen=True)
class ShieldDecision:
    executed: Control
    proposed_safe: bool
    intervention: bool  # fallback newly engaged at this step


def initial_shield_state(
    s0: RobotState,
    obstacles: list[Obstacle],
    t_abs: float,
    cfg: ShieldConfig,
) -> tuple[ShieldState, Verdict]:
    """Stationary fallback for a robot starting at rest.

    The returned verdict says whether the spawn point is actually safe to
    hold; environments must place the robot so that it is.
    """
    assert s0.speed <= V_REST, "the induction starts from rest"
    plan = failsafe_trajectory(s0, cfg.grid, cfg.limits)
    verdict = verify(plan, obstacles, t_abs, cfg)
    return ShieldState(plan, 0, t_abs, False), verdict


def shield_step(
    st: ShieldState,
    s_now: RobotState,
    proposed: Control,
    obstacles: list[Obstacle],
    t_abs: float,
    cfg: ShieldConfig,
) -> tuple[ShieldState, ShieldDecision]:
    """One shield update: verify the proposed control or fall back.

    Fallback is preemptible — every step re-verifies the current proposal,
    so the shield returns to nominal operation as soon as a proposal
    verifies again.
    """
    candidate = shielded_trajectory(s_now, proposed, cfg.grid, cfg.limits)
    verdict = verify(candidate, obstacles, t_abs, cfg)
    if verdict.safe:
        new_st = ShieldState(candidate, 1, t_abs, False)
        return new_st, ShieldDecision(Control(*candidate.controls[0]), True, False)
    # advance the committed plan; past its end the robot is at rest and
    # holding zero control keeps it there
    if st.cursor < st.committed.n_steps:
        u = Control(*st.committed.controls[st.cursor])
        new_st = ShieldState(st.committed, st.cursor + 1, st.commit_time, True)
    else:
        u = ZERO_CONTROL
        new_st = ShieldState(st.committed, st.cursor, st.commit_time, True)
    return new_st, ShieldDecision(u, False, not st.engaged)


class ReferenceVerifier:
    """Plain-object verification backend for one prediction instant.

    Bundles the obstacle list, absolute time and shield configuration so
    that filters can validate candidate agent steps without caring how the
    checks are carried out.  A faster drop-in with identical semantics
    lives in :mod:`pointshield.engine`.
    """

    def __init__(self, obstacles: list[Obstacle], t_abs: float, cfg: ShieldConfig):
        self.obstacles = obstacles
        self.t_abs = t_abs
        self.cfg = cfg

    def validate_control(self, s_now: RobotState, u: Control) -> bool:
        """Verify a whole agent step of ``u`` plus its stopping tail."""
        traj = validation_trajectory(s_now, u, self.cfg.grid, self.cfg.limits)
        return verify(traj, self.obstacles, self.t_abs, self.cfg).safe

    def stop_point(self, s_now: RobotState, u: Control) -> np.ndarray:
        """Rest position at the end of the validation rollout of ``u``."""
        traj = validation_trajectory(s_now, u, self.cfg.grid, self.cfg.limits)
        return traj.positions[-1].copy()

    def occupancy_balls(self) -> tuple[np.ndarray, np.ndarray]:
        """All predicted obstacle discs over one validation horizon.

        Returns (centers (M, 2), radii (M,)) — the union of every
        obstacle's timed discs, with static obstacles contributing a single
        disc since theirs never grow.
        """
        n = self.cfg.grid.horizon + self.cfg.grid.k_failsafe
        centers: list[np.ndarray] = []
        radii: list[float] = []
        for ob in self.obstacles:
            if ob.path is None:
                centers.append(np.asarray(ob.center, dtype=np.float64))
                radii.append(ob.radius)
                continue
            for item in obstacle_occupancy(ob, self.t_abs, n, self.cfg.grid.dt):
                centers.append(item.prim.center)
                radii.append(item.prim.radius)
        return np.array(centers).reshape(-1, 2), np.array(radii)
