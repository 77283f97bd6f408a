from __future__ import annotations

import math

import numpy as np
import pytest

from pointshield.dynamics import (
    DEFAULT_GRID,
    DEFAULT_LIMITS,
    Control,
    RobotState,
    heading_vec,
    shielded_trajectory,
    step,
)
from pointshield.geometry import Ball, dist_point_segment
from pointshield.reachability import (
    CircularPath,
    Obstacle,
    TimedOccupancy,
    linearization_error,
    obstacle_occupancy,
    robot_occupancy,
    validate_speed_bound,
)

from oracles import rk4_rollout

ZETA_DEFAULT = linearization_error(DEFAULT_GRID.dt, DEFAULT_LIMITS.u1_max)


def test_linearization_error_frozen_value() -> None:
    assert linearization_error(0.01, 0.05, 1.0) == 6.25e-7
    # scales with the square of the step and inversely with mass
    assert linearization_error(0.02, 0.05, 1.0) == pytest.approx(2.5e-6)
    assert linearization_error(0.01, 0.05, 2.0) == pytest.approx(3.125e-7)


def test_midpoint_deviation_equality_case() -> None:
    # Straight max-thrust from rest: the true path is a parabola-in-time
    # along a line, and the chord midpoint misses it by exactly the bound.
    dt, a = DEFAULT_GRID.dt, DEFAULT_LIMITS.u1_max
    states = rk4_rollout((0, 0), (0, 0), 0.0, a, 0.0, dt, 100)
    p0, pm, p1 = states[0, :2], states[50, :2], states[-1, :2]
    dev = float(np.linalg.norm(0.5 * (p0 + p1) - pm))
    assert dev == pytest.approx(ZETA_DEFAULT, abs=1e-12)


def run_midpoint_bound_fuzz(n_cases: int, seed: int = 21) -> float:
    """Midpoint deviation of the continuous model from its own chord.

    Returns the worst deviation/bound ratio observed (must be <= 1).
    """
    rng = np.random.default_rng(seed)
    dt, lim = DEFAULT_GRID.dt, DEFAULT_LIMITS
    worst = 0.0
    for _ in range(n_cases):
        angle = rng.uniform(-math.pi, math.pi)
        speed = rng.uniform(0, lim.v_cap)
        v = speed * heading_vec(angle)
        phi = rng.uniform(-math.pi, math.pi)
        u1 = rng.uniform(-lim.u1_max, lim.u1_max)
        u2 = rng.uniform(-lim.u2_max, lim.u2_max)
        states = rk4_rollout((0, 0), v, phi, u1, u2, dt, 100)
        p0, pm, p1 = states[0, :2], states[50, :2], states[-1, :2]
        dev = float(np.linalg.norm(0.5 * (p0 + p1) - pm))
        assert dev <= ZETA_DEFAULT + 1e-12, (v, phi, u1, u2, dev)
        worst = max(worst, dev / ZETA_DEFAULT)
    return worst


def test_midpoint_deviation_within_bound_fuzz() -> None:
    worst = run_midpoint_bound_fuzz(2000)
    assert worst <= 1.0 + 1e-9


def test_robot_occupancy_shape_and_radius() -> None:
    s0 = RobotState((0, 0), (0.05, 0.0), 0.0)
    traj = shielded_trajectory(s0, Control(0.05, 0.0))
    occ = robot_occupancy(traj, robot_radius=0.1, zeta=ZETA_DEFAULT)
    assert len(occ) == traj.n_steps
    assert all(o.prim.radius == pytest.approx(0.1 + ZETA_DEFAULT) for o in occ)
    assert [o.k for o in occ] == list(range(traj.n_steps))
    # capsules chain along the trajectory
    for o in occ:
        assert np.array_equal(o.prim.a, traj.positions[o.k])
        assert np.array_equal(o.prim.b, traj.positions[o.k + 1])


def run_robot_occupancy_soundness_fuzz(n_cases: int, seed: int = 22) -> float:
    """Fine-integrated single steps stay inside their occupancy capsule.

    For each fuzzed state/control, integrate the continuous model at dt/100
    and check every sample point lies in the capsule built from the grid
    step.  Returns the worst chord deviation seen (diagnostic).
    """
    rng = np.random.default_rng(seed)
    dt, lim = DEFAULT_GRID.dt, DEFAULT_LIMITS
    robot_r = 0.1
    worst_dev = 0.0
    for _ in range(n_cases):
        angle = rng.uniform(-math.pi, math.pi)
        # keep a thrust quantum below the cap so the grid step and the
        # (cap-free) continuous model see the same control
        speed = rng.uniform(0, lim.v_cap - lim.u1_max * dt)
        v = speed * heading_vec(angle)
        phi = rng.uniform(-math.pi, math.pi)
        u1 = rng.uniform(-lim.u1_max, lim.u1_max)
        u2 = rng.uniform(-lim.u2_max, lim.u2_max)
        s0 = RobotState(rng.uniform(-1, 1, 2), v, phi)
        s1 = step(s0, Control(u1, u2), dt, lim)
        cap_r = robot_r + ZETA_DEFAULT
        fine = rk4_rollout(s0.p, s0.v, s0.phi, u1, u2, dt, 100)[:, :2]
        from pointshield.geometry import Segment

        seg = Segment(s0.p, s1.p)
        devs = [dist_point_segment(p, seg) for p in fine]
        worst_dev = max(worst_dev, max(devs))
        assert max(devs) <= cap_r, (s0, u1, u2, max(devs))
    return worst_dev


def test_robot_occupancy_contains_fine_integration_fuzz() -> None:
    worst = run_robot_occupancy_soundness_fuzz(400)
    # the fine path hugs the chord far inside the capsule: interpolation
    # error plus one-step integrator mismatch, both O(a dt^2)
    assert worst <= ZETA_DEFAULT + DEFAULT_LIMITS.u1_max * DEFAULT_GRID.dt**2


def test_obstacle_occupancy_growth_frozen_case() -> None:
    # moving obstacle, footprint 0.1, bound 0.3 m/s: after a 0.5 s
    # prediction span the last disc has radius 0.1 + 0.3*0.5 = 0.25
    path = CircularPath((1.0, 0.0), 0.0, 0.0, 0.0)  # degenerate orbit: stays put
    ob = Obstacle(radius=0.1, center=(1.0, 0.0), path=path, v_max=0.3)
    occ = obstacle_occupancy(ob, t0=0.0, n_steps=50, dt=0.01)
    assert len(occ) == 50
    last = occ[-1].prim
    assert isinstance(last, Ball)
    assert np.allclose(last.center, (1.0, 0.0))
    assert last.radius == pytest.approx(0.25, abs=1e-12)


def test_obstacle_occupancy_static_has_no_growth() -> None:
    ob = Obstacle(radius=0.2, center=(0.5, -0.5))
    occ = obstacle_occupancy(ob, t0=3.0, n_steps=30, dt=0.01)
    for o in occ:
        assert np.allclose(o.prim.center, (0.5, -0.5))
        assert o.prim.radius == pytest.approx(0.2)


def run_obstacle_soundness_fuzz(n_cases: int, seed: int = 23) -> None:
    """True scripted discs stay inside predicted discs at dt/10 samples."""
    rng = np.random.default_rng(seed)
    dt = DEFAULT_GRID.dt
    for _ in range(n_cases):
        r_orb = rng.uniform(0.1, 0.5)
        omega = rng.uniform(-1.0, 1.0)
        path = CircularPath(tuple(rng.uniform(-1, 1, 2)), r_orb, omega, rng.uniform(0, 2 * math.pi))
        ob = Obstacle(radius=0.1, center=(0, 0), path=path, v_max=path.speed)
        t0 = rng.uniform(0, 10)
        n_steps = int(rng.integers(1, 80))
        occ = obstacle_occupancy(ob, t0, n_steps, dt)
        for o in occ:
            ts = t0 + o.k * dt + np.linspace(0, dt, 11)
            true_pts = ob.positions(ts)
            # the true disc fits inside the predicted disc
            margin = o.prim.radius - ob.radius
            dists = np.linalg.norm(true_pts - o.prim.center, axis=1)
            assert np.all(dists <= margin + 1e-12), (path, t0, o.k)


def test_obstacle_occupancy_sound_fuzz() -> None:
    run_obstacle_soundness_fuzz(60)


def test_all_time_bound() -> None:
    static = Obstacle(radius=0.2, center=(1.0, 2.0))
    b = static.all_time_bound()
    assert np.allclose(b.center, (1.0, 2.0)) and b.radius == pytest.approx(0.2)
    path = CircularPath((0.0, 0.0), 0.4, 0.5, 0.0)
    mover = Obstacle(radius=0.1, center=(0, 0), path=path, v_max=path.speed)
    b = mover.all_time_bound()
    assert b.radius == pytest.approx(0.5)
    ts = np.linspace(0, 40, 2000)
    dists = np.linalg.norm(mover.positions(ts) - b.center, axis=1) + mover.radius
    assert np.all(dists <= b.radius + 1e-12)


def test_validate_speed_bound() -> None:
    path = CircularPath((0, 0), 0.35, 0.05 / 0.35, 0.0)  # 0.05 m/s
    ok = Obstacle(radius=0.1, center=(0, 0), path=path, v_max=0.05)
    validate_speed_bound(ok, duration=20.0, dt=0.01)  # no raise
    lying = Obstacle(radius=0.1, center=(0, 0), path=path, v_max=0.04)
    with pytest.raises(ValueError):
        validate_speed_bound(lying, duration=20.0, dt=0.01)
