"""Set-based occupancy overapproximations on the shield time grid.

Robot side: each trajectory step becomes a capsule around the chord between
consecutive grid positions, inflated by the robot radius plus the chord
interpolation error bound ``a_max * dt^2 / 8`` (the worst midpoint deviation
of any path with acceleration below ``a_max`` from its own chord).

Obstacle side: each grid interval becomes a disc at the obstacle's scripted
position at the interval start, with radius grown by ``v_max`` times the
time since prediction start — a sound cover of every position reachable at
the declared speed bound, re-anchored whenever a new prediction is made.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import Ball, Capsule
from .dynamics import Trajectory


def linearization_error(dt: float, a_max: float, mass: float = 1.0) -> float:
    """Chord-interpolation error bound for one grid step (m)."""
    return a_max * dt * dt / (8.0 * mass)


@dataclass(frozen=True)
class CircularPath:
    """Constant-rate circular motion: anchor + R * e^(i(phase0 + omega t))."""

    anchor: tuple[float, float]
    orbit_radius: float
    omega: float   # rad/s, signed
    phase0: float  # rad

    def at(self, t: float) -> np.ndarray:
        a = self.phase0 + self.omega * t
        return np.array(
            [
                self.anchor[0] + self.orbit_radius * math.cos(a),
                self.anchor[1] + self.orbit_radius * math.sin(a),
            ]
        )

    def at_many(self, t: np.ndarray) -> np.ndarray:
        a = self.phase0 + self.omega * np.asarray(t, dtype=np.float64)
        return np.stack(
            [
                self.anchor[0] + self.orbit_radius * np.cos(a),
                self.anchor[1] + self.orbit_radius * np.sin(a),
            ],
            axis=-1,
        )

    @property
    def speed(self) -> float:
        return abs(self.omega) * self.orbit_radius


@dataclass
class Obstacle:
    """A disc-footprint obstacle, static or moving on a scripted path.

    ``v_max`` is the declared speed bound used by predictions; it must be an
    upper bound on the actual path speed (checked by
    :func:`validate_speed_bound`).  Static obstacles have no path and
    ``v_max`` 0.
    """

    radius: float                     # footprint, m
    center: tuple[float, float]       # static position / ignored when path set
    path: CircularPath | None = None
    v_max: float = 0.0                # m/s

    def position(self, t: float) -> np.ndarray:
        if self.path is not None:
            return self.path.at(t)
        return np.asarray(self.center, dtype=np.float64)

    def positions(self, t: np.ndarray) -> np.ndarray:
        if self.path is not None:
            return self.path.at_many(t)
        return np.broadcast_to(
            np.asarray(self.center, dtype=np.float64), (len(t), 2)
        ).copy()

    def all_time_bound(self) -> Ball:
        """Footprint-inflated ball containing the obstacle for all time.

        This is what makes a stop position safe indefinitely: a rest point
        clear of this ball can never be reached by the obstacle.
        """
        if self.path is None:
            return Ball(self.center, self.radius)
        return Ball(self.path.anchor, self.path.orbit_radius + self.radius)


def validate_speed_bound(ob: Obstacle, duration: float, dt: float) -> None:
    """Check |c(t+h) - c(t)| / h <= v_max over a dense sampling (h = dt/10)."""
    if ob.path is None:
        return
    h = dt / 10.0
    t = np.arange(0.0, duration + h, h)
    pts = ob.positions(t)
    speeds = np.linalg.norm(np.diff(pts, axis=0), axis=1) / h
    worst = float(np.max(speeds)) if len(speeds) else 0.0
    if worst > ob.v_max + 1e-12:
        raise ValueError(f"scripted path speed {worst:.6g} exceeds declared bound {ob.v_max:.6g}")


@dataclass
class TimedOccupancy:
    """A primitive tagged with the grid interval [k*dt, (k+1)*dt] it covers."""

    k: int
    prim: Ball | Capsule


def robot_occupancy(traj: Trajectory, robot_radius: float, zeta: float) -> list[TimedOccupancy]:
    """One capsule per trajectory step, inflated by radius + chord error."""
    r = robot_radius + zeta
    out = []
    for k in range(traj.n_steps):
        out.append(TimedOccupancy(k, Capsule(traj.positions[k], traj.positions[k + 1], r)))
    return out


def obstacle_occupancy(ob: Obstacle, t0: float, n_steps: int, dt: float) -> list[TimedOccupancy]:
    """Predicted occupancy discs for n_steps grid intervals from time t0.

    Interval k spans absolute time [t0 + k*dt, t0 + (k+1)*dt]; its disc is
    centered on the scripted position at the interval start and grown by
    ``v_max`` times the time from prediction start to the interval end.
    """
    times = t0 + dt * np.arange(n_steps)
    centers = ob.positions(times)
    out = []
    for k in range(n_steps):
        grown = ob.radius + ob.v_max * (k + 1) * dt
        out.append(TimedOccupancy(k, Ball(centers[k], grown)))
    return out
