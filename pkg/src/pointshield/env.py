"""Episodic goal-reaching task wrapped around the safety shield.

An episode lives on a square arena with randomized static hazards and
gremlins (disc obstacles orbiting on scripted circular paths).  The agent
acts once per ``horizon`` shield steps; its action passes through the
selected intervention-reduction filter, then through the shield itself.
Reward is distance progress toward the goal plus a bonus on reaching it
(the goal is then resampled); cost flags agent steps whose densely sampled
motion put the robot center inside a hazard or its disc in contact with a
gremlin.

Two interchangeable execution backends exist: the pure-Python reference
(this module) and the compiled one (:mod:`pointshield.engine`).  They
produce bit-identical episodes; everything observable — layouts, policy
inputs, rewards — is computed here from shared code so the backend choice
can never leak into the random stream.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import math
import numpy as np

from .dynamics import (
    Control,
    RobotState,
    ZERO_CONTROL,
    failsafe_control,
    shielded_trajectory,
    step,
    wrap_angle,
)
from .engine import AgentStepResult, EngineBackend
from .filters import (
    FilterConfig,
    FilterOutcome,
    KIND_ORIGINAL,
    KIND_PROJECTED,
    KIND_REPLACED,
    KIND_ZERO,
    action_to_control,
    project_action,
    replace_action,
)
from .geometry import Ball
from .reachability import CircularPath, Obstacle, validate_speed_bound
from .shield import ReferenceVerifier, ShieldConfig, verify

MODE_BARE = "bare-shield"
MODE_REPLACE = "replace"
MODE_PROJECT = "project"
MODES = (MODE_BARE, MODE_REPLACE, MODE_PROJECT)

BACKEND_ENGINE = "engine"
BACKEND_REFERENCE = "reference"
BACKENDS = (BACKEND_ENGINE, BACKEND_REFERENCE)

MAX_PLACE_TRIES = 200  # rejection-sampling budget per placed entity


class LayoutError(RuntimeError):
    """Raised when rejection sampling cannot place an entity."""


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class EnvConfig:
    """Scene randomization parameters plus the shield/filter settings.

    Ranges are (low, high) for uniform draws.  ``clearance`` separates
    everything from everything at layout time: obstacle surfaces (orbits
    count whole — an orbiting gremlin's reach is its anchor disc), the
    spawned robot disc, and the goal disc.
    """

    arena_half_extent: float = 2.0   # m
    n_hazards: int = 8
    hazard_radius: tuple[float, float] = (0.15, 0.25)  # m
    n_gremlins: int = 4
    gremlin_radius: float = 0.1      # m
    gremlin_speed: tuple[float, float] = (0.02, 0.05)  # m/s
    gremlin_orbit: tuple[float, float] = (0.25, 0.45)  # m
    goal_radius: float = 0.15        # m
    goal_min_dist: float = 0.5       # m, from the robot when (re)sampled
    goal_timeout_steps: int = 250    # agent steps before an unreached goal moves
    clearance: float = 0.1           # m
    episode_steps: int = 1000        # agent steps per episode
    shield: ShieldConfig = field(default_factory=ShieldConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)

    def __post_init__(self) -> None:
        assert self.arena_half_extent > 0 and self.episode_steps > 0
        assert self.n_hazards >= 0 and self.n_gremlins >= 0
        assert self.goal_radius > 0 and self.clearance >= 0

    @classmethod
    def from_dict(cls, d: dict) -> "EnvConfig":
        d = dict(d)
        kwargs = {}
        for key in (
            "arena_half_extent", "n_hazards", "n_gremlins", "gremlin_radius",
            "goal_radius", "goal_min_dist", "goal_timeout_steps", "clearance",
            "episode_steps",
        ):
            if key in d:
                kwargs[key] = d.pop(key)
        for key in ("hazard_radius", "gremlin_speed", "gremlin_orbit"):
            if key in d:
                lo, hi = d.pop(key)
                kwargs[key] = (float(lo), float(hi))
        if "shield" in d:
            sd = d.pop("shield")
            base = ShieldConfig()
            grid = replace(
                base.grid,
                **{k: sd[k] for k in ("dt", "horizon", "k_failsafe") if k in sd},
            )
            limits = replace(
                base.limits,
                **{k: sd[k] for k in ("u1_max", "u2_max", "v_cap") if k in sd},
            )
            kwargs["shield"] = ShieldConfig(
                robot_radius=sd.get("robot_radius", base.robot_radius),
                grid=grid,
                limits=limits,
            )
        if "filter" in d:
            kwargs["filter"] = FilterConfig(**d.pop("filter"))
        if d:
            raise ValueError(f"unknown config keys: {sorted(d)}")
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str | Path) -> "EnvConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise ValueError(f"{path}:{e.lineno}: {e.msg}") from e
        if not isinstance(data, dict):
            raise ValueError(f"{path}: top level must be an object")
        try:
            return cls.from_dict(data)
        except (TypeError, ValueError, KeyError) as e:
            raise ValueError(f"{path}: {e}") from e


# ---------------------------------------------------------------------------
# layout sampling


@dataclass
class Layout:
    half_extent: float
    spawn: RobotState
    goal: Ball
    hazards: list[Obstacle]
    gremlins: list[Obstacle]

    @property
    def obstacles(self) -> list[Obstacle]:
        return self.hazards + self.gremlins


def _surface_distance(p: np.ndarray, ob: Obstacle) -> float:
    """Distance from a point to an obstacle's whole region of influence.

    For gremlins that region is the orbit disc plus footprint (the
    all-time bound), so placements never depend on orbit phase.
    """
    bound = ob.all_time_bound()
    return float(np.linalg.norm(p - np.asarray(bound.center))) - bound.radius


def sample_obstacles(
    cfg: EnvConfig, rng: np.random.Generator
) -> tuple[list[Obstacle], list[Obstacle]]:
    he = cfg.arena_half_extent
    hazards: list[Obstacle] = []
    for _ in range(cfg.n_hazards):
        for _ in range(MAX_PLACE_TRIES):
            r = float(rng.uniform(*cfg.hazard_radius))
            c = rng.uniform(-(he - r), he - r, size=2)
            if all(
                _surface_distance(c, ob) >= r + cfg.clearance for ob in hazards
            ):
                hazards.append(Obstacle(radius=r, center=(float(c[0]), float(c[1]))))
                break
        else:
            raise LayoutError("arena too crowded: could not place a hazard")

    gremlins: list[Obstacle] = []
    for _ in range(cfg.n_gremlins):
        for _ in range(MAX_PLACE_TRIES):
            orbit_r = float(rng.uniform(*cfg.gremlin_orbit))
            speed = float(rng.uniform(*cfg.gremlin_speed))
            phase = float(rng.uniform(-math.pi, math.pi))
            direction = 1.0 if rng.random() < 0.5 else -1.0
            reach = orbit_r + cfg.gremlin_radius
            lo = he - reach
            anchor = rng.uniform(-lo, lo, size=2)
            if all(
                _surface_distance(anchor, ob) >= reach + cfg.clearance
                for ob in hazards + gremlins
            ):
                gremlins.append(
                    Obstacle(
                        radius=cfg.gremlin_radius,
                        center=(float(anchor[0]), float(anchor[1])),
                        path=CircularPath(
                            (float(anchor[0]), float(anchor[1])),
                            orbit_r,
                            direction * speed / orbit_r,
                            phase,
                        ),
                        v_max=speed,
                    )
                )
                break
        else:
            raise LayoutError("arena too crowded: could not place a gremlin")
    return hazards, gremlins


def sample_spawn(
    cfg: EnvConfig,
    rng: np.random.Generator,
    obstacles: list[Obstacle],
    spawn_ok=None,
) -> RobotState:
    """Rest state clear of everything, optionally vetted by the shield.

    ``spawn_ok`` receives the candidate state and may reject it (the
    environment passes the backend's hold-still validation so the shield
    induction starts from a verified plan).
    """
    he = cfg.arena_half_extent
    rr = cfg.shield.robot_radius
    lo = he - rr - cfg.clearance
    for _ in range(MAX_PLACE_TRIES):
        p = rng.uniform(-lo, lo, size=2)
        phi = float(rng.uniform(-math.pi, math.pi))
        if not all(
            _surface_distance(p, ob) >= rr + cfg.clearance for ob in obstacles
        ):
            continue
        s = RobotState((float(p[0]), float(p[1])), (0.0, 0.0), phi)
        if spawn_ok is not None and not spawn_ok(s):
            continue
        return s
    raise LayoutError("arena too crowded: could not place the robot")


def sample_goal(
    cfg: EnvConfig,
    rng: np.random.Generator,
    obstacles: list[Obstacle],
    away_from: np.ndarray,
) -> Ball:
    """Goal disc outside every obstacle's reach and away from the robot."""
    he = cfg.arena_half_extent
    lo = he - cfg.goal_radius
    for _ in range(MAX_PLACE_TRIES):
        g = rng.uniform(-lo, lo, size=2)
        if not all(
            _surface_distance(g, ob) >= cfg.goal_radius + cfg.clearance
            for ob in obstacles
        ):
            continue
        if float(np.linalg.norm(g - away_from)) < cfg.goal_min_dist:
            continue
        return Ball((float(g[0]), float(g[1])), cfg.goal_radius)
    raise LayoutError("arena too crowded: could not place the goal")


# ---------------------------------------------------------------------------
# reference execution backend


class ReferenceBackend:
    """Pure-Python agent-step executor with the engine's interface.

    On rejection it applies the failsafe controller to the live state;
    because the state then sits exactly on the committed stopping plan and
    the controller is deterministic state feedback, this replays the
    committed controls without storing them.
    """

    def __init__(self, obstacles: list[Obstacle], cfg: ShieldConfig):
        self.obstacles = obstacles
        self.cfg = cfg

    def verifier_at(self, k_abs: int) -> ReferenceVerifier:
        return ReferenceVerifier(self.obstacles, k_abs * self.cfg.grid.dt, self.cfg)

    def validate_control(self, s: RobotState, u: Control, k_abs: int) -> bool:
        return self.verifier_at(k_abs).validate_control(s, u)

    def run_agent_step(
        self, s: RobotState, engaged: bool, u: Control, k_abs: int
    ) -> AgentStepResult:
        grid, lim = self.cfg.grid, self.cfg.limits
        positions = np.empty((grid.horizon + 1, 2))
        positions[0] = s.p
        rejected = False
        for i in range(grid.horizon):
            cand = shielded_trajectory(s, u, grid, lim)
            if verify(cand, self.obstacles, (k_abs + i) * grid.dt, self.cfg).safe:
                executed = u
                engaged = False
            else:
                executed = failsafe_control(s, grid.dt, lim)
                engaged = True
                rejected = True
            s = step(s, executed, grid.dt, lim)
            positions[i + 1] = s.p
        contacts, cost = self._dense_checks(positions, k_abs)
        return AgentStepResult(s, engaged, rejected, contacts, cost, positions)

    def _dense_checks(self, positions: np.ndarray, k_abs: int) -> tuple[int, bool]:
        grid = self.cfg.grid
        robot_r = self.cfg.robot_radius
        contacts = 0
        cost = False
        for k in range(grid.horizon):
            a = positions[k]
            b = positions[k + 1]
            for ob in self.obstacles:
                lim = ob.radius + robot_r
                for j in range(11):
                    lam = j / 10.0
                    qx = (1.0 - lam) * a[0] + lam * b[0]
                    qy = (1.0 - lam) * a[1] + lam * b[1]
                    if ob.path is None:
                        cx, cy = ob.center
                    else:
                        t = (k_abs + k) * grid.dt + lam * grid.dt
                        cx, cy = ob.path.at(t)
                    dd = (qx - cx) * (qx - cx) + (qy - cy) * (qy - cy)
                    if dd <= lim * lim:
                        contacts += 1
                        if ob.path is not None:
                            cost = True
                    if ob.path is None and dd <= ob.radius * ob.radius:
                        cost = True
        return contacts, bool(cost)


def make_backend(name: str, obstacles: list[Obstacle], cfg: EnvConfig):
    if name == BACKEND_ENGINE:
        n_dt = cfg.episode_steps * cfg.shield.grid.horizon
        return EngineBackend(obstacles, cfg.shield, n_dt)
    if name == BACKEND_REFERENCE:
        return ReferenceBackend(obstacles, cfg.shield)
    raise ValueError(f"unknown backend {name!r}; expected one of {BACKENDS}")


# ---------------------------------------------------------------------------
# the environment


@dataclass(frozen=True)
class StepRecord:
    """Everything an agent learns from one step."""

    observation: np.ndarray
    reward: float
    cost: int          # 1 if this step's dense sweep hit a hazard/gremlin
    intervention: bool  # shield rejected the plan during this step
    kind: str          # which action actually reached the shield
    done: bool


@dataclass(frozen=True)
class ProjectionEvent:
    """One projected action, kept for post-hoc clearance auditing."""

    k_abs: int
    origin: np.ndarray
    target: np.ndarray
    alpha_used: float


class PointGoalEnv:
    """Goal-reaching episodes over the shield with optional action filters.

    ``reset(seed)`` fully determines the episode layout and all in-episode
    randomness (replacement sampling, goal resampling).  The policy's own
    randomness stays outside.
    """

    def __init__(
        self,
        cfg: EnvConfig | None = None,
        mode: str = MODE_BARE,
        backend: str = BACKEND_ENGINE,
    ):
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
        if backend not in BACKENDS:
            raise ValueError(f"unknown backend {backend!r}; expected one of {BACKENDS}")
        self.cfg = cfg if cfg is not None else EnvConfig()
        self.mode = mode
        self.backend_name = backend
        self.layout: Layout | None = None
        self._done = True

    # -- episode lifecycle

    def reset(self, seed: int) -> np.ndarray:
        cfg = self.cfg
        self._rng = np.random.default_rng(seed)
        hazards, gremlins = sample_obstacles(cfg, self._rng)
        duration = (cfg.episode_steps * cfg.shield.grid.horizon + 1) * cfg.shield.grid.dt
        for ob in gremlins:
            validate_speed_bound(ob, duration, cfg.shield.grid.dt)
        self.backend = make_backend(self.backend_name, hazards + gremlins, cfg)
        spawn = sample_spawn(
            cfg, self._rng, hazards + gremlins,
            spawn_ok=lambda s: self.backend.validate_control(s, ZERO_CONTROL, 0),
        )
        goal = sample_goal(cfg, self._rng, hazards + gremlins, spawn.p)
        self.layout = Layout(cfg.arena_half_extent, spawn, goal, hazards, gremlins)

        self._s = spawn
        self._engaged = False
        self._k = 0          # absolute shield-step index
        self._t = 0          # agent-step index
        self._done = False

        self.return_ = 0.0
        self.cost_total = 0
        self.interventions = 0
        self.replaced = 0
        self.projected = 0
        self.zero_actions = 0
        self.goals_reached = 0
        self.goal_timeouts = 0
        self.contacts_total = 0
        self._steps_since_goal = 0

        n_pos = cfg.episode_steps * cfg.shield.grid.horizon + 1
        self.trace_positions = np.empty((n_pos, 2))
        self.trace_positions[0] = spawn.p
        self.step_flags: list[tuple[int, bool, str]] = []  # (cost, interv, kind)
        self.projection_events: list[ProjectionEvent] = []
        self.goal_history: list[Ball] = [goal]
        return self.observe()

    def observe(self) -> np.ndarray:
        """Exact ego state, goal offset, and per-obstacle relative info."""
        assert self.layout is not None, "reset() first"
        s = self._s
        t_now = self._k * self.cfg.shield.grid.dt
        parts = [
            s.p[0], s.p[1], s.v[0], s.v[1], s.phi,
            self.layout.goal.center[0] - s.p[0],
            self.layout.goal.center[1] - s.p[1],
        ]
        for ob in self.layout.obstacles:
            c = ob.position(t_now)
            parts.extend((c[0] - s.p[0], c[1] - s.p[1], ob.radius, ob.v_max))
        return np.array(parts)

    def _apply_filter(self, action) -> FilterOutcome:
        if self.mode == MODE_BARE:
            a = (float(action[0]), float(action[1]))
            return FilterOutcome(a, KIND_ORIGINAL)
        verifier = self.backend.verifier_at(self._k)
        if self.mode == MODE_REPLACE:
            return replace_action(verifier, self._s, action, self._rng, self.cfg.filter)
        return project_action(verifier, self._s, action, self.cfg.filter)

    def step(self, action) -> StepRecord:
        if self._done:
            raise RuntimeError("episode finished; call reset()")
        cfg = self.cfg
        grid = cfg.shield.grid

        outcome = self._apply_filter(action)
        if outcome.kind == KIND_REPLACED:
            self.replaced += 1
        elif outcome.kind == KIND_PROJECTED:
            self.projected += 1
            self.projection_events.append(
                ProjectionEvent(
                    self._k, self._s.p.copy(), outcome.target.copy(),
                    float(outcome.alpha_used),
                )
            )
        elif outcome.kind == KIND_ZERO:
            self.zero_actions += 1

        u = action_to_control(outcome.action, cfg.shield.limits)
        res = self.backend.run_agent_step(self._s, self._engaged, u, self._k)

        d_prev = float(np.linalg.norm(self._s.p - self.layout.goal.center))
        self._s = res.state
        self._engaged = res.engaged
        lo = self._t * grid.horizon + 1
        self.trace_positions[lo : lo + grid.horizon] = res.positions[1:]
        self._k += grid.horizon
        self._t += 1

        d_now = float(np.linalg.norm(self._s.p - self.layout.goal.center))
        reward = d_prev - d_now
        self._steps_since_goal += 1
        if d_now <= cfg.goal_radius:
            reward += 1.0
            self.goals_reached += 1
            self._steps_since_goal = 0
            self.layout.goal = sample_goal(
                cfg, self._rng, self.layout.obstacles, self._s.p
            )
            self.goal_history.append(self.layout.goal)
        elif self._steps_since_goal >= cfg.goal_timeout_steps:
            # a scripted policy can wedge against a hazard forever; move the
            # goal so the episode keeps exercising the shield elsewhere
            self.goal_timeouts += 1
            self._steps_since_goal = 0
            self.layout.goal = sample_goal(
                cfg, self._rng, self.layout.obstacles, self._s.p
            )
            self.goal_history.append(self.layout.goal)

        self.return_ += reward
        self.cost_total += int(res.cost)
        self.interventions += int(res.intervened)
        self.contacts_total += res.contacts
        self.step_flags.append((int(res.cost), bool(res.intervened), outcome.kind))
        self._done = self._t >= cfg.episode_steps
        return StepRecord(
            self.observe(), reward, int(res.cost), bool(res.intervened),
            outcome.kind, self._done,
        )


# ---------------------------------------------------------------------------
# scripted policies

GOAL_SEEK_CRUISE = 0.08  # m/s, below the cap so the shield rarely has to act


def policy_goal_seek(obs: np.ndarray) -> tuple[float, float]:
    """Proportional bearing controller with an approach-speed governor.

    Steers by velocity error: the desired velocity points at the goal with
    a speed tapered on approach, and the thruster is aimed at whatever
    velocity change is still needed.  Chasing the goal bearing directly
    would orbit instead of converge — near the speed cap the velocity
    vector turns far slower than the heading can.
    """
    vx, vy, phi = float(obs[2]), float(obs[3]), float(obs[4])
    gdx, gdy = float(obs[5]), float(obs[6])
    dist = math.sqrt(gdx * gdx + gdy * gdy)
    v_des = min(GOAL_SEEK_CRUISE, 0.5 * dist)
    ex = v_des * (gdx / dist) - vx if dist > 1e-12 else -vx
    ey = v_des * (gdy / dist) - vy if dist > 1e-12 else -vy
    emag = math.sqrt(ex * ex + ey * ey)
    if emag < 1e-9:
        return 0.0, 0.0
    herr = wrap_angle(math.atan2(ey, ex) - phi)
    a2 = min(1.0, max(-1.0, 4.0 * herr))
    # full thrust changes speed by u1_max * horizon * dt = 5 mm/s per step;
    # reverse thrust serves when the error points behind the heading
    a1 = min(1.0, max(-1.0, emag * math.cos(herr) / 0.005))
    return a1, a2


def policy_random(rng: np.random.Generator) -> tuple[float, float]:
    """Uniform action on the unit box; two scalar draws per call."""
    return float(rng.uniform(-1.0, 1.0)), float(rng.uniform(-1.0, 1.0))
