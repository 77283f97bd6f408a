"""Intervention-reducing action filters layered in front of the shield.

Both filters check an agent action for *temporary safety*: the action's
validation trajectory (intended steps followed by a full failsafe) must
verify collision-free.  Unsafe actions are substituted — either by uniform
resampling (`replace_action`) or by planning toward the farthest free point
on the line to the action's predicted endpoint (`project_action`).  The
substitute is advisory: whatever a filter returns, the per-step shield
still verifies it before execution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import Control, RobotLimits, plan_control_to_point
from .geometry import ALPHA_ORIGIN_BLOCKED, free_prefix_alpha_discs

KIND_ORIGINAL = "original"
KIND_REPLACED = "replaced"
KIND_PROJECTED = "projected"
KIND_ZERO = "zero"

ZERO_ACTION = (0.0, 0.0)


@dataclass(frozen=True)
class FilterConfig:
    m_replace: int = 32  # replacement sample budget
    m_project: int = 5  # alpha-halving retries after the first attempt
    epsilon: float = 0.01  # m, expansion slack beyond the terminal ball
    alpha_min: float = 0.5  # lower bound on admissible alpha (backward motion)
    alpha_cap: float = 0.999  # strict upper bound keeping alpha < 1

    def __post_init__(self) -> None:
        assert self.m_replace > 0 and self.m_project > 0
        assert self.epsilon > 0.0 and self.alpha_min > 0.0
        assert 0.0 < self.alpha_cap < 1.0


@dataclass(frozen=True)
class FilterOutcome:
    """What a filter decided for one agent step."""

    action: tuple[float, float]  # normalized action actually recommended
    kind: str  # original | replaced | projected | zero
    alpha_used: float | None = None
    samples_tried: int = 0
    target: np.ndarray | None = None  # intent-line endpoint (projection only)


def action_to_control(action, limits: RobotLimits) -> Control:
    """Map a normalized action in [-1, 1]^2 onto the control bounds."""
    a1 = min(1.0, max(-1.0, float(action[0])))
    a2 = min(1.0, max(-1.0, float(action[1])))
    return Control(a1 * limits.u1_max, a2 * limits.u2_max)


def control_to_action(u: Control, limits: RobotLimits) -> tuple[float, float]:
    return (u.u1 / limits.u1_max, u.u2 / limits.u2_max)


def validate_temporal(verifier, s, action) -> bool:
    """True iff the action's validation trajectory verifies collision-free."""
    u = action_to_control(action, verifier.cfg.limits)
    return verifier.validate_control(s, u)


def replace_action(verifier, s, action, rng, cfg: FilterConfig) -> FilterOutcome:
    """Keep a temporarily safe action; otherwise resample uniformly.

    Draws up to ``m_replace`` actions uniformly from the action box and
    returns the first that validates.  If none does, recommends the zero
    action (coast) and leaves braking to the shield.
    """
    if validate_temporal(verifier, s, action):
        return FilterOutcome(tuple(map(float, action)), KIND_ORIGINAL)
    for i in range(cfg.m_replace):
        # two scalar draws so any backend consumes the stream identically
        candidate = (float(rng.uniform(-1.0, 1.0)), float(rng.uniform(-1.0, 1.0)))
        if validate_temporal(verifier, s, candidate):
            return FilterOutcome(candidate, KIND_REPLACED, samples_tried=i + 1)
    return FilterOutcome(ZERO_ACTION, KIND_ZERO, samples_tried=cfg.m_replace)


def project_action(verifier, s, action, cfg: FilterConfig) -> FilterOutcome:
    """Keep a temporarily safe action; otherwise plan along its intent line.

    The intent line runs from the current position to the rest point the
    unsafe action would have reached.  Every predicted obstacle disc over
    the validation window is expanded by the robot's terminal ball radius
    plus ``epsilon``; the action is replaced by a plan toward the farthest
    point of the line that stays clear of the expanded discs.  If that plan
    fails to validate, the line fraction is halved up to ``m_project``
    times before giving up with the zero action.
    """
    shield_cfg = verifier.cfg
    limits = shield_cfg.limits
    if validate_temporal(verifier, s, action):
        return FilterOutcome(tuple(map(float, action)), KIND_ORIGINAL)

    u_raw = action_to_control(action, limits)
    target = verifier.stop_point(s, u_raw)
    r_terminal = shield_cfg.robot_radius + shield_cfg.zeta
    if float(np.linalg.norm(target - s.p)) < 1e-12:
        # the action barely moves the robot; no usable intent line
        return FilterOutcome(ZERO_ACTION, KIND_ZERO)

    centers, radii = verifier.occupancy_balls()
    r_exp = r_terminal + cfg.epsilon
    alpha_free = free_prefix_alpha_discs(s.p, target, centers, radii + r_exp)
    if alpha_free == ALPHA_ORIGIN_BLOCKED:
        # the robot already sits inside the expanded set; no line exists
        return FilterOutcome(ZERO_ACTION, KIND_ZERO)
    alpha_opt = min(alpha_free, cfg.alpha_cap)  # unbounded prefix caps out
    if alpha_opt < -cfg.alpha_min:
        return FilterOutcome(ZERO_ACTION, KIND_ZERO)

    alpha = alpha_opt
    for attempt in range(1 + cfg.m_project):
        goal = s.p + alpha * (target - s.p)
        u_plan = plan_control_to_point(s, goal, shield_cfg.grid, limits)
        if verifier.validate_control(s, u_plan):
            return FilterOutcome(
                control_to_action(u_plan, limits),
                KIND_PROJECTED,
                alpha_used=alpha,
                samples_tried=attempt + 1,
                target=target,
            )
        alpha *= 0.5
    return FilterOutcome(
        ZERO_ACTION, KIND_ZERO, samples_tried=1 + cfg.m_project
    )
