from __future__ import annotations

import math

import numpy as np

from pointshield.dynamics import RobotState, shielded_trajectory, step
from pointshield.filters import (
    FilterConfig,
    KIND_ORIGINAL,
    KIND_PROJECTED,
    KIND_REPLACED,
    KIND_ZERO,
    action_to_control,
    project_action,
    replace_action,
    validate_temporal,
)
from pointshield.reachability import Obstacle
from pointshield.shield import ReferenceVerifier, ShieldConfig, verify

CFG = ShieldConfig()
FCFG = FilterConfig()


def make_verifier(obstacles, t_abs: float = 0.0) -> ReferenceVerifier:
    return ReferenceVerifier(obstacles, t_abs, CFG)


def moving_east(speed: float, x: float = 0.0, y: float = 0.0) -> RobotState:
    return RobotState((x, y), (speed, 0.0), 0.0)


def hazard(x: float, y: float, r: float = 0.2) -> Obstacle:
    return Obstacle(radius=r, center=(x, y))


def test_free_space_keeps_the_action() -> None:
    v = make_verifier([hazard(5.0, 5.0)])
    s = moving_east(CFG.limits.v_cap)
    rng = np.random.default_rng(0)
    assert validate_temporal(v, s, (1.0, 0.0))
    out = replace_action(v, s, (1.0, 0.0), rng, FCFG)
    assert out.kind == KIND_ORIGINAL and out.samples_tried == 0
    assert out.action == (1.0, 0.0)
    out = project_action(v, s, (1.0, 0.0), FCFG)
    assert out.kind == KIND_ORIGINAL and out.alpha_used is None


def test_unsafe_action_can_still_be_shield_safe() -> None:
    # scan hazard offsets for the window where the full agent step fails
    # validation but a single shielded step still verifies
    s = moving_east(CFG.limits.v_cap)
    u = action_to_control((1.0, 0.0), CFG.limits)
    found = None
    for xc in np.arange(0.36, 0.48, 0.001):
        v = make_verifier([hazard(float(xc), 0.0)])
        temporal = validate_temporal(v, s, (1.0, 0.0))
        one_step = verify(
            shielded_trajectory(s, u, CFG.grid, CFG.limits),
            v.obstacles,
            0.0,
            CFG,
        ).safe
        if not temporal and one_step:
            found = float(xc)
            break
    assert found is not None


def test_replacement_finds_a_braking_action() -> None:
    # cruising at a hazard: full thrust fails validation, but gentler
    # actions validate, so resampling succeeds
    s = moving_east(0.05)
    v = make_verifier([hazard(0.332, 0.0)])
    assert not validate_temporal(v, s, (1.0, 0.0))
    rng = np.random.default_rng(7)
    out = replace_action(v, s, (1.0, 0.0), rng, FCFG)
    assert out.kind == KIND_REPLACED
    assert 1 <= out.samples_tried <= FCFG.m_replace
    assert validate_temporal(v, s, out.action)
    # determinism: a fresh generator with the same seed reproduces it
    out2 = replace_action(v, s, (1.0, 0.0), np.random.default_rng(7), FCFG)
    assert out == out2


def test_enclosed_robot_falls_back_to_zero() -> None:
    # ring of hazards closer than any stopping distance: nothing validates
    s = moving_east(CFG.limits.v_cap)
    ring = [
        hazard(0.36 * math.cos(a), 0.36 * math.sin(a))
        for a in np.linspace(0.0, 2.0 * math.pi, 12, endpoint=False)
    ]
    v = make_verifier(ring)
    out = replace_action(v, s, (1.0, 0.0), np.random.default_rng(3), FCFG)
    assert out.kind == KIND_ZERO
    assert out.samples_tried == FCFG.m_replace
    assert out.action == (0.0, 0.0)


def find_projected_case() -> tuple[RobotState, ReferenceVerifier, object]:
    """Scan hazard offsets for a scene where projection succeeds."""
    s = moving_east(0.05)
    for xc in np.arange(0.315, 0.42, 0.001):
        v = make_verifier([hazard(float(xc), 0.0)])
        out = project_action(v, s, (1.0, 0.0), FCFG)
        if out.kind == KIND_PROJECTED:
            return s, v, out
    raise AssertionError("no hazard offset produced a projected outcome")


def test_projection_plans_a_shorter_step() -> None:
    s, v, out = find_projected_case()
    assert out.alpha_used is not None
    assert 0.0 < out.alpha_used <= FCFG.alpha_cap
    assert validate_temporal(v, s, out.action)
    # determinism
    again = project_action(v, s, (1.0, 0.0), FCFG)
    assert again == out


def test_projected_segment_clears_unexpanded_occupancy() -> None:
    s, v, out = find_projected_case()
    u_raw = action_to_control((1.0, 0.0), CFG.limits)
    target = v.stop_point(s, u_raw)
    r_terminal = CFG.robot_radius + CFG.zeta
    centers, radii = v.occupancy_balls()
    for lam in np.linspace(0.0, out.alpha_used, 256):
        g = s.p + lam * (target - s.p)
        gaps = np.linalg.norm(centers - g, axis=1) - radii - r_terminal
        assert gaps.min() >= FCFG.epsilon - 1e-6


def test_projected_execution_touches_nothing() -> None:
    s, v, out = find_projected_case()
    u = action_to_control(out.action, CFG.limits)
    state = s
    for _ in range(CFG.grid.horizon):
        prev = state
        state = step(state, u, CFG.grid.dt, CFG.limits)
        for lam in np.linspace(0.0, 1.0, 11):
            p = (1 - lam) * prev.p + lam * state.p
            for ob in v.obstacles:
                gap = np.linalg.norm(p - np.asarray(ob.center)) - CFG.robot_radius - ob.radius
                assert gap > 0.0


def test_projection_inside_expanded_set_gives_zero() -> None:
    # true clearance exists, but the expanded discs already cover the robot
    s = moving_east(0.05, x=0.0)
    v = make_verifier([hazard(0.305, 0.0)])
    assert not validate_temporal(v, s, (1.0, 0.0))
    out = project_action(v, s, (1.0, 0.0), FCFG)
    assert out.kind == KIND_ZERO
    assert out.action == (0.0, 0.0)


def test_original_kind_tracks_validation_exactly() -> None:
    rng = np.random.default_rng(11)
    fuzz_rng = np.random.default_rng(12)
    for _ in range(25):
        obstacles = [
            hazard(*rng.uniform(-0.8, 0.8, 2), r=float(rng.uniform(0.1, 0.25)))
            for _ in range(int(rng.integers(1, 4)))
        ]
        v = make_verifier(obstacles, t_abs=float(rng.uniform(0.0, 3.0)))
        speed = float(rng.uniform(0.0, CFG.limits.v_cap))
        s = RobotState(
            rng.uniform(-0.5, 0.5, 2), (speed, 0.0), rng.uniform(-math.pi, math.pi)
        )
        a = tuple(rng.uniform(-1.0, 1.0, 2))
        ok = validate_temporal(v, s, a)
        out_r = replace_action(v, s, a, fuzz_rng, FCFG)
        out_p = project_action(v, s, a, FCFG)
        assert (out_r.kind == KIND_ORIGINAL) == ok
        assert (out_p.kind == KIND_ORIGINAL) == ok
