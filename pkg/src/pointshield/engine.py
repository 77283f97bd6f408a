"""Compiled fast path for shield verification and episode stepping.

The pure-Python modules (:mod:`dynamics`, :mod:`reachability`,
:mod:`shield`) define the semantics.  This module re-implements the hot
loops with numba, mirroring the reference floating-point expressions
operation for operation so that both backends produce the same states,
controls and verdicts on the same inputs.  Two deliberate economies keep
the kernels fast without changing results:

- During a failsafe rollout the yaw phase leaves velocity untouched and
  the braking phase leaves heading untouched, so the per-step
  trigonometry of the generic stepper is hoisted out of those loops.
  Whenever the braking state drifts anywhere near the controller's
  alignment branch boundary, the kernel falls back to stepping the
  literal controller so branch decisions can never differ from the
  reference.
- Obstacle checks run through cheap sound prefilters (whole-sweep
  bounding circles, per-phase capsules) and only fall through to exact
  per-interval tests when a prefilter cannot rule out contact.

Scene geometry is pre-baked into flat arrays; moving obstacles get a
table of scripted positions on the shield grid so verification does no
trigonometry for them at all.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .dynamics import ALIGN_EPS, V_REST, Control, RobotState
from .reachability import Obstacle
from .shield import ShieldConfig

# When |sin(heading error)| exceeds this fraction of the speed during
# braking, the rollout switches to the literal per-step controller.  The
# threshold sits an order of magnitude below ALIGN_EPS, so outside the
# fallback the reference controller provably stays in its braking branch.
_BRAKE_GUARD = ALIGN_EPS * 0.1


# ---------------------------------------------------------------------------
# scalar kernels mirroring dynamics.py


@njit(cache=True)
def _wrap(a):
    w = a - math.tau * math.floor(a / math.tau + 0.5)
    if w <= -math.pi:
        w += math.tau
    elif w > math.pi:
        w -= math.tau
    return w


@njit(cache=True)
def _step5(px, py, vx, vy, phi, u1, u2, dt, u1m, u2m, cap):
    phi2 = _wrap(phi + u2 * dt)
    c = math.cos(phi)
    s = math.sin(phi)
    f = u1 * dt
    w0 = f * c
    w1 = f * s
    v2x = vx + w0
    v2y = vy + w1
    vv = v2x * v2x + v2y * v2y
    cap2 = cap * cap
    if vv > cap2:
        ww = w0 * w0 + w1 * w1
        vw = vx * w0 + vy * w1
        disc = vw * vw - ww * ((vx * vx + vy * vy) - cap2)
        scale = 0.0
        if ww > 0.0 and disc >= 0.0:
            sc = (-vw + math.sqrt(disc)) / ww
            if sc > 0.0:
                scale = sc
        v2x = vx + scale * w0
        v2y = vy + scale * w1
    return px + v2x * dt, py + v2y * dt, v2x, v2y, phi2


@njit(cache=True)
def _failsafe_u(vx, vy, phi, dt, u1m, u2m):
    sp = math.sqrt(vx * vx + vy * vy)
    if sp <= V_REST:
        return 0.0, 0.0
    travel = math.atan2(vy, vx)
    err = _wrap(travel - phi)
    if abs(err) > ALIGN_EPS:
        u2 = err / dt
        if u2 > u2m:
            u2 = u2m
        elif u2 < -u2m:
            u2 = -u2m
        return 0.0, u2
    c = math.cos(phi)
    s = math.sin(phi)
    v_par = vx * c + vy * s
    mag = abs(v_par) / dt
    if mag > u1m:
        mag = u1m
    return -math.copysign(mag, v_par), 0.0


@njit(cache=True)
def _roll(px, py, vx, vy, phi, u1, u2, n_lead, n_total, dt, u1m, u2m, cap, pos):
    """Roll a candidate (n_lead action steps + failsafe) into ``pos``.

    Returns (i_align, i_tail, i_rest, at_rest) where states
    [n_lead, i_align] are the straight yaw-phase drift, [i_align, i_tail]
    the straight braking run, [i_tail, i_rest] a literally-stepped tail,
    and positions are constant from i_rest on.  ``at_rest`` reports
    whether the rollout reached standstill within n_total steps.
    """
    pos[0, 0] = px
    pos[0, 1] = py
    k = 0
    while k < n_lead:
        px, py, vx, vy, phi = _step5(px, py, vx, vy, phi, u1, u2, dt, u1m, u2m, cap)
        k += 1
        pos[k, 0] = px
        pos[k, 1] = py

    i_align = k
    i_tail = k
    i_rest = k
    sp = math.sqrt(vx * vx + vy * vy)

    if sp > V_REST:
        # yaw phase: velocity is untouched, the heading turns toward the
        # direction of travel with an exact partial landing step
        travel = math.atan2(vy, vx)
        while k < n_total:
            err = _wrap(travel - phi)
            if abs(err) <= ALIGN_EPS:
                break
            uy = err / dt
            if uy > u2m:
                uy = u2m
            elif uy < -u2m:
                uy = -u2m
            phi = _wrap(phi + uy * dt)
            px = px + vx * dt
            py = py + vy * dt
            k += 1
            pos[k, 0] = px
            pos[k, 1] = py
        i_align = k
        i_tail = k

        # braking phase: heading is untouched, speed steps down to zero
        c = math.cos(phi)
        s = math.sin(phi)
        literal = False
        while k < n_total:
            sp = math.sqrt(vx * vx + vy * vy)
            if sp <= V_REST:
                break
            cross = vy * c - vx * s
            if abs(cross) > sp * _BRAKE_GUARD:
                literal = True
                break
            v_par = vx * c + vy * s
            mag = abs(v_par) / dt
            if mag > u1m:
                mag = u1m
            ub = -math.copysign(mag, v_par)
            f = ub * dt
            w0 = f * c
            w1 = f * s
            v2x = vx + w0
            v2y = vy + w1
            vv = v2x * v2x + v2y * v2y
            cap2 = cap * cap
            if vv > cap2:
                ww = w0 * w0 + w1 * w1
                vw = vx * w0 + vy * w1
                disc = vw * vw - ww * ((vx * vx + vy * vy) - cap2)
                scale = 0.0
                if ww > 0.0 and disc >= 0.0:
                    sc = (-vw + math.sqrt(disc)) / ww
                    if sc > 0.0:
                        scale = sc
                v2x = vx + scale * w0
                v2y = vy + scale * w1
            vx = v2x
            vy = v2y
            px = px + vx * dt
            py = py + vy * dt
            k += 1
            pos[k, 0] = px
            pos[k, 1] = py
        i_tail = k

        if literal:
            # near the alignment boundary: run the exact controller
            while k < n_total:
                sp = math.sqrt(vx * vx + vy * vy)
                if sp <= V_REST:
                    break
                uf1, uf2 = _failsafe_u(vx, vy, phi, dt, u1m, u2m)
                px, py, vx, vy, phi = _step5(
                    px, py, vx, vy, phi, uf1, uf2, dt, u1m, u2m, cap
                )
                k += 1
                pos[k, 0] = px
                pos[k, 1] = py

    i_rest = k
    at_rest = math.sqrt(vx * vx + vy * vy) <= V_REST

    # at standstill the residual velocity is absorbed into the position;
    # once one step leaves the position unchanged, all later ones do too
    while k < n_total:
        px2 = px + vx * dt
        py2 = py + vy * dt
        if px2 == px and py2 == py:
            for j in range(k + 1, n_total + 1):
                pos[j, 0] = px
                pos[j, 1] = py
            k = n_total
            break
        px = px2
        py = py2
        k += 1
        pos[k, 0] = px
        pos[k, 1] = py

    return i_align, i_tail, i_rest, at_rest


# ---------------------------------------------------------------------------
# geometry kernels


@njit(cache=True)
def _seg_dist2(ax, ay, bx, by, px, py):
    abx = bx - ax
    aby = by - ay
    apx = px - ax
    apy = py - ay
    denom = abx * abx + aby * aby
    if denom > 0.0:
        t = (apx * abx + apy * aby) / denom
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
        apx -= t * abx
        apy -= t * aby
    return apx * apx + apy * apy


@njit(cache=True)
def _candidate_safe(pos, i_align, i_tail, i_rest, at_rest, n_lead, n_total,
                    k_anchor, stat, mov, tab, dt, rr):
    """Interval-matched occupancy check of a rolled candidate.

    ``rr`` is the robot radius plus the linearization error.  Static
    obstacles are checked against the phase segments (sound because each
    phase drifts along a straight line); movers go through a
    bounding-circle prefilter and then exact per-interval discs.  The end
    position is checked against every mover's all-time reach.
    """
    rx = pos[n_total, 0]
    ry = pos[n_total, 1]

    for si in range(stat.shape[0]):
        cx = stat[si, 0]
        cy = stat[si, 1]
        rad = stat[si, 2] + rr
        r2 = rad * rad
        for k in range(n_lead):
            if _seg_dist2(pos[k, 0], pos[k, 1], pos[k + 1, 0], pos[k + 1, 1], cx, cy) <= r2:
                return False
        if _seg_dist2(pos[n_lead, 0], pos[n_lead, 1], pos[i_align, 0], pos[i_align, 1], cx, cy) <= r2:
            return False
        if _seg_dist2(pos[i_align, 0], pos[i_align, 1], pos[i_tail, 0], pos[i_tail, 1], cx, cy) <= r2:
            return False
        for k in range(i_tail, i_rest):
            if _seg_dist2(pos[k, 0], pos[k, 1], pos[k + 1, 0], pos[k + 1, 1], cx, cy) <= r2:
                return False
        if _seg_dist2(pos[i_rest, 0], pos[i_rest, 1], rx, ry, cx, cy) <= r2:
            return False

    if mov.shape[0] == 0:
        return True

    xmin = pos[0, 0]
    xmax = xmin
    ymin = pos[0, 1]
    ymax = ymin
    for k in range(1, n_total + 1):
        x = pos[k, 0]
        y = pos[k, 1]
        if x < xmin:
            xmin = x
        elif x > xmax:
            xmax = x
        if y < ymin:
            ymin = y
        elif y > ymax:
            ymax = y
    bcx = 0.5 * (xmin + xmax)
    bcy = 0.5 * (ymin + ymax)
    hx = xmax - bcx
    hy = ymax - bcy
    br = math.sqrt(hx * hx + hy * hy) + rr

    for g in range(mov.shape[0]):
        ax = mov[g, 0]
        ay = mov[g, 1]
        orbit_r = mov[g, 2]
        rg = mov[g, 5]
        vmax = mov[g, 6]
        reach = orbit_r + rg

        if at_rest:
            dxr = rx - ax
            dyr = ry - ay
            lim = reach + rr
            if dxr * dxr + dyr * dyr <= lim * lim:
                return False

        dxb = bcx - ax
        dyb = bcy - ay
        lim = br + reach + vmax * (n_total * dt)
        if dxb * dxb + dyb * dyb > lim * lim:
            continue

        for k in range(n_total):
            cx = tab[g, k_anchor + k, 0]
            cy = tab[g, k_anchor + k, 1]
            rad = rg + vmax * (k + 1) * dt + rr
            if _seg_dist2(pos[k, 0], pos[k, 1], pos[k + 1, 0], pos[k + 1, 1], cx, cy) <= rad * rad:
                return False

    return True


@njit(cache=True)
def _verify(px, py, vx, vy, phi, u1, u2, k_anchor, n_lead, n_total,
            stat, mov, tab, dt, u1m, u2m, cap, rr):
    pos = np.empty((n_total + 1, 2))
    i_align, i_tail, i_rest, at_rest = _roll(
        px, py, vx, vy, phi, u1, u2, n_lead, n_total, dt, u1m, u2m, cap, pos
    )
    if not at_rest:
        return False  # stopping maneuver must end at standstill
    return _candidate_safe(
        pos, i_align, i_tail, i_rest, at_rest, n_lead, n_total,
        k_anchor, stat, mov, tab, dt, rr,
    )


@njit(cache=True)
def _stop_point(px, py, vx, vy, phi, u1, u2, n_lead, n_total, dt, u1m, u2m, cap):
    pos = np.empty((n_total + 1, 2))
    _roll(px, py, vx, vy, phi, u1, u2, n_lead, n_total, dt, u1m, u2m, cap, pos)
    return pos[n_total, 0], pos[n_total, 1]


# ---------------------------------------------------------------------------
# per-agent-step driver with dense contact accounting


@njit(cache=True)
def _dense_checks(out_pos, horizon, k_anchor, stat, mov, tab, dt, robot_r):
    """Count dt/10 sample points in true contact and evaluate the cost flag.

    Contact means the robot disc touches an obstacle footprint.  Cost is 1
    when the robot center enters a hazard or the robot disc touches a
    mover.  Exact segment prefilters skip the sampling loops whenever no
    sample could possibly trigger.
    """
    contacts = 0
    cost = False
    for k in range(horizon):
        axp = out_pos[k, 0]
        ayp = out_pos[k, 1]
        bxp = out_pos[k + 1, 0]
        byp = out_pos[k + 1, 1]
        for si in range(stat.shape[0]):
            cx = stat[si, 0]
            cy = stat[si, 1]
            rs = stat[si, 2]
            d2 = _seg_dist2(axp, ayp, bxp, byp, cx, cy)
            lim = rs + robot_r
            if d2 > lim * lim:
                continue
            for j in range(11):
                lam = j / 10.0
                qx = (1.0 - lam) * axp + lam * bxp
                qy = (1.0 - lam) * ayp + lam * byp
                dx = qx - cx
                dy = qy - cy
                dd = dx * dx + dy * dy
                if dd <= lim * lim:
                    contacts += 1
                if dd <= rs * rs:
                    cost = True
        for g in range(mov.shape[0]):
            orbit_r = mov[g, 2]
            omega = mov[g, 3]
            phase = mov[g, 4]
            rg = mov[g, 5]
            vmax = mov[g, 6]
            cx = tab[g, k_anchor + k, 0]
            cy = tab[g, k_anchor + k, 1]
            lim = rg + robot_r
            pre = lim + vmax * dt
            if _seg_dist2(axp, ayp, bxp, byp, cx, cy) > pre * pre:
                continue
            for j in range(11):
                lam = j / 10.0
                t = (k_anchor + k) * dt + lam * dt
                a = phase + omega * t
                gx = mov[g, 0] + orbit_r * math.cos(a)
                gy = mov[g, 1] + orbit_r * math.sin(a)
                qx = (1.0 - lam) * axp + lam * bxp
                qy = (1.0 - lam) * ayp + lam * byp
                dx = qx - gx
                dy = qy - gy
                if dx * dx + dy * dy <= lim * lim:
                    contacts += 1
                    cost = True
    return contacts, cost


@njit(cache=True)
def _agent_step(px, py, vx, vy, phi, engaged, u1, u2, k_abs, horizon, k_fail,
                stat, mov, tab, dt, u1m, u2m, cap, rr, robot_r, out_pos):
    """Run one agent step: ``horizon`` shield steps plus dense accounting.

    The proposed control is re-verified every shield step; on rejection
    the failsafe controller acts for that step (the robot then sits
    exactly on the previously committed stopping plan, so stepping the
    controller live replays that plan's stored controls).
    """
    out_pos[0, 0] = px
    out_pos[0, 1] = py
    rejected = False
    for i in range(horizon):
        safe = _verify(
            px, py, vx, vy, phi, u1, u2, k_abs + i, 1, 1 + k_fail,
            stat, mov, tab, dt, u1m, u2m, cap, rr,
        )
        if safe:
            e1 = u1
            e2 = u2
            engaged = False
        else:
            e1, e2 = _failsafe_u(vx, vy, phi, dt, u1m, u2m)
            engaged = True
            rejected = True
        px, py, vx, vy, phi = _step5(px, py, vx, vy, phi, e1, e2, dt, u1m, u2m, cap)
        out_pos[i + 1, 0] = px
        out_pos[i + 1, 1] = py
    contacts, cost = _dense_checks(out_pos, horizon, k_abs, stat, mov, tab, dt, robot_r)
    return px, py, vx, vy, phi, engaged, rejected, contacts, cost


@njit(cache=True)
def _occupancy_discs(k_anchor, n_steps, stat, mov, tab, dt, out):
    """Fill ``out`` with (x, y, r) rows for every predicted obstacle disc."""
    m = 0
    for si in range(stat.shape[0]):
        out[m, 0] = stat[si, 0]
        out[m, 1] = stat[si, 1]
        out[m, 2] = stat[si, 2]
        m += 1
    for g in range(mov.shape[0]):
        rg = mov[g, 5]
        vmax = mov[g, 6]
        for k in range(n_steps):
            out[m, 0] = tab[g, k_anchor + k, 0]
            out[m, 1] = tab[g, k_anchor + k, 1]
            out[m, 2] = rg + vmax * (k + 1) * dt
            m += 1
    return m


# ---------------------------------------------------------------------------
# python-facing wrappers


@dataclass
class AgentStepResult:
    state: RobotState
    engaged: bool
    intervened: bool  # any shield step in this agent step was rejected
    contacts: int     # dt/10 sample points in true contact
    cost: int         # 1 if center-in-hazard or mover contact occurred
    positions: np.ndarray  # (horizon + 1, 2) executed dt-grid positions


class EngineBackend:
    """Array-backed drop-in for the reference shield/verification path.

    Built once per episode from the obstacle list; all times are indexed
    by absolute shield-step count so scripted mover positions come from a
    precomputed table.
    """

    def __init__(self, obstacles: list[Obstacle], cfg: ShieldConfig, n_dt_steps: int):
        self.cfg = cfg
        self.obstacles = obstacles
        grid = cfg.grid
        statics = [ob for ob in obstacles if ob.path is None]
        movers = [ob for ob in obstacles if ob.path is not None]
        self.stat = np.array(
            [[ob.center[0], ob.center[1], ob.radius] for ob in statics]
        ).reshape(-1, 3)
        self.mov = np.array(
            [
                [
                    ob.path.anchor[0], ob.path.anchor[1], ob.path.orbit_radius,
                    ob.path.omega, ob.path.phase0, ob.radius, ob.v_max,
                ]
                for ob in movers
            ]
        ).reshape(-1, 7)
        self.n_window = grid.horizon + grid.k_failsafe
        n_table = n_dt_steps + self.n_window + 1
        if movers:
            times = np.arange(n_table) * grid.dt
            self.tab = np.stack([ob.path.at_many(times) for ob in movers])
        else:
            self.tab = np.empty((0, n_table, 2))
        self._n_discs = len(statics) + len(movers) * self.n_window
        self._disc_buf = np.empty((self._n_discs, 3))

    def _params(self):
        cfg = self.cfg
        return (
            cfg.grid.dt, cfg.limits.u1_max, cfg.limits.u2_max, cfg.limits.v_cap,
            cfg.robot_radius + cfg.zeta,
        )

    def verify_shield(self, s: RobotState, u: Control, k_abs: int) -> bool:
        dt, u1m, u2m, cap, rr = self._params()
        return bool(
            _verify(
                s.p[0], s.p[1], s.v[0], s.v[1], s.phi, u.u1, u.u2,
                k_abs, 1, 1 + self.cfg.grid.k_failsafe,
                self.stat, self.mov, self.tab, dt, u1m, u2m, cap, rr,
            )
        )

    def validate_control(self, s: RobotState, u: Control, k_abs: int) -> bool:
        dt, u1m, u2m, cap, rr = self._params()
        return bool(
            _verify(
                s.p[0], s.p[1], s.v[0], s.v[1], s.phi, u.u1, u.u2,
                k_abs, self.cfg.grid.horizon, self.n_window,
                self.stat, self.mov, self.tab, dt, u1m, u2m, cap, rr,
            )
        )

    def stop_point(self, s: RobotState, u: Control) -> np.ndarray:
        dt, u1m, u2m, cap, _ = self._params()
        x, y = _stop_point(
            s.p[0], s.p[1], s.v[0], s.v[1], s.phi, u.u1, u.u2,
            self.cfg.grid.horizon, self.n_window, dt, u1m, u2m, cap,
        )
        return np.array([x, y])

    def occupancy_balls(self, k_abs: int) -> tuple[np.ndarray, np.ndarray]:
        m = _occupancy_discs(
            k_abs, self.n_window, self.stat, self.mov, self.tab,
            self.cfg.grid.dt, self._disc_buf,
        )
        buf = self._disc_buf[:m]
        return buf[:, :2].copy(), buf[:, 2].copy()

    def run_agent_step(
        self, s: RobotState, engaged: bool, u: Control, k_abs: int
    ) -> AgentStepResult:
        dt, u1m, u2m, cap, rr = self._params()
        grid = self.cfg.grid
        out_pos = np.empty((grid.horizon + 1, 2))
        px, py, vx, vy, phi, engaged2, rejected, contacts, cost = _agent_step(
            s.p[0], s.p[1], s.v[0], s.v[1], s.phi, engaged, u.u1, u.u2,
            k_abs, grid.horizon, grid.k_failsafe,
            self.stat, self.mov, self.tab, dt, u1m, u2m, cap, rr,
            self.cfg.robot_radius, out_pos,
        )
        return AgentStepResult(
            RobotState((px, py), (vx, vy), phi),
            bool(engaged2), bool(rejected), int(contacts), int(cost), out_pos,
        )

    def verifier_at(self, k_abs: int) -> "EngineStepVerifier":
        return EngineStepVerifier(self, k_abs)


class EngineStepVerifier:
    """One-instant view of the backend matching the filter protocol."""

    def __init__(self, backend: EngineBackend, k_abs: int):
        self._backend = backend
        self._k_abs = k_abs
        self.cfg = backend.cfg

    def validate_control(self, s: RobotState, u: Control) -> bool:
        return self._backend.validate_control(s, u, self._k_abs)

    def stop_point(self, s: RobotState, u: Control) -> np.ndarray:
        return self._backend.stop_point(s, u)

    def occupancy_balls(self) -> tuple[np.ndarray, np.ndarray]:
        return self._backend.occupancy_balls(self._k_abs)
