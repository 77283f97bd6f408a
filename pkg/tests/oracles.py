"""Independent brute-force oracles used by the test suite.

Each oracle recomputes a quantity the library also computes, but through a
different route (dense sampling, fine integration, or an independently
derived closed form) so that agreement is evidence rather than tautology.
"""
from __future__ import annotations

import math

import numpy as np

# ---------------------------------------------------------------------------
# geometry oracles


def sample_segment(a, b, n: int) -> np.ndarray:
    """n points evenly spaced along segment a-b, endpoints included."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    t = np.linspace(0.0, 1.0, n)
    return a + t[:, None] * (b - a)


def brute_dist_point_segment(p, a, b, n: int = 10_000) -> float:
    """Min distance from p to n sampled points of segment a-b."""
    pts = sample_segment(a, b, n)
    return float(np.min(np.linalg.norm(pts - np.asarray(p, dtype=np.float64), axis=1)))


def exact_dist_point_segment(p, a, b) -> float:
    """Clamped-projection point/segment distance, written independently."""
    p = np.asarray(p, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return float(np.hypot(*(p - a)))
    u = float((p - a) @ ab) / denom
    u = 0.0 if u < 0.0 else (1.0 if u > 1.0 else u)
    return float(np.hypot(*(p - (a + u * ab))))


def exact_dist_points_segment(pts: np.ndarray, a, b) -> np.ndarray:
    """Vectorized variant of :func:`exact_dist_point_segment`."""
    pts = np.asarray(pts, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    ab = np.asarray(b, dtype=np.float64) - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.linalg.norm(pts - a, axis=1)
    u = np.clip((pts - a) @ ab / denom, 0.0, 1.0)
    return np.linalg.norm(pts - (a + u[:, None] * ab), axis=1)


def sampled_dist_segment_segment(a1, b1, a2, b2, n: int = 10_000) -> float:
    """Min distance between segments via sampling one and exact distance to
    the other (resolution ~ (len/n)^2 / (8 d))."""
    pts = sample_segment(a1, b1, n)
    return float(np.min(exact_dist_points_segment(pts, a2, b2)))


def sampling_resolution(seg_len: float, dist: float, n: int) -> float:
    """Upper bound on the sampling error of the segment-sampling oracles."""
    h = seg_len / max(n - 1, 1)
    return h * h / (8.0 * max(dist, h)) + h * 1e-12


def scan_first_entry(origin, direction, clearance_fn, alpha_max: float, n: int = 10_000):
    """First alpha in a dense scan of [0, alpha_max] where clearance <= 0.

    ``clearance_fn`` maps an (N, 2) array of points to signed clearances.
    Returns (alpha_lo, alpha_hit): the last clear sample before the hit and
    the first blocked sample, or (alpha_max, None) if the scan stays clear.
    """
    origin = np.asarray(origin, dtype=np.float64)
    direction = np.asarray(direction, dtype=np.float64)
    alphas = np.linspace(0.0, alpha_max, n)
    pts = origin + alphas[:, None] * direction
    clear = clearance_fn(pts)
    blocked = np.nonzero(clear <= 0.0)[0]
    if len(blocked) == 0:
        return float(alpha_max), None
    k = int(blocked[0])
    lo = alphas[k - 1] if k > 0 else 0.0
    return float(lo), float(alphas[k])


# ---------------------------------------------------------------------------
# dynamics oracle: fine integration of the continuous point-robot model
#
#   phi_dot = u2,  v_dot = u1 * (cos phi, sin phi),  p_dot = v
#
# integrated with classic RK4 at a configurable substep, which is exact to
# machine precision at the scales used in the tests.


def _deriv(state: np.ndarray, u1: float, u2: float) -> np.ndarray:
    px, py, vx, vy, phi = state
    return np.array([vx, vy, u1 * math.cos(phi), u1 * math.sin(phi), u2])


def rk4_rollout(p, v, phi, u1: float, u2: float, duration: float, n_sub: int) -> np.ndarray:
    """States of the continuous model at n_sub+1 times spanning [0, duration].

    Returns an (n_sub+1, 5) array of (px, py, vx, vy, phi).
    """
    state = np.array([p[0], p[1], v[0], v[1], phi], dtype=np.float64)
    h = duration / n_sub
    out = np.empty((n_sub + 1, 5))
    out[0] = state
    for i in range(n_sub):
        k1 = _deriv(state, u1, u2)
        k2 = _deriv(state + 0.5 * h * k1, u1, u2)
        k3 = _deriv(state + 0.5 * h * k2, u1, u2)
        k4 = _deriv(state + h * k3, u1, u2)
        state = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[i + 1] = state
    return out
