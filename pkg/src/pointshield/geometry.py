"""2D collision primitives for swept-disc safety checking.

Everything is built from two closed convex primitives: discs (``Ball``) and
swept discs (``Capsule``).  Intersection tests reduce to point/segment and
segment/segment distances compared against summed radii, so all predicates
are closed-set: touching counts as intersecting.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Distance comparisons against discretized oracles are accepted inside this
# band; it also pads closed-set predicates against floating-point noise.
BOUNDARY_TOL = 1e-9  # m

# free_prefix_alpha sentinels: the whole ray is clear / the origin itself is
# already inside an obstacle (no free prefix exists at all).
ALPHA_UNBOUNDED = math.inf
ALPHA_ORIGIN_BLOCKED = -1.0


def _as_point(p) -> np.ndarray:
    a = np.asarray(p, dtype=np.float64).reshape(2)
    assert np.all(np.isfinite(a)), "coordinates must be finite"
    return a


@dataclass
class Segment:
    """Closed line segment from ``start`` to ``end`` (may be degenerate)."""

    start: np.ndarray
    end: np.ndarray

    def __post_init__(self) -> None:
        self.start = _as_point(self.start)
        self.end = _as_point(self.end)

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.end - self.start))


@dataclass
class Ball:
    """Closed disc with ``center`` and ``radius`` (m)."""

    center: np.ndarray
    radius: float

    def __post_init__(self) -> None:
        self.center = _as_point(self.center)
        self.radius = float(self.radius)
        assert self.radius >= 0.0, "radius must be non-negative"


@dataclass
class Capsule:
    """Closed swept disc: all points within ``radius`` of segment a-b."""

    a: np.ndarray
    b: np.ndarray
    radius: float

    def __post_init__(self) -> None:
        self.a = _as_point(self.a)
        self.b = _as_point(self.b)
        self.radius = float(self.radius)
        assert self.radius >= 0.0, "radius must be non-negative"

    @property
    def segment(self) -> Segment:
        return Segment(self.a, self.b)


Primitive = Ball | Capsule


def dist_point_segment(p, seg: Segment) -> float:
    """Euclidean distance from point ``p`` to the closed segment ``seg``."""
    p = _as_point(p)
    d = seg.end - seg.start
    dd = float(d @ d)
    if dd == 0.0:  # degenerate segment
        return float(np.linalg.norm(p - seg.start))
    t = float((p - seg.start) @ d) / dd
    t = min(1.0, max(0.0, t))
    return float(np.linalg.norm(seg.start + t * d - p))


def dist_points_segment(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Vectorized ``dist_point_segment`` for an (N, 2) array of points."""
    points = np.asarray(points, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    d = np.asarray(b, dtype=np.float64) - a
    dd = float(d @ d)
    rel = points - a
    if dd == 0.0:
        return np.linalg.norm(rel, axis=-1)
    t = np.clip(rel @ d / dd, 0.0, 1.0)
    closest = a + t[..., None] * d
    return np.linalg.norm(points - closest, axis=-1)


def dist_segment_segment(s1: Segment, s2: Segment) -> float:
    """Minimum distance between two closed segments.

    Standard clamped closest-point computation; degenerate and parallel
    segments fall out of the clamping without special casing beyond the
    zero-length guards.
    """
    p1, q1 = s1.start, s1.end
    p2, q2 = s2.start, s2.end
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = float(d1 @ d1)
    e = float(d2 @ d2)
    f = float(d2 @ r)

    if a == 0.0 and e == 0.0:
        return float(np.linalg.norm(r))
    if a == 0.0:
        t = min(1.0, max(0.0, f / e))
        return float(np.linalg.norm(p1 - (p2 + t * d2)))
    c = float(d1 @ r)
    if e == 0.0:
        s = min(1.0, max(0.0, -c / a))
        return float(np.linalg.norm(p1 + s * d1 - p2))

    b = float(d1 @ d2)
    denom = a * e - b * b
    if denom > 0.0:
        s = min(1.0, max(0.0, (b * f - c * e) / denom))
    else:  # parallel
        s = 0.0
    t = (b * s + f) / e
    if t < 0.0:
        t = 0.0
        s = min(1.0, max(0.0, -c / a))
    elif t > 1.0:
        t = 1.0
        s = min(1.0, max(0.0, (b - c) / a))
    return float(np.linalg.norm(p1 + s * d1 - (p2 + t * d2)))


def signed_clearance(prim: Primitive, p) -> float:
    """Distance from ``p`` to the surface of ``prim``; negative inside."""
    p = _as_point(p)
    if isinstance(prim, Ball):
        return float(np.linalg.norm(p - prim.center)) - prim.radius
    return dist_point_segment(p, prim.segment) - prim.radius


def intersects(a: Primitive, b: Primitive) -> bool:
    """Closed-set intersection test between balls and capsules."""
    rsum = a.radius + b.radius
    if isinstance(a, Ball) and isinstance(b, Ball):
        return float(np.linalg.norm(a.center - b.center)) <= rsum
    if isinstance(a, Ball):
        return dist_point_segment(a.center, b.segment) <= rsum
    if isinstance(b, Ball):
        return dist_point_segment(b.center, a.segment) <= rsum
    return dist_segment_segment(a.segment, b.segment) <= rsum


def expand(prim: Primitive, margin: float):
    """Grow a primitive by ``margin`` (Minkowski sum with a disc)."""
    assert margin >= 0.0, "margin must be non-negative"
    if isinstance(prim, Ball):
        return Ball(prim.center, prim.radius + margin)
    return Capsule(prim.a, prim.b, prim.radius + margin)


def _ray_ball_entry(o: np.ndarray, d: np.ndarray, ball: Ball) -> float:
    """Smallest t >= 0 with |o + t*d - c| = r, or inf if the ray misses.

    Assumes the origin is outside the ball; ``d`` need not be unit length
    (t is measured in units of |d|).
    """
    oc = o - ball.center
    a = float(d @ d)
    if a == 0.0:
        return math.inf
    b = 2.0 * float(oc @ d)
    c = float(oc @ oc) - ball.radius * ball.radius
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return math.inf
    sq = math.sqrt(disc)
    t0 = (-b - sq) / (2.0 * a)
    if t0 >= 0.0:
        return t0
    t1 = (-b + sq) / (2.0 * a)
    if t1 >= 0.0:
        return 0.0  # origin numerically inside; callers screen this earlier
    return math.inf


def _ray_capsule_entry(o: np.ndarray, d: np.ndarray, cap: Capsule) -> float:
    """Smallest t >= 0 where the ray first touches the capsule surface."""
    best = min(
        _ray_ball_entry(o, d, Ball(cap.a, cap.radius)),
        _ray_ball_entry(o, d, Ball(cap.b, cap.radius)),
    )
    # Side walls: distance-to-spine-line == radius with foot inside [0, 1].
    axis = cap.b - cap.a
    aa = float(axis @ axis)
    if aa > 0.0:
        n = np.array([-axis[1], axis[0]]) / math.sqrt(aa)
        h0 = float((o - cap.a) @ n)
        dh = float(d @ n)
        for target in (cap.radius, -cap.radius):
            if dh == 0.0:
                continue
            t = (target - h0) / dh
            if 0.0 <= t < best:
                foot = float((o + t * d - cap.a) @ axis) / aa
                if 0.0 <= foot <= 1.0:
                    best = t
    return best


def free_prefix_alpha(origin, target, obstacles: list) -> float:
    """Largest alpha >= 0 with {origin + t*(target-origin), t in [0, alpha]}
    disjoint from every obstacle.

    Returns ``ALPHA_UNBOUNDED`` (inf) when the whole forward ray is clear and
    ``ALPHA_ORIGIN_BLOCKED`` (-1.0) when the origin itself already lies in an
    obstacle (closed-set: on the surface counts as blocked).
    """
    o = _as_point(origin)
    t = _as_point(target)
    d = t - o
    for ob in obstacles:
        if signed_clearance(ob, o) <= 0.0:
            return ALPHA_ORIGIN_BLOCKED
    best = math.inf
    for ob in obstacles:
        if isinstance(ob, Ball):
            entry = _ray_ball_entry(o, d, ob)
        else:
            entry = _ray_capsule_entry(o, d, ob)
        best = min(best, entry)
    return best if math.isfinite(best) else ALPHA_UNBOUNDED


def free_prefix_alpha_discs(
    origin, target, centers: np.ndarray, radii: np.ndarray
) -> float:
    """Vectorized :func:`free_prefix_alpha` against disc obstacles only.

    ``centers`` is (M, 2) and ``radii`` (M,); semantics and sentinels match
    the list-based version exactly — this is the bulk path for callers that
    already hold their obstacle set as flat arrays.
    """
    o = _as_point(origin)
    t = _as_point(target)
    if len(centers) == 0:
        return ALPHA_UNBOUNDED
    oc = o - centers
    d2 = oc[:, 0] * oc[:, 0] + oc[:, 1] * oc[:, 1]
    if np.any(np.sqrt(d2) - radii <= 0.0):
        return ALPHA_ORIGIN_BLOCKED
    d = t - o
    a = float(d @ d)
    if a == 0.0:
        return ALPHA_UNBOUNDED
    b = 2.0 * (oc @ d)
    c = d2 - radii * radii
    disc = b * b - 4.0 * a * c
    entries = np.full(len(centers), math.inf)
    hit = disc >= 0.0
    if np.any(hit):
        sq = np.sqrt(disc[hit])
        bh = b[hit]
        t0 = (-bh - sq) / (2.0 * a)
        t1 = (-bh + sq) / (2.0 * a)
        vals = np.where(t0 >= 0.0, t0, np.where(t1 >= 0.0, 0.0, math.inf))
        entries[hit] = vals
    best = float(np.min(entries))
    return best if math.isfinite(best) else ALPHA_UNBOUNDED


def ball_overapprox(prims: list) -> Ball:
    """Bounding ball of a non-empty list of balls/capsules.

    The center is the midpoint of the two farthest primitive centers
    (capsule endpoints count as centers); the radius is the actual maximum
    reach from that midpoint, so containment holds for any input layout.
    The result is not required to be minimal.
    """
    assert prims, "need at least one primitive"
    centers: list[np.ndarray] = []
    radii: list[float] = []
    for p in prims:
        if isinstance(p, Ball):
            centers.append(p.center)
            radii.append(p.radius)
        else:  # a capsule is the hull of its two end discs
            centers.append(p.a)
            radii.append(p.radius)
            centers.append(p.b)
            radii.append(p.radius)
    pts = np.array(centers)
    rr = np.array(radii)
    if len(pts) == 1:
        return Ball(pts[0], float(rr[0]))
    diff = pts[:, None, :] - pts[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    i, j = np.unravel_index(int(np.argmax(d2)), d2.shape)
    mid = 0.5 * (pts[i] + pts[j])
    reach = np.linalg.norm(pts - mid, axis=1) + rr
    return Ball(mid, float(np.max(reach)))
