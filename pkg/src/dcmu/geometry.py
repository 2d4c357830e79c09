"""Planar geometric primitives: point-segment projection and clearance queries.

Obstacles are circles (center + radius); the "width" of an obstacle is its
radius.  All distances are meters.  Everything here is a pure function over
small value types, safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class Vec2:
    """Planar vector in meters. Components must be finite."""

    x: float
    y: float

    def __add__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x - other.x, self.y - other.y)

    def __mul__(self, s: float) -> "Vec2":
        return Vec2(self.x * s, self.y * s)

    __rmul__ = __mul__

    def dot(self, other: "Vec2") -> float:
        return self.x * other.x + self.y * other.y

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def dist(self, other: "Vec2") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def as_tuple(self) -> tuple[float, float]:
        return (self.x, self.y)

    def is_finite(self) -> bool:
        return math.isfinite(self.x) and math.isfinite(self.y)


@dataclass(frozen=True)
class Obstacle:
    """Circular obstacle; radius must be positive."""

    center: Vec2
    radius: float

    def __post_init__(self) -> None:
        if not (self.radius > 0.0):
            raise ValueError(f"obstacle radius must be > 0, got {self.radius}")


@dataclass(frozen=True)
class SegmentProjection:
    """Closest point on a segment [a, b] to a query point.

    ``zeta`` parametrizes the point as zeta*a + (1-zeta)*b, clamped to [0, 1];
    zeta = 1 means the closest point is endpoint a.
    """

    closest_point: Vec2
    zeta: float
    distance: float


def project_point_to_segment(p: Vec2, a: Vec2, b: Vec2) -> SegmentProjection:
    """Project p onto the segment [a, b].

    Degenerate segments (a == b) return zeta = 1 with closest point a, so
    coincident endpoints degrade gracefully.
    """
    for v in (p, a, b):
        if not v.is_finite():
            raise ValueError("non-finite input to project_point_to_segment")
    ab = b - a
    denom = ab.dot(ab)
    if denom < 1e-300:
        return SegmentProjection(a, 1.0, p.dist(a))
    # t in [0,1] measured from a toward b; zeta = 1 - t so closest = zeta*a + (1-zeta)*b
    t = (p - a).dot(ab) / denom
    t = min(1.0, max(0.0, t))
    closest = Vec2(a.x + t * ab.x, a.y + t * ab.y)
    return SegmentProjection(closest, 1.0 - t, p.dist(closest))


def nearest_obstacle_to_segment(
    a: Vec2, b: Vec2, obstacles: list[Obstacle]
) -> tuple[int, Vec2, SegmentProjection, float]:
    """Find the obstacle whose boundary is closest to segment [a, b].

    Returns (obstacle index, boundary point x_beta, projection of the center
    onto the segment, signed boundary distance).  The distance is negative
    when the segment penetrates the disk.  Ties break toward the lowest
    obstacle index.
    """
    if not obstacles:
        raise ValueError("obstacle list must be non-empty")
    best_idx = -1
    best_dist = math.inf
    best_proj: SegmentProjection | None = None
    for idx, obs in enumerate(obstacles):
        proj = project_point_to_segment(obs.center, a, b)
        boundary = proj.distance - obs.radius
        if boundary < best_dist:
            best_idx, best_dist, best_proj = idx, boundary, proj
    assert best_proj is not None
    obs = obstacles[best_idx]
    if best_proj.distance > 1e-12:
        u = (best_proj.closest_point - obs.center) * (1.0 / best_proj.distance)
    else:
        # segment passes through the center; any boundary direction works
        u = Vec2(1.0, 0.0)
    x_beta = obs.center + u * obs.radius
    return best_idx, x_beta, best_proj, best_dist


def nearest_collision_point(
    i: int,
    nominals: list[Vec2],
    inflations: list[float],
    obstacles: list[Obstacle],
) -> tuple[Vec2, float, str, int]:
    """Nearest possible collision target for robot i.

    Candidates are every other robot j (point = its nominal position, buffer =
    its inflation s*sqrt(max Sigma eigenvalue)) and every obstacle (point =
    center, buffer = radius).  The winner minimizes ||x_i - point|| - buffer;
    ties break toward robots over obstacles, then lowest index.

    Returns (point x_gamma, buffer b_io, kind "robot"|"obstacle", index).
    """
    xi = nominals[i]
    best: tuple[float, int, int, Vec2, float] | None = None  # (score, kindrank, idx, point, buffer)
    for j, xj in enumerate(nominals):
        if j == i:
            continue
        score = xi.dist(xj) - inflations[j]
        cand = (score, 0, j, xj, inflations[j])
        if best is None or (cand[0], cand[1], cand[2]) < (best[0], best[1], best[2]):
            best = cand
    for k, obs in enumerate(obstacles):
        score = xi.dist(obs.center) - obs.radius
        cand = (score, 1, k, obs.center, obs.radius)
        if best is None or (cand[0], cand[1], cand[2]) < (best[0], best[1], best[2]):
            best = cand
    if best is None:
        raise ValueError("no collision candidates: single robot in an obstacle-free world")
    _, kindrank, idx, point, buffer_ = best
    return point, buffer_, ("robot" if kindrank == 0 else "obstacle"), idx


def segment_intersects_disk(a: Vec2, b: Vec2, obs: Obstacle) -> bool:
    """True when segment [a, b] comes strictly closer to the center than the radius."""
    return project_point_to_segment(obs.center, a, b).distance < obs.radius
