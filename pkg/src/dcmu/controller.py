"""Follower nominal control from the connectivity value function.

The value function V(lambda2) = coth(lambda2 - epsilon) above the
connectivity floor (0 otherwise) has gradient -1/sinh^2(lambda2 - epsilon),
which blows up as lambda2 approaches epsilon; the magnitude is capped at
G_MAX just above the floor since the velocity clamp dominates there anyway.

The nominal control assembles the edge-weight gradients and Fiedler
component differences of the robot's current neighbors:

    u_nom = (1/dt) * (-dV/dlambda2) * sum_j grad_a_ij * (e2_i - e2_j)^2

evaluated at the robot's own decentralized estimate lambda2_tilde, then
clamped per component to the velocity limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import Vec2

G_MAX = 1e6
DELTA_CLAMP = 1e-3


@dataclass(frozen=True)
class NeighborTerm:
    """Per-neighbor data needed by the control sum."""

    neighbor: int
    a_ij: float
    grad_a_wrt_i: Vec2
    e2_j: float


@dataclass(frozen=True)
class ControlReport:
    u_nom: Vec2
    delta_x_nom: Vec2
    value_grad: float
    contributions: tuple[tuple[int, Vec2], ...]


def value_function(lambda2: float, epsilon: float) -> float:
    """V = coth(lambda2 - epsilon) for lambda2 > epsilon, else 0."""
    d = lambda2 - epsilon
    if d <= 0.0:
        return 0.0
    if d < DELTA_CLAMP:
        # coth(d) ~ 1/d; capped consistently with the gradient clamp region
        return min(1.0 / d, G_MAX)
    if d > 20.0:
        return 1.0
    return math.cosh(d) / math.sinh(d)


def value_gradient(lambda2: float, epsilon: float) -> float:
    """dV/dlambda2 = -1/sinh^2(lambda2 - epsilon), clamped to -G_MAX near the floor."""
    d = lambda2 - epsilon
    if d <= 0.0:
        return 0.0
    if d < DELTA_CLAMP:
        return -G_MAX
    sh = math.sinh(d)
    g = -1.0 / (sh * sh)
    return max(g, -G_MAX)


def nominal_control(
    neighbor_terms: list[NeighborTerm],
    e2_own: float,
    lambda2_tilde: float,
    epsilon: float,
    dt: float,
    v_max: float,
) -> ControlReport:
    """Gradient-descent nominal control for one follower.

    Terms for non-neighbors vanish (their edge-weight gradients are zero), so
    callers pass only current neighbors.  When the estimate says the graph is
    at or below the floor the follower holds (zero input).
    """
    dv = value_gradient(lambda2_tilde, epsilon)
    if dv == 0.0:
        return ControlReport(Vec2(0.0, 0.0), Vec2(0.0, 0.0), 0.0, ())
    sx = sy = 0.0
    contribs = []
    for term in neighbor_terms:
        w = (e2_own - term.e2_j) ** 2
        cx = term.grad_a_wrt_i.x * w
        cy = term.grad_a_wrt_i.y * w
        sx += cx
        sy += cy
        contribs.append((term.neighbor, Vec2(cx, cy)))
    delta = Vec2(-dv * sx, -dv * sy)
    u_raw = Vec2(delta.x / dt, delta.y / dt)
    u = Vec2(
        min(v_max, max(-v_max, u_raw.x)),
        min(v_max, max(-v_max, u_raw.y)),
    )
    return ControlReport(u, delta, dv, tuple(contribs))
