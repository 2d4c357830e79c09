"""Uncertainty-aware weighted graph over robot nominal positions.

Edge weights are a product of four smooth [0, 1] factors:

    a_ij = alpha_ij * beta_ij * gamma_i * gamma_j

where alpha tapers with a conservative inter-robot range, beta with the
clearance between the line-of-sight segment and the nearest obstacle, and
gamma_i / gamma_j with each robot's distance to its nearest possible
collision point.  Every conservative measure inflates (or deflates) a
Euclidean distance by s * sqrt(largest Sigma eigenvalue) per robot involved.

The analytic gradient of a_ij with respect to robot i's nominal position is
the product rule over the four factors.  Gradients of the Sigma eigenvalues
with respect to nominal positions are identically zero (the covariance
recursion never reads positions), so those terms are dropped throughout.

This module also provides the Laplacian, a deterministic Fiedler oracle, and
the ground-truth binary connectivity graph evaluated on actual positions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .eigen import jacobi_eigh
from .geometry import (
    Obstacle,
    SegmentProjection,
    Vec2,
    nearest_collision_point,
    nearest_obstacle_to_segment,
    project_point_to_segment,
    segment_intersects_disk,
)

COINCIDENT_EPS = 1e-9
DEGENERATE_GAP = 1e-8


@dataclass(frozen=True)
class GraphParams:
    """Weighted-graph and connectivity parameters (distances in meters)."""

    rho: float = 20.0
    rho0: float = 18.0
    d_beta_min: float = 1.0
    d_beta_max: float = 3.0
    d_gamma_min: float = 1.0
    d_gamma_max: float = 3.0
    s: float = 3.494
    epsilon: float = 0.01
    collision_radius: float = 0.5

    def __post_init__(self) -> None:
        if not (0.0 < self.rho0 < self.rho):
            raise ValueError("rho0 must satisfy 0 < rho0 < rho")
        if not (0.0 < self.d_beta_min < self.d_beta_max):
            raise ValueError("d_beta bounds must satisfy 0 < min < max")
        if not (0.0 < self.d_gamma_min < self.d_gamma_max):
            raise ValueError("d_gamma bounds must satisfy 0 < min < max")
        if self.s < 0.0:
            raise ValueError("s must be >= 0")
        if not self.epsilon > 0.0:
            raise ValueError("epsilon must be > 0")
        if not self.collision_radius > 0.0:
            raise ValueError("collision_radius must be > 0")


@dataclass(frozen=True)
class WeightedEdge:
    alpha: float
    beta: float
    gamma_i: float
    gamma_j: float
    a: float
    grad_a_wrt_i: Vec2


@dataclass(frozen=True)
class GraphSnapshot:
    n: int
    A: np.ndarray
    L: np.ndarray
    lambda2: float
    fiedler: np.ndarray
    degenerate_fiedler: bool


@dataclass(frozen=True)
class LosClearance:
    distance: float
    zeta: float | None
    x_beta: Vec2 | None
    x_l: Vec2 | None


@dataclass(frozen=True)
class CollisionClearance:
    distance: float
    x_gamma: Vec2 | None
    b_io: float
    kind: str  # "robot" | "obstacle" | "none"
    index: int


def conservative_range(x_i: Vec2, x_j: Vec2, eig_i: float, eig_j: float, s: float) -> float:
    """l_bar_ij = ||x_i - x_j|| + s sqrt(eig_i) + s sqrt(eig_j)."""
    if eig_i < 0 or eig_j < 0:
        raise ValueError("Sigma eigenvalues must be >= 0")
    return x_i.dist(x_j) + s * math.sqrt(eig_i) + s * math.sqrt(eig_j)


def comm_range_factor(l_ij: float, rho0: float, rho: float) -> float:
    """Cosine taper: 1 up to rho0, down to 0 at rho."""
    if l_ij <= rho0:
        return 1.0
    if l_ij > rho:
        return 0.0
    return 0.5 + 0.5 * math.cos(math.pi * (l_ij - rho0) / (rho - rho0))


def los_clearance(
    x_i: Vec2,
    x_j: Vec2,
    obstacles: list[Obstacle],
    eig_i: float,
    eig_j: float,
    s: float,
) -> LosClearance:
    """Conservative line-of-sight clearance between segment [x_i, x_j] and the
    nearest obstacle; +inf when the world has no obstacles."""
    if not obstacles:
        return LosClearance(math.inf, None, None, None)
    _, x_beta, proj, boundary = nearest_obstacle_to_segment(x_i, x_j, obstacles)
    inflate = s * math.sqrt(max(eig_i, eig_j))
    return LosClearance(boundary - inflate, proj.zeta, x_beta, proj.closest_point)


def los_factor(l_ij_o: float, d_min: float, d_max: float) -> float:
    """Cosine taper: 0 below d_min, up to 1 above d_max."""
    if l_ij_o <= d_min:
        return 0.0
    if l_ij_o > d_max:
        return 1.0
    return 0.5 + 0.5 * math.cos(math.pi * (d_max - l_ij_o) / (d_max - d_min))


def collision_clearance(
    i: int,
    nominals: list[Vec2],
    eigs: list[float],
    s: float,
    obstacles: list[Obstacle],
) -> CollisionClearance:
    """Conservative distance from robot i to its nearest possible collision point."""
    others = len(nominals) > 1 or len(obstacles) > 0
    if not others:
        return CollisionClearance(math.inf, None, 0.0, "none", -1)
    inflations = [s * math.sqrt(e) for e in eigs]
    x_gamma, b_io, kind, idx = nearest_collision_point(i, nominals, inflations, obstacles)
    dist = nominals[i].dist(x_gamma) - inflations[i] - b_io
    return CollisionClearance(dist, x_gamma, b_io, kind, idx)


def collision_factor(l_i_o: float, d_min: float, d_max: float) -> float:
    """Same taper shape as the line-of-sight factor."""
    return los_factor(l_i_o, d_min, d_max)


class WorldView:
    """Nominal positions, Sigma eigenvalues and obstacles at one instant.

    Caches per-robot collision data so gamma factors are computed once per
    robot per step.
    """

    def __init__(
        self,
        nominals: list[Vec2],
        sigma_eigs: list[float],
        obstacles: list[Obstacle],
        params: GraphParams,
    ) -> None:
        if len(nominals) != len(sigma_eigs):
            raise ValueError("nominals and sigma_eigs must have equal length")
        self.nominals = nominals
        self.sigma_eigs = sigma_eigs
        self.obstacles = obstacles
        self.params = params
        self.n = len(nominals)
        self._collision: list[CollisionClearance | None] = [None] * self.n
        self._gamma: list[float | None] = [None] * self.n

    def collision(self, i: int) -> CollisionClearance:
        c = self._collision[i]
        if c is None:
            c = collision_clearance(
                i, self.nominals, self.sigma_eigs, self.params.s, self.obstacles
            )
            self._collision[i] = c
        return c

    def gamma(self, i: int) -> float:
        g = self._gamma[i]
        if g is None:
            p = self.params
            g = collision_factor(self.collision(i).distance, p.d_gamma_min, p.d_gamma_max)
            self._gamma[i] = g
        return g


def _unit(v: Vec2) -> Vec2 | None:
    n = v.norm()
    if n < COINCIDENT_EPS:
        return None
    return Vec2(v.x / n, v.y / n)


def edge_weight_gradient(i: int, j: int, world: WorldView) -> Vec2:
    """Gradient of a_ij with respect to robot i's nominal position.

    Product rule over the four factors; each factor's gradient vanishes on its
    flat branches.  The gamma_j term contributes only when robot j's nearest
    collision point is robot i.  Coincident nominals zero the affected unit
    vectors rather than dividing by ~0.
    """
    if i == j:
        raise ValueError("edge weights are defined for i != j")
    p = world.params
    xi, xj = world.nominals[i], world.nominals[j]
    ei, ej = world.sigma_eigs[i], world.sigma_eigs[j]

    l_rng = conservative_range(xi, xj, ei, ej, p.s)
    alpha = comm_range_factor(l_rng, p.rho0, p.rho)
    los = los_clearance(xi, xj, world.obstacles, ei, ej, p.s)
    beta = los_factor(los.distance, p.d_beta_min, p.d_beta_max)
    gi, gj = world.gamma(i), world.gamma(j)

    # d(alpha)/dx_i
    d_alpha = Vec2(0.0, 0.0)
    if p.rho0 < l_rng <= p.rho:
        u = _unit(xi - xj)
        if u is not None:
            coef = (
                -math.pi
                / (2.0 * (p.rho - p.rho0))
                * math.sin(math.pi * (l_rng - p.rho0) / (p.rho - p.rho0))
            )
            d_alpha = u * coef

    # d(beta)/dx_i
    d_beta = Vec2(0.0, 0.0)
    if los.x_beta is not None and p.d_beta_min < los.distance <= p.d_beta_max:
        assert los.x_l is not None and los.zeta is not None
        u = _unit(los.x_l - los.x_beta)
        if u is not None:
            coef = (
                math.pi
                / (2.0 * (p.d_beta_max - p.d_beta_min))
                * math.sin(
                    math.pi * (p.d_beta_max - los.distance) / (p.d_beta_max - p.d_beta_min)
                )
            )
            d_beta = u * (coef * los.zeta)

    # d(gamma_i)/dx_i
    d_gamma_i = Vec2(0.0, 0.0)
    ci = world.collision(i)
    if ci.x_gamma is not None and p.d_gamma_min < ci.distance <= p.d_gamma_max:
        u = _unit(xi - ci.x_gamma)
        if u is not None:
            coef = (
                math.pi
                / (2.0 * (p.d_gamma_max - p.d_gamma_min))
                * math.sin(
                    math.pi * (p.d_gamma_max - ci.distance) / (p.d_gamma_max - p.d_gamma_min)
                )
            )
            d_gamma_i = u * coef

    # d(gamma_j)/dx_i: nonzero only when j's nearest collision point is robot i
    d_gamma_j = Vec2(0.0, 0.0)
    cj = world.collision(j)
    if (
        cj.kind == "robot"
        and cj.index == i
        and p.d_gamma_min < cj.distance <= p.d_gamma_max
    ):
        u = _unit(xi - xj)
        if u is not None:
            coef = (
                math.pi
                / (2.0 * (p.d_gamma_max - p.d_gamma_min))
                * math.sin(
                    math.pi * (p.d_gamma_max - cj.distance) / (p.d_gamma_max - p.d_gamma_min)
                )
            )
            d_gamma_j = u * coef

    return (
        d_alpha * (beta * gi * gj)
        + d_beta * (alpha * gi * gj)
        + d_gamma_i * (alpha * beta * gj)
        + d_gamma_j * (alpha * beta * gi)
    )


def edge_weight(i: int, j: int, world: WorldView) -> WeightedEdge:
    """Edge weight a_ij = alpha * beta * gamma_i * gamma_j with its gradient."""
    if i == j:
        raise ValueError("edge weights are defined for i != j")
    p = world.params
    xi, xj = world.nominals[i], world.nominals[j]
    ei, ej = world.sigma_eigs[i], world.sigma_eigs[j]
    alpha = comm_range_factor(conservative_range(xi, xj, ei, ej, p.s), p.rho0, p.rho)
    los = los_clearance(xi, xj, world.obstacles, ei, ej, p.s)
    beta = los_factor(los.distance, p.d_beta_min, p.d_beta_max)
    gi, gj = world.gamma(i), world.gamma(j)
    a = alpha * beta * gi * gj
    grad = edge_weight_gradient(i, j, world)
    return WeightedEdge(alpha, beta, gi, gj, a, grad)


def laplacian(A: np.ndarray) -> np.ndarray:
    """L = diag(row sums) - A for a symmetric zero-diagonal adjacency matrix."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("adjacency must be square")
    if not np.array_equal(A, A.T):
        raise ValueError("adjacency must be symmetric")
    return np.diag(A.sum(axis=1)) - A


def fiedler_oracle(L: np.ndarray) -> tuple[float, np.ndarray]:
    """Algebraic connectivity and unit Fiedler vector via deterministic Jacobi.

    The Fiedler vector's sign is fixed so its first nonzero component is
    positive.  Requires n >= 2.
    """
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    if n < 2:
        raise ValueError("fiedler_oracle requires at least 2 nodes")
    evals, evecs = jacobi_eigh(L)
    return float(evals[1]), evecs[:, 1].copy()


def build_graph(world: WorldView) -> tuple[GraphSnapshot, dict[tuple[int, int], WeightedEdge]]:
    """Adjacency, Laplacian and Fiedler data for the full weighted graph.

    Returns the snapshot together with per-ordered-pair edges (gradients are
    direction specific: edges[(i, j)].grad_a_wrt_i is d a_ij / d x_i).
    """
    n = world.n
    A = np.zeros((n, n))
    edges: dict[tuple[int, int], WeightedEdge] = {}
    for i in range(n):
        for j in range(i + 1, n):
            eij = edge_weight(i, j, world)
            eji = edge_weight(j, i, world)
            A[i, j] = A[j, i] = eij.a
            edges[(i, j)] = eij
            edges[(j, i)] = eji
    if n == 1:
        return (
            GraphSnapshot(1, A, np.zeros((1, 1)), math.inf, np.ones(1), False),
            edges,
        )
    L = laplacian(A)
    evals, evecs = jacobi_eigh(L)
    lambda2 = float(evals[1])
    degenerate = n >= 3 and (evals[2] - evals[1]) < DEGENERATE_GAP
    return GraphSnapshot(n, A, L, lambda2, evecs[:, 1].copy(), degenerate), edges


def robot_in_collision(
    k: int, positions: list[Vec2], obstacles: list[Obstacle], collision_radius: float
) -> bool:
    """Hard collision test on actual positions."""
    xk = positions[k]
    for m, xm in enumerate(positions):
        if m != k and xk.dist(xm) < 2.0 * collision_radius:
            return True
    for obs in obstacles:
        if xk.dist(obs.center) - obs.radius < collision_radius:
            return True
    return False


def true_binary_connectivity(
    positions: list[Vec2], obstacles: list[Obstacle], params: GraphParams
) -> tuple[np.ndarray, float]:
    """Ground-truth {0,1} connectivity on actual positions.

    Two robots are connected iff they are within range rho, their line of
    sight is not obstructed by any obstacle disk, and neither robot is in
    collision (with an obstacle or another robot).  Returns the binary
    adjacency and its algebraic connectivity (inf for a single robot).
    """
    n = len(positions)
    A = np.zeros((n, n))
    if n == 1:
        return A, math.inf
    colliding = [
        robot_in_collision(k, positions, obstacles, params.collision_radius)
        for k in range(n)
    ]
    for i in range(n):
        for j in range(i + 1, n):
            if colliding[i] or colliding[j]:
                continue
            if positions[i].dist(positions[j]) > params.rho:
                continue
            if any(
                segment_intersects_disk(positions[i], positions[j], obs)
                for obs in obstacles
            ):
                continue
            A[i, j] = A[j, i] = 1.0
    lambda2, _ = fiedler_oracle(laplacian(A))
    return A, lambda2
