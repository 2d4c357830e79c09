"""Finite-difference validation of the analytic edge-weight gradients.

Samples random configurations, filters out non-smooth ones (taper-branch
edges, nearest-candidate ties, projection clamp transitions, near-coincident
robots), and compares the analytic gradient of a_ij w.r.t. robot i's nominal
position against central finite differences with the dispersion eigenvalues
held fixed (their position-gradients are identically zero).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Obstacle, Vec2
from .weighted_graph import (
    GraphParams,
    WorldView,
    collision_clearance,
    conservative_range,
    edge_weight,
    los_clearance,
)

FD_STEP = 1e-5
SMOOTH_MARGIN = 1e-3


@dataclass
class GradCheckResult:
    trials: int
    evaluated: int
    max_rel_err: float
    branch_counts: dict[str, int]

    @property
    def passed(self) -> bool:
        return self.evaluated > 0 and self.max_rel_err < 1e-4


def _near(x: float, targets: tuple[float, ...], margin: float = SMOOTH_MARGIN) -> bool:
    return any(abs(x - t) < margin for t in targets)


def _taper_state(x: float, lo: float, hi: float) -> str:
    if x <= lo:
        return "low"
    if x > hi:
        return "high"
    return "taper"


def _candidate_scores(
    i: int, nominals: list[Vec2], inflations: list[float], obstacles: list[Obstacle]
) -> list[float]:
    xi = nominals[i]
    scores = [
        xi.dist(xj) - inflations[j] for j, xj in enumerate(nominals) if j != i
    ]
    scores += [xi.dist(o.center) - o.radius for o in obstacles]
    return sorted(scores)


def _config_is_smooth(
    i: int,
    j: int,
    nominals: list[Vec2],
    eigs: list[float],
    obstacles: list[Obstacle],
    p: GraphParams,
) -> bool:
    xi, xj = nominals[i], nominals[j]
    if xi.dist(xj) < 0.5:
        return False
    l_rng = conservative_range(xi, xj, eigs[i], eigs[j], p.s)
    if _near(l_rng, (p.rho0, p.rho)):
        return False
    if obstacles:
        # near-tie between obstacles for the nearest-to-segment choice
        boundaries = []
        for obs in obstacles:
            ab = xj - xi
            denom = ab.dot(ab)
            t = (obs.center - xi).dot(ab) / denom
            t_clamped = min(1.0, max(0.0, t))
            closest = Vec2(xi.x + t_clamped * ab.x, xi.y + t_clamped * ab.y)
            boundaries.append((obs.center.dist(closest) - obs.radius, t))
        boundaries.sort()
        if len(boundaries) > 1 and boundaries[1][0] - boundaries[0][0] < SMOOTH_MARGIN:
            return False
        t_raw = boundaries[0][1]
        if _near(t_raw, (0.0, 1.0)):
            return False
        los = los_clearance(xi, xj, obstacles, eigs[i], eigs[j], p.s)
        if _near(los.distance, (p.d_beta_min, p.d_beta_max)):
            return False
    inflations = [p.s * math.sqrt(e) for e in eigs]
    for k in (i, j):
        scores = _candidate_scores(k, nominals, inflations, obstacles)
        if len(scores) > 1 and scores[1] - scores[0] < SMOOTH_MARGIN:
            return False
        cc = collision_clearance(k, nominals, eigs, p.s, obstacles)
        if _near(cc.distance, (p.d_gamma_min, p.d_gamma_max)):
            return False
    return True


def _branches(
    i: int,
    j: int,
    nominals: list[Vec2],
    eigs: list[float],
    obstacles: list[Obstacle],
    p: GraphParams,
) -> dict[str, str]:
    xi, xj = nominals[i], nominals[j]
    l_rng = conservative_range(xi, xj, eigs[i], eigs[j], p.s)
    alpha = "high" if l_rng <= p.rho0 else ("low" if l_rng > p.rho else "taper")
    los = los_clearance(xi, xj, obstacles, eigs[i], eigs[j], p.s)
    beta = _taper_state(los.distance, p.d_beta_min, p.d_beta_max)
    ci = collision_clearance(i, nominals, eigs, p.s, obstacles)
    cj = collision_clearance(j, nominals, eigs, p.s, obstacles)
    gamma_i = _taper_state(ci.distance, p.d_gamma_min, p.d_gamma_max)
    gamma_j = _taper_state(cj.distance, p.d_gamma_min, p.d_gamma_max)
    if cj.kind == "robot" and cj.index == i:
        gamma_j += "@i"
    return {"alpha": alpha, "beta": beta, "gamma_i": gamma_i, "gamma_j": gamma_j}


def _sample_config(
    rng: np.random.Generator, p: GraphParams
) -> tuple[list[Vec2], list[float], list[Obstacle]]:
    n = 3
    nominals = [Vec2(0.0, 0.0)]
    ang = rng.uniform(0.0, 2.0 * math.pi)
    d01 = rng.uniform(4.0, 26.0)
    nominals.append(Vec2(d01 * math.cos(ang), d01 * math.sin(ang)))
    ang2 = rng.uniform(0.0, 2.0 * math.pi)
    d02 = rng.uniform(2.0, 30.0)
    nominals.append(Vec2(d02 * math.cos(ang2), d02 * math.sin(ang2)))
    eigs = [float(rng.uniform(0.05, 1.0)) for _ in range(n)]
    obstacles: list[Obstacle] = []
    if rng.random() < 0.75:
        # place an obstacle near the 0-1 segment to exercise the LOS taper
        t = rng.uniform(0.1, 0.9)
        base = Vec2(
            nominals[0].x + t * (nominals[1].x - nominals[0].x),
            nominals[0].y + t * (nominals[1].y - nominals[0].y),
        )
        seg = nominals[1] - nominals[0]
        nrm = seg.norm()
        perp = Vec2(-seg.y / nrm, seg.x / nrm)
        offset = rng.uniform(2.0, 9.0) * (1.0 if rng.random() < 0.5 else -1.0)
        radius = rng.uniform(0.5, 2.0)
        obstacles.append(Obstacle(base + perp * offset, radius))
    if rng.random() < 0.3:
        obstacles.append(
            Obstacle(
                Vec2(rng.uniform(-30, 30), rng.uniform(-30, 30)),
                rng.uniform(0.5, 2.0),
            )
        )
    return nominals, eigs, obstacles


def _edge_value(
    i: int,
    j: int,
    nominals: list[Vec2],
    eigs: list[float],
    obstacles: list[Obstacle],
    p: GraphParams,
) -> float:
    view = WorldView(nominals, eigs, obstacles, p)
    return edge_weight(i, j, view).a


def run_gradcheck(
    trials: int, seed: int, params: GraphParams | None = None
) -> GradCheckResult:
    """Compare analytic vs finite-difference gradients on `trials` smooth configs."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    p = params if params is not None else GraphParams()
    rng = np.random.default_rng(seed)
    max_err = 0.0
    evaluated = 0
    counts: dict[str, int] = {}
    attempts = 0
    while evaluated < trials and attempts < trials * 50:
        attempts += 1
        nominals, eigs, obstacles = _sample_config(rng, p)
        i, j = 0, 1
        if not _config_is_smooth(i, j, nominals, eigs, obstacles, p):
            continue
        view = WorldView(nominals, eigs, obstacles, p)
        grad = edge_weight(i, j, view).grad_a_wrt_i
        h = FD_STEP
        fd = []
        for axis in range(2):
            shifted_plus = list(nominals)
            shifted_minus = list(nominals)
            dx = Vec2(h, 0.0) if axis == 0 else Vec2(0.0, h)
            shifted_plus[i] = nominals[i] + dx
            shifted_minus[i] = nominals[i] - dx
            a_plus = _edge_value(i, j, shifted_plus, eigs, obstacles, p)
            a_minus = _edge_value(i, j, shifted_minus, eigs, obstacles, p)
            fd.append((a_plus - a_minus) / (2.0 * h))
        fd_vec = Vec2(fd[0], fd[1])
        diff = math.hypot(grad.x - fd_vec.x, grad.y - fd_vec.y)
        fd_norm = fd_vec.norm()
        if fd_norm < 1e-7 and math.hypot(grad.x, grad.y) < 1e-7:
            err = 0.0
        else:
            err = diff / max(fd_norm, 1e-7)
        max_err = max(max_err, err)
        evaluated += 1
        for name, state in _branches(i, j, nominals, eigs, obstacles, p).items():
            key = f"{name}:{state}"
            counts[key] = counts.get(key, 0) + 1
    return GradCheckResult(
        trials=trials, evaluated=evaluated, max_rel_err=max_err, branch_counts=counts
    )
