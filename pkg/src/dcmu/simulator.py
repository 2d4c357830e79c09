"""Episode orchestration and the seeded Monte-Carlo harness.

Each control step (period dt) runs the pipeline: weighted graph from the
current nominal positions and dispersion eigenvalues, a consensus epoch
(`rounds` message rounds at the inter-robot communication rate), nominal
control (followers from the connectivity gradient, leaders from waypoints),
nominal advance, noisy physics + Kalman filtering + dispersion update, and
finally the ground-truth binary connectivity on the new true positions.

The baseline algorithm is the same pipeline with the confidence scalar s
forced to zero (deviations ignored), which is how prior work treats robots
as sitting exactly on their nominal positions.

Follower nominal trajectories depend only on the scenario (noise covariances
enter the dispersion recursion but no sampled noise does), so they are
identical across Monte-Carlo seeds.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .consensus import ConsensusGains, ConsensusState, init_consensus_state, run_consensus_epoch
from .controller import NeighborTerm, nominal_control
from .geometry import Obstacle, Vec2
from .robot_model import (
    NoiseParams,
    RobotState,
    Role,
    advance_nominal,
    control_matrix,
    kf_correct,
    kf_predict,
    robot_noise_stream,
    sample_measurement,
    step_true_state,
    total_control,
    update_dispersion,
)
from .weighted_graph import GraphParams, WorldView, build_graph, true_binary_connectivity

DEFAULT_CONSENSUS_SEED = 20240917


class SimulationAbort(RuntimeError):
    """Raised when a run produces non-finite state; the run counts as failed."""


@dataclass(frozen=True)
class RobotSpec:
    role: Role
    position: Vec2
    estimate: Vec2 | None = None
    speed: float = 0.0
    waypoints: tuple[Vec2, ...] = ()

    def __post_init__(self) -> None:
        if self.role is Role.LEADER and len(self.waypoints) == 0:
            raise ValueError("leaders need at least one waypoint")


@dataclass(frozen=True)
class Scenario:
    graph: GraphParams
    noise: NoiseParams
    robots: tuple[RobotSpec, ...]
    obstacles: tuple[Obstacle, ...] = ()
    dt: float = 0.2
    v_max: float = 2.0
    duration: float = 120.0
    rounds: int = 200
    algo: str = "dcmu"
    p0: float = 0.1
    k_fb: float = 0.14
    gains: ConsensusGains = field(default_factory=ConsensusGains)
    consensus_seed: int = DEFAULT_CONSENSUS_SEED

    def __post_init__(self) -> None:
        if len(self.robots) < 1:
            raise ValueError("scenario needs at least one robot")
        if self.algo not in ("dcmu", "baseline"):
            raise ValueError(f"unknown algo {self.algo!r}")
        if not self.dt > 0.0:
            raise ValueError("dt must be > 0")
        steps = self.duration / self.dt
        if abs(steps - round(steps)) > 1e-9:
            raise ValueError("duration must be an integral number of steps")
        if self.rounds < 1:
            raise ValueError("consensus rounds must be >= 1")
        for spec in self.robots:
            if spec.role is Role.LEADER and spec.speed > self.v_max + 1e-12:
                raise ValueError("leader speed exceeds v_max")

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))

    @property
    def effective_graph(self) -> GraphParams:
        """Graph parameters with the baseline's s = 0 substitution applied."""
        if self.algo == "baseline":
            return replace(self.graph, s=0.0)
        return self.graph


@dataclass(frozen=True)
class StepRecord:
    t: float
    lambda2_true: float
    lambda2_weighted: float
    lambda2_est_min: float
    lambda2_est_max: float
    min_robot_dist: float
    min_obst_clearance: float
    positions_true: tuple[Vec2, ...]
    positions_nom: tuple[Vec2, ...]


@dataclass(frozen=True)
class RunMetrics:
    success: bool
    min_lambda2_true: float
    collision_occurred: bool
    aborted: bool
    steps: int
    collision_steps: int
    records: tuple[StepRecord, ...]

    def summary(self) -> "RunSummary":
        return RunSummary(
            success=self.success,
            min_lambda2_true=self.min_lambda2_true,
            collision_occurred=self.collision_occurred,
            aborted=self.aborted,
            steps=self.steps,
            collision_steps=self.collision_steps,
        )


@dataclass(frozen=True)
class RunSummary:
    success: bool
    min_lambda2_true: float
    collision_occurred: bool
    aborted: bool
    steps: int
    collision_steps: int


def leader_nominal_input(
    x_nom: Vec2, waypoints: tuple[Vec2, ...], cursor: int, speed: float, dt: float
) -> tuple[Vec2, int]:
    """Constant-speed piecewise-linear waypoint tracking of the nominal path.

    Returns the nominal velocity and the updated waypoint cursor; holds
    position (zero input) once past the final waypoint.
    """
    while cursor < len(waypoints) and x_nom.dist(waypoints[cursor]) <= 1e-12:
        cursor += 1
    if cursor >= len(waypoints) or speed <= 0.0:
        return Vec2(0.0, 0.0), cursor
    target = waypoints[cursor]
    d = x_nom.dist(target)
    step_len = speed * dt
    if d <= step_len + 1e-12:
        return (target - x_nom) * (1.0 / dt), cursor + 1
    return (target - x_nom) * (speed / d), cursor


class World:
    """Mutable per-episode state (one episode owns one World)."""

    def __init__(self, scenario: Scenario, seed: int) -> None:
        self.scenario = scenario
        self.seed = seed
        self.B = control_matrix(scenario.dt)
        n = len(scenario.robots)
        self.robots: list[RobotState] = []
        k_fb = scenario.k_fb * np.eye(2)
        p0 = scenario.p0 * np.eye(2)
        for spec in scenario.robots:
            est = spec.estimate if spec.estimate is not None else spec.position
            self.robots.append(
                RobotState(
                    role=spec.role,
                    x_true=spec.position,
                    x_hat=est,
                    x_nom=spec.position,
                    P=p0.copy(),
                    Lambda=np.zeros((2, 2)),
                    K_fb=k_fb,
                )
            )
        self.noise_rng = [robot_noise_stream(seed, i) for i in range(n)]
        # the consensus side is seeded independently of the episode seed so
        # nominal trajectories are seed-invariant
        self.consensus_rng = [
            np.random.default_rng(
                np.random.SeedSequence(
                    entropy=scenario.consensus_seed, spawn_key=(i,)
                )
            )
            for i in range(n)
        ]
        self.consensus: list[ConsensusState] = [
            init_consensus_state(self.consensus_rng[i]) for i in range(n)
        ]
        self.cursors = [0] * n
        self.step_index = 0

    def _check_finite(self) -> None:
        for r in self.robots:
            if not (
                r.x_true.is_finite()
                and r.x_hat.is_finite()
                and r.x_nom.is_finite()
                and np.all(np.isfinite(r.P))
                and np.all(np.isfinite(r.Lambda))
            ):
                raise SimulationAbort(
                    f"non-finite robot state at step {self.step_index}"
                )


def step(world: World) -> StepRecord:
    """Advance the world by one control period and record the step."""
    sc = world.scenario
    robots = world.robots
    n = len(robots)
    view = WorldView(
        [r.x_nom for r in robots],
        [r.sigma_eig_max for r in robots],
        list(sc.obstacles),
        sc.effective_graph,
    )
    snapshot, edges = build_graph(view)

    world.consensus = run_consensus_epoch(
        world.consensus, snapshot.A, sc.rounds, sc.gains, world.consensus_rng
    )

    # nominal inputs from the current epoch's estimates
    for i, r in enumerate(robots):
        if r.role is Role.LEADER:
            spec = sc.robots[i]
            u, world.cursors[i] = leader_nominal_input(
                r.x_nom, spec.waypoints, world.cursors[i], spec.speed, sc.dt
            )
            r.u_nom = u
        else:
            terms = [
                NeighborTerm(
                    neighbor=j,
                    a_ij=snapshot.A[i, j],
                    grad_a_wrt_i=edges[(i, j)].grad_a_wrt_i,
                    e2_j=world.consensus[j].x_tilde,
                )
                for j in range(n)
                if j != i and snapshot.A[i, j] > 0.0
            ]
            report = nominal_control(
                terms,
                e2_own=world.consensus[i].x_tilde,
                lambda2_tilde=world.consensus[i].lambda2_tilde,
                epsilon=sc.graph.epsilon,
                dt=sc.dt,
                v_max=sc.v_max,
            )
            r.u_nom = report.u_nom

    # physics + estimation; total control uses the pre-advance nominal
    zero_R = np.all(sc.noise.R == 0.0)
    for i, r in enumerate(robots):
        u_tot = total_control(r.u_nom, r.x_hat, r.x_nom, r.K_fb, sc.v_max)
        r.x_nom = advance_nominal(r.x_nom, r.u_nom, world.B)
        r.x_true = step_true_state(r.x_true, u_tot, world.B, sc.noise.Q, world.noise_rng[i])
        z = sample_measurement(r.x_true, sc.noise.R, world.noise_rng[i])
        x_bar, P_bar = kf_predict(r.x_hat, r.P, u_tot, world.B, sc.noise.Q)
        if zero_R and np.all(P_bar == 0.0):
            # perfect prior and perfect measurement: correction is a no-op
            x_hat, P, G = x_bar, P_bar, np.zeros((2, 2))
        else:
            x_hat, P, G = kf_correct(x_bar, P_bar, z, sc.noise.R)
        r.x_hat = x_hat
        Lam, Sigma, eig = update_dispersion(r.Lambda, P_bar, G, P, world.B, r.K_fb)
        r.P = P
        r.Lambda = Lam
        r.Sigma = Sigma
        r.sigma_eig_max = eig

    world.step_index += 1
    world._check_finite()

    trues = [r.x_true for r in robots]
    _, lam2_true = true_binary_connectivity(trues, list(sc.obstacles), sc.graph)
    min_rr = math.inf
    for i in range(n):
        for j in range(i + 1, n):
            min_rr = min(min_rr, trues[i].dist(trues[j]))
    min_oc = math.inf
    for xt in trues:
        for obs in sc.obstacles:
            min_oc = min(min_oc, xt.dist(obs.center) - obs.radius)
    ests = [cs.lambda2_tilde for cs in world.consensus]
    return StepRecord(
        t=world.step_index * sc.dt,
        lambda2_true=lam2_true,
        lambda2_weighted=snapshot.lambda2,
        lambda2_est_min=min(ests),
        lambda2_est_max=max(ests),
        min_robot_dist=min_rr,
        min_obst_clearance=min_oc,
        positions_true=tuple(trues),
        positions_nom=tuple(r.x_nom for r in robots),
    )


def run_episode(scenario: Scenario, seed: int) -> RunMetrics:
    """Run one full episode; success iff lambda2_true > epsilon at every step."""
    world = World(scenario, seed)
    records: list[StepRecord] = []
    min_lam = math.inf
    collision_steps = 0
    cr = scenario.graph.collision_radius
    try:
        for _ in range(scenario.n_steps):
            rec = step(world)
            records.append(rec)
            min_lam = min(min_lam, rec.lambda2_true)
            if rec.min_robot_dist < 2.0 * cr or rec.min_obst_clearance < 0.0:
                collision_steps += 1
    except SimulationAbort:
        return RunMetrics(
            success=False,
            min_lambda2_true=0.0,
            collision_occurred=collision_steps > 0,
            aborted=True,
            steps=len(records),
            collision_steps=collision_steps,
            records=tuple(records),
        )
    success = min_lam > scenario.graph.epsilon
    return RunMetrics(
        success=success,
        min_lambda2_true=min_lam,
        collision_occurred=collision_steps > 0,
        aborted=False,
        steps=len(records),
        collision_steps=collision_steps,
        records=tuple(records),
    )


def _episode_summary_task(args: tuple[Scenario, int]) -> RunSummary:
    scenario, seed = args
    return run_episode(scenario, seed).summary()


def default_workers() -> int:
    env = os.environ.get("DCMU_THREADS")
    if env is not None:
        try:
            return max(1, int(env))
        except ValueError:
            return 1
    return max(1, os.cpu_count() or 1)


@dataclass(frozen=True)
class MonteCarloResult:
    ratio: float
    runs: int
    successes: int
    seeds: tuple[int, ...]
    summaries: tuple[RunSummary, ...]


def monte_carlo(
    scenario: Scenario, n_runs: int, seed_base: int, workers: int | None = None
) -> MonteCarloResult:
    """Seeded Monte-Carlo over episodes seed_base + k, k in [0, n_runs).

    Episodes are independent, so the result is identical for any worker
    count; summaries are ordered by seed.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    seeds = tuple(seed_base + k for k in range(n_runs))
    if workers is None:
        workers = default_workers()
    workers = min(workers, n_runs)
    if workers <= 1:
        summaries = [run_episode(scenario, s).summary() for s in seeds]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            summaries = list(
                pool.map(
                    _episode_summary_task,
                    [(scenario, s) for s in seeds],
                    chunksize=max(1, n_runs // (4 * workers)),
                )
            )
    successes = sum(1 for s in summaries if s.success)
    return MonteCarloResult(
        ratio=successes / n_runs,
        runs=n_runs,
        successes=successes,
        seeds=seeds,
        summaries=tuple(summaries),
    )
