"""Decentralized estimation of algebraic connectivity and Fiedler components.

Each robot keeps four scalar states exchanged with its current neighbors once
per round (synchronous lockstep, one message hop per round):

* ``x_tilde`` — deflated power-iteration state whose converged direction is
  the Fiedler vector of the weighted graph; robot i's own component is its
  ``e2`` estimate for the controller.
* ``avg_mean`` / ``avg_sq`` — dynamic average-consensus trackers of the
  network means of x_tilde and x_tilde^2 (input-delta feedforward keeps the
  network sums exact), used to deflate the ones-component and regulate the
  norm of x_tilde.
* ``probe`` — a spectral probe driven by plain diffusion y <- y - sigma*L*y.
  Within an epoch the graph is static, so each robot's probe history is a
  noiseless sum of modes (1 - sigma*lambda_k)^t; near the end of the epoch
  every robot extracts the smallest positive rate from its own history by
  matrix-pencil identification and the robots flood-minimize the positive
  candidates over the remaining rounds.  The result is each robot's estimate
  lambda2_tilde of the algebraic connectivity, accurate independently of the
  spectral gap or the power-iteration transient.

A robot with no current neighbors reports lambda2_tilde = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._kernels import consensus_epoch_kernel
from .geometry import Vec2

PENCIL_MIN_ROUNDS = 40


@dataclass(frozen=True)
class ConsensusGains:
    """Tuning constants for the estimator (not paper values).

    k1/k2 must exceed the largest reachable lambda2 (<= robot count) so the
    ones-component deflates faster than the Fiedler component; k3/k2 bounds
    the measurable lambda2 range of the norm regulator.  mix and sigma are
    per-round diffusion weights and must stay below 2/lambda_max(L) for the
    densest graph in play (safe for ~10 range-limited robots).
    """

    k1: float = 10.0
    k2: float = 1.5
    k3: float = 12.0
    mix: float = 0.18
    sigma: float = 0.1
    dt_c: float = 0.01


@dataclass
class ConsensusState:
    """Per-robot estimator state between rounds."""

    x_tilde: float
    avg_mean: float
    avg_sq: float
    probe: float
    lambda2_tilde: float = 0.0
    lambda2_local: float | None = None  # own pencil estimate, this epoch
    lambda2_candidate: float | None = None  # running flooded minimum
    probe_history: list[float] = field(default_factory=list)
    dropped_messages: int = 0


@dataclass(frozen=True)
class NeighborMessage:
    """One robot-to-robot message; delivered only along edges with a_ij > 0."""

    sender: int
    x_nom: Vec2
    sigma_eig_max: float
    x_tilde: float
    avg_mean: float
    avg_sq: float
    probe: float
    lambda2_candidate: float | None


def message_from_state(
    sender: int, x_nom: Vec2, sigma_eig_max: float, state: ConsensusState
) -> NeighborMessage:
    return NeighborMessage(
        sender=sender,
        x_nom=x_nom,
        sigma_eig_max=sigma_eig_max,
        x_tilde=state.x_tilde,
        avg_mean=state.avg_mean,
        avg_sq=state.avg_sq,
        probe=state.probe,
        lambda2_candidate=state.lambda2_candidate,
    )


def _message_finite(msg: NeighborMessage) -> bool:
    vals = [msg.x_tilde, msg.avg_mean, msg.avg_sq, msg.probe, msg.sigma_eig_max]
    if msg.lambda2_candidate is not None:
        vals.append(msg.lambda2_candidate)
    return all(math.isfinite(v) for v in vals) and msg.x_nom.is_finite()


def init_consensus_state(rng: np.random.Generator) -> ConsensusState:
    """Fresh estimator state with a seeded unit-variance x_tilde draw."""
    x0 = float(rng.standard_normal())
    return ConsensusState(x_tilde=x0, avg_mean=x0, avg_sq=x0 * x0, probe=0.0)


def reset_probe(state: ConsensusState, rng: np.random.Generator) -> None:
    """Re-excite the spectral probe at an epoch boundary (local operation)."""
    state.probe = float(rng.standard_normal())
    state.probe_history = [state.probe]
    state.lambda2_local = None
    state.lambda2_candidate = None


def consensus_round(
    state: ConsensusState,
    inbox: list[NeighborMessage],
    weights: dict[int, float],
    gains: ConsensusGains,
) -> ConsensusState:
    """One synchronous round for one robot: reference implementation.

    Reads only the robot's own state and the inbox (messages from neighbors
    with a_ij > 0); messages with non-finite fields are dropped and counted.
    """
    msgs = sorted(inbox, key=lambda msg: msg.sender)
    dropped = state.dropped_messages
    sx = sm = sq = sy = 0.0
    best_cand = state.lambda2_candidate
    for msg in msgs:
        a = weights.get(msg.sender, 0.0)
        if a <= 0.0:
            continue
        if not _message_finite(msg):
            dropped += 1
            continue
        sx += a * (state.x_tilde - msg.x_tilde)
        sm += a * (state.avg_mean - msg.avg_mean)
        sq += a * (state.avg_sq - msg.avg_sq)
        sy += a * (state.probe - msg.probe)
        c = msg.lambda2_candidate
        if c is not None and c > 0.0 and (best_cand is None or c < best_cand):
            best_cand = c
    dt = gains.dt_c
    xn = state.x_tilde + dt * (
        -gains.k1 * state.avg_mean
        - gains.k2 * sx
        - gains.k3 * (state.avg_sq - 1.0) * state.x_tilde
    )
    mn = state.avg_mean + (xn - state.x_tilde) - gains.mix * sm
    qn = state.avg_sq + (xn * xn - state.x_tilde * state.x_tilde) - gains.mix * sq
    yn = state.probe - gains.sigma * sy
    new = replace(
        state,
        x_tilde=xn,
        avg_mean=mn,
        avg_sq=qn,
        probe=yn,
        lambda2_candidate=best_cand,
        dropped_messages=dropped,
        probe_history=state.probe_history + [yn],
    )
    return new


def smallest_positive_rate(
    probe_history: np.ndarray,
    sigma: float,
    residue_tol: float = 1e-6,
    zero_tol: float = 1e-4,
) -> float:
    """Smallest positive Laplacian eigenvalue visible in one probe history.

    Matrix-pencil (Prony) identification on the differenced sequence: the
    diffusion y(t) = sum_k c_k (1 - sigma*lam_k)^t becomes, after one
    difference, a mode sum free of the constant (lam = 0) term.  Modes with
    negligible residue energy over the window are discarded; returns 0.0 when
    no positive mode remains (constant probe, e.g. an isolated robot).
    """
    s = np.diff(np.asarray(probe_history, dtype=float))
    if len(s) < 3:
        return 0.0
    amax = float(np.max(np.abs(s)))
    if amax < 1e-12:
        return 0.0
    alive = np.nonzero(np.abs(s) > 1e-13 * amax)[0]
    T = int(alive[-1]) + 1
    s = s[:T]
    p = min(10, (T - 1) // 3)
    if p < 1:
        return 0.0
    rows = T - p
    Y = np.empty((rows, p + 1))
    for c in range(p + 1):
        Y[:, c] = s[c : c + rows]
    Y0, Y1 = Y[:, :-1], Y[:, 1:]
    U, sv, Vt = np.linalg.svd(Y0, full_matrices=False)
    rank = int(np.sum(sv > 1e-9 * sv[0]))
    if rank == 0:
        return 0.0
    U, sv, Vt = U[:, :rank], sv[:rank], Vt[:rank]
    A = U.T @ Y1 @ Vt.T @ np.diag(1.0 / sv)
    mu = np.linalg.eigvals(A)
    t = np.arange(T)
    M = np.empty((T, len(mu)), dtype=complex)
    for k, root in enumerate(mu):
        M[:, k] = root**t
    amp, *_ = np.linalg.lstsq(M, s.astype(complex), rcond=None)
    energy = np.abs(amp) * np.sum(np.abs(M), axis=0)
    etot = float(np.max(energy)) if len(energy) else 0.0
    best = math.inf
    for k, root in enumerate(mu):
        if abs(root.imag) > 1e-7:
            continue
        if etot > 0.0 and energy[k] < residue_tol * etot:
            continue
        lam = (1.0 - root.real) / sigma
        if lam > zero_tol and lam < best:
            best = lam
    return 0.0 if math.isinf(best) else float(best)


def _pencil_round(rounds: int) -> int:
    """Round index at which robots run their local pencil identification.

    Leaves a flooding tail for the candidate minimum when the epoch is long
    enough; short epochs identify at the very end (own history only).
    """
    if rounds < PENCIL_MIN_ROUNDS:
        return rounds
    return rounds - min(20, rounds // 4)


def _neighbor_sets(W: np.ndarray) -> list[list[int]]:
    n = W.shape[0]
    return [[j for j in range(n) if W[i, j] > 0.0] for i in range(n)]


def _flood_min_candidates(
    own: list[float], W: np.ndarray, hops: int
) -> list[float]:
    """Flood the positive candidate minimum along edges for `hops` rounds."""
    n = len(own)
    cand = [c if c > 0.0 else math.inf for c in own]
    nbrs = _neighbor_sets(W)
    for _ in range(max(hops, 0)):
        new = list(cand)
        for i in range(n):
            for j in nbrs[i]:
                if cand[j] < new[i]:
                    new[i] = cand[j]
        cand = new
    return cand


def run_consensus_epoch(
    states: list[ConsensusState],
    W: np.ndarray,
    rounds: int,
    gains: ConsensusGains,
    probe_rng: list[np.random.Generator],
) -> list[ConsensusState]:
    """Run `rounds` synchronous rounds over all robots (fast kernel path).

    The probe is re-seeded from each robot's stream at the epoch start; the
    power-iteration and average-consensus states persist across epochs.
    Message visibility is strictly the current a_ij > 0 adjacency.  Returns
    the updated states with lambda2_tilde set.
    """
    n = len(states)
    if W.shape != (n, n):
        raise ValueError("weight matrix shape does not match state count")
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    x = np.array([st.x_tilde for st in states])
    m = np.array([st.avg_mean for st in states])
    q = np.array([st.avg_sq for st in states])
    y = np.empty(n)
    for i, st in enumerate(states):
        reset_probe(st, probe_rng[i])
        y[i] = st.probe
    if not (
        np.all(np.isfinite(x))
        and np.all(np.isfinite(m))
        and np.all(np.isfinite(q))
        and np.all(np.isfinite(W))
    ):
        raise FloatingPointError("non-finite consensus state or weights")
    y_hist = np.empty((rounds + 1, n))
    consensus_epoch_kernel(
        W, x, m, q, y,
        gains.k1, gains.k2, gains.k3, gains.mix, gains.sigma, gains.dt_c,
        rounds, y_hist,
    )
    p_at = _pencil_round(rounds)
    local = [
        smallest_positive_rate(y_hist[: p_at + 1, i], gains.sigma) for i in range(n)
    ]
    flooded = _flood_min_candidates(local, W, rounds - p_at)
    nbrs = _neighbor_sets(W)
    out: list[ConsensusState] = []
    for i, st in enumerate(states):
        lam = flooded[i]
        if math.isinf(lam) or not nbrs[i]:
            lam = 0.0
        out.append(
            ConsensusState(
                x_tilde=float(x[i]),
                avg_mean=float(m[i]),
                avg_sq=float(q[i]),
                probe=float(y[i]),
                lambda2_tilde=float(lam),
                lambda2_local=local[i],
                lambda2_candidate=None if math.isinf(flooded[i]) else float(flooded[i]),
                probe_history=[float(v) for v in y_hist[:, i]],
                dropped_messages=st.dropped_messages,
            )
        )
    return out


def run_consensus_epoch_reference(
    states: list[ConsensusState],
    W: np.ndarray,
    rounds: int,
    gains: ConsensusGains,
    probe_rng: list[np.random.Generator],
    x_noms: list[Vec2] | None = None,
    sigma_eigs: list[float] | None = None,
) -> list[ConsensusState]:
    """Message-passing reference epoch built from consensus_round calls.

    Used by tests (kernel equivalence, decentralization audit); produces
    bitwise-identical states to run_consensus_epoch.
    """
    n = len(states)
    if x_noms is None:
        x_noms = [Vec2(0.0, 0.0)] * n
    if sigma_eigs is None:
        sigma_eigs = [0.0] * n
    cur = [replace(st) for st in states]
    for i, st in enumerate(cur):
        reset_probe(st, probe_rng[i])
    p_at = _pencil_round(rounds)
    nbrs = _neighbor_sets(W)
    for r in range(rounds):
        msgs = [
            message_from_state(i, x_noms[i], sigma_eigs[i], cur[i]) for i in range(n)
        ]
        nxt = []
        for i in range(n):
            inbox = [msgs[j] for j in nbrs[i]]
            weights = {j: float(W[i, j]) for j in nbrs[i]}
            nxt.append(consensus_round(cur[i], inbox, weights, gains))
        cur = nxt
        if r + 1 == p_at:
            for i in range(n):
                lam = smallest_positive_rate(
                    np.array(cur[i].probe_history[: p_at + 1]), gains.sigma
                )
                cur[i].lambda2_local = lam
                if lam > 0.0:
                    c = cur[i].lambda2_candidate
                    if c is None or lam < c:
                        cur[i].lambda2_candidate = lam
    if p_at == rounds:
        for i in range(n):
            lam = smallest_positive_rate(
                np.array(cur[i].probe_history), gains.sigma
            )
            cur[i].lambda2_local = lam
            if lam > 0.0:
                c = cur[i].lambda2_candidate
                if c is None or lam < c:
                    cur[i].lambda2_candidate = lam
    for i in range(n):
        cand = cur[i].lambda2_candidate
        cur[i].lambda2_tilde = (
            float(cand) if (cand is not None and nbrs[i]) else 0.0
        )
    return cur
