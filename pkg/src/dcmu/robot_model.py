"""Per-robot motion/sensing simulation and estimation.

Single-integrator dynamics x' = x + B u + w with B = dt*I, position
measurements z = x + v, a Kalman filter over both, linear feedback control
u = u_nom - K (x_hat - x_nom), and the dispersion covariance
Sigma = P + Lambda of the true state about the nominal trajectory, where
Lambda' = (I - B K) Lambda (I - B K)^T + G P_bar  (Lambda_0 = 0).

The Sigma recursion involves only covariances and gains, never positions, so
the Sigma sequence is identical along any nominal trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .eigen import eig_max_2x2, eig_min_2x2, sqrt_psd_2x2
from .geometry import Vec2

I2 = np.eye(2)


class Role(Enum):
    LEADER = "leader"
    FOLLOWER = "follower"


def _check_psd_2x2(m: np.ndarray, name: str) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.shape != (2, 2):
        raise ValueError(f"{name} must be 2x2")
    if abs(m[0, 1] - m[1, 0]) > 1e-9 * max(1.0, abs(m[0, 1])):
        raise ValueError(f"{name} must be symmetric")
    if eig_min_2x2(m) < -1e-10:
        raise ValueError(f"{name} must be positive semidefinite")
    return m


@dataclass(frozen=True)
class NoiseParams:
    """Motion (Q) and sensing (R) noise covariances, m^2."""

    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "Q", _check_psd_2x2(self.Q, "Q"))
        object.__setattr__(self, "R", _check_psd_2x2(self.R, "R"))

    @classmethod
    def isotropic(cls, q: float, r: float) -> "NoiseParams":
        return cls(Q=q * I2, R=r * I2)


@dataclass
class RobotState:
    """True, estimated and nominal state of one robot plus its covariances."""

    role: Role
    x_true: Vec2
    x_hat: Vec2
    x_nom: Vec2
    P: np.ndarray
    Lambda: np.ndarray
    Sigma: np.ndarray = field(init=False)
    sigma_eig_max: float = field(init=False)
    K_fb: np.ndarray = field(default_factory=lambda: 0.14 * I2)
    u_nom: Vec2 = field(default_factory=lambda: Vec2(0.0, 0.0))

    def __post_init__(self) -> None:
        self.P = _check_psd_2x2(self.P, "P")
        self.Lambda = _check_psd_2x2(self.Lambda, "Lambda")
        self.refresh_sigma()

    def refresh_sigma(self) -> None:
        self.Sigma = self.P + self.Lambda
        self.sigma_eig_max = eig_max_2x2(self.Sigma)


def control_matrix(dt: float) -> np.ndarray:
    """B = dt*I for the discrete single-integrator model."""
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    return dt * I2


def kf_predict(
    x_hat: Vec2, P: np.ndarray, u_total: Vec2, B: np.ndarray, Q: np.ndarray
) -> tuple[Vec2, np.ndarray]:
    """Prediction step: x_bar = x_hat + B u, P_bar = P + Q."""
    x_bar = Vec2(
        x_hat.x + B[0, 0] * u_total.x + B[0, 1] * u_total.y,
        x_hat.y + B[1, 0] * u_total.x + B[1, 1] * u_total.y,
    )
    return x_bar, P + Q


def kf_correct(
    x_bar: Vec2, P_bar: np.ndarray, z: Vec2, R: np.ndarray
) -> tuple[Vec2, np.ndarray, np.ndarray]:
    """Correction step: G = P_bar (P_bar + R)^-1, x_hat = x_bar + G(z - x_bar),
    P = P_bar - G P_bar.

    Raises when P_bar + R is singular (both covariances zero at once).
    """
    S = P_bar + R
    det = S[0, 0] * S[1, 1] - S[0, 1] * S[1, 0]
    if abs(det) < 1e-300:
        raise ValueError("P_bar + R is singular; cannot form the Kalman gain")
    S_inv = np.array([[S[1, 1], -S[0, 1]], [-S[1, 0], S[0, 0]]]) / det
    G = P_bar @ S_inv
    innov = z - x_bar
    x_hat = Vec2(
        x_bar.x + G[0, 0] * innov.x + G[0, 1] * innov.y,
        x_bar.y + G[1, 0] * innov.x + G[1, 1] * innov.y,
    )
    P = P_bar - G @ P_bar
    P = 0.5 * (P + P.T)
    return x_hat, P, G


def total_control(
    u_nom: Vec2, x_hat: Vec2, x_nom: Vec2, K_fb: np.ndarray, v_max: float
) -> Vec2:
    """u = u_nom - K_fb (x_hat - x_nom), then clamp each component to [-v_max, v_max]."""
    e = x_hat - x_nom
    ux = u_nom.x - (K_fb[0, 0] * e.x + K_fb[0, 1] * e.y)
    uy = u_nom.y - (K_fb[1, 0] * e.x + K_fb[1, 1] * e.y)
    return Vec2(
        min(v_max, max(-v_max, ux)),
        min(v_max, max(-v_max, uy)),
    )


def step_true_state(
    x_true: Vec2, u_total: Vec2, B: np.ndarray, Q: np.ndarray, rng: np.random.Generator
) -> Vec2:
    """Advance the true state with process noise w ~ N(0, Q) from the given stream."""
    w = sample_gaussian_2d(Q, rng)
    return Vec2(
        x_true.x + B[0, 0] * u_total.x + B[0, 1] * u_total.y + w.x,
        x_true.y + B[1, 0] * u_total.x + B[1, 1] * u_total.y + w.y,
    )


def sample_measurement(x_true: Vec2, R: np.ndarray, rng: np.random.Generator) -> Vec2:
    """Position measurement z = x_true + v, v ~ N(0, R)."""
    v = sample_gaussian_2d(R, rng)
    return Vec2(x_true.x + v.x, x_true.y + v.y)


def sample_gaussian_2d(cov: np.ndarray, rng: np.random.Generator) -> Vec2:
    """Draw one sample from N(0, cov).

    Always consumes exactly two normals from the stream so noise sequences
    stay aligned when a covariance is zero.
    """
    g = rng.standard_normal(2)
    if cov[0, 0] == 0.0 and cov[1, 1] == 0.0 and cov[0, 1] == 0.0:
        return Vec2(0.0, 0.0)
    s = sqrt_psd_2x2(cov)
    return Vec2(s[0, 0] * g[0] + s[0, 1] * g[1], s[1, 0] * g[0] + s[1, 1] * g[1])


def update_dispersion(
    Lambda: np.ndarray,
    P_bar: np.ndarray,
    G: np.ndarray,
    P_new: np.ndarray,
    B: np.ndarray,
    K_fb: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Dispersion update Lambda' = (I - B K) Lambda (I - B K)^T + G P_bar.

    Returns (Lambda', Sigma' = P_new + Lambda', largest eigenvalue of Sigma').
    """
    F = I2 - B @ K_fb
    Lam = F @ Lambda @ F.T + G @ P_bar
    Lam = 0.5 * (Lam + Lam.T)
    Sigma = P_new + Lam
    return Lam, Sigma, eig_max_2x2(Sigma)


def advance_nominal(x_nom: Vec2, u_nom: Vec2, B: np.ndarray) -> Vec2:
    """Nominal recursion x_nom' = x_nom + B u_nom."""
    return Vec2(
        x_nom.x + B[0, 0] * u_nom.x + B[0, 1] * u_nom.y,
        x_nom.y + B[1, 0] * u_nom.x + B[1, 1] * u_nom.y,
    )


def robot_noise_stream(episode_seed: int, robot_index: int) -> np.random.Generator:
    """Per-robot noise stream; adding robots never reshuffles existing streams."""
    ss = np.random.SeedSequence(entropy=episode_seed, spawn_key=(robot_index,))
    return np.random.default_rng(ss)


def steady_state_scalar(
    dt: float, k_fb: float, q: float, r: float, tol: float = 1e-10, max_iter: int = 100000
) -> tuple[float, float, float]:
    """Fixed point (P*, Lambda*, Sigma*) of the scalar covariance recursion.

    Iterates P' = (P+q) - (P+q)^2/(P+q+r) and
    Lambda' = (1 - dt k)^2 Lambda + G (P+q) until convergence.
    """
    p, lam = 0.1, 0.0
    f = (1.0 - dt * k_fb) ** 2
    for _ in range(max_iter):
        p_bar = p + q
        g = p_bar / (p_bar + r)
        p_new = p_bar - g * p_bar
        lam_new = f * lam + g * p_bar
        if abs(p_new - p) < tol and abs(lam_new - lam) < tol:
            p, lam = p_new, lam_new
            break
        p, lam = p_new, lam_new
    return p, lam, p + lam
