"""Small dense symmetric eigensolvers.

A deterministic cyclic-Jacobi decomposition for the graph Laplacians (n of
order 10, where reproducibility matters more than asymptotics) and closed-form
trace/determinant eigenvalues for the 2x2 covariance matrices.
"""

from __future__ import annotations

import math

import numpy as np

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


def eig_max_2x2(m: np.ndarray) -> float:
    """Largest eigenvalue of a symmetric 2x2 matrix, closed form."""
    a, b, c = m[0, 0], 0.5 * (m[0, 1] + m[1, 0]), m[1, 1]
    mean = 0.5 * (a + c)
    rad = math.hypot(0.5 * (a - c), b)
    return mean + rad


def eig_min_2x2(m: np.ndarray) -> float:
    """Smallest eigenvalue of a symmetric 2x2 matrix, closed form."""
    a, b, c = m[0, 0], 0.5 * (m[0, 1] + m[1, 0]), m[1, 1]
    mean = 0.5 * (a + c)
    rad = math.hypot(0.5 * (a - c), b)
    return mean - rad


def sqrt_psd_2x2(m: np.ndarray) -> np.ndarray:
    """Symmetric square root of a PSD 2x2 matrix (eigenvalue form).

    Tiny negative eigenvalues from roundoff are clamped to zero.
    """
    a, b, c = m[0, 0], 0.5 * (m[0, 1] + m[1, 0]), m[1, 1]
    if abs(b) < 1e-300:
        return np.array(
            [[math.sqrt(max(a, 0.0)), 0.0], [0.0, math.sqrt(max(c, 0.0))]]
        )
    mean = 0.5 * (a + c)
    rad = math.hypot(0.5 * (a - c), b)
    l1, l2 = max(mean + rad, 0.0), max(mean - rad, 0.0)
    # eigenvector for l1: (b, l1 - a) normalized
    vx, vy = b, l1 - a
    nrm = math.hypot(vx, vy)
    if nrm < 1e-300:
        vx, vy = 1.0, 0.0
    else:
        vx, vy = vx / nrm, vy / nrm
    s1, s2 = math.sqrt(l1), math.sqrt(l2)
    # V diag(s) V^T with V = [[vx, -vy], [vy, vx]]
    return np.array(
        [
            [s1 * vx * vx + s2 * vy * vy, (s1 - s2) * vx * vy],
            [(s1 - s2) * vx * vy, s1 * vy * vy + s2 * vx * vx],
        ]
    )


def jacobi_eigh(m: np.ndarray, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS):
    """Full eigendecomposition of a symmetric matrix by cyclic Jacobi sweeps.

    Deterministic: fixed (p, q) sweep order, rotations applied until the
    off-diagonal Frobenius norm falls below tol.  Returns (eigenvalues
    ascending, eigenvectors as columns); each eigenvector's sign is fixed so
    its first component larger than 1e-12 in magnitude is positive.
    """
    a = np.array(m, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    if n == 0:
        return np.empty(0), np.empty((0, 0))
    v = np.eye(n)
    if n == 1:
        return a.diagonal().copy(), v
    for _ in range(max_sweeps):
        # off-diagonal Frobenius norm, summed directly (no cancellation)
        aa = a.copy()
        np.fill_diagonal(aa, 0.0)
        off = math.sqrt(np.sum(aa * aa))
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < tol / (n * n):
                    continue
                theta = 0.5 * (a[q, q] - a[p, p]) / apq
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(1.0 + theta * theta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                # rotate rows/columns p and q of a
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    evals = a.diagonal().copy()
    order = np.argsort(evals, kind="stable")
    evals = evals[order]
    v = v[:, order]
    for k in range(n):
        col = v[:, k]
        for comp in col:
            if abs(comp) > 1e-12:
                if comp < 0:
                    v[:, k] = -col
                break
    return evals, v
