"""Numba-compiled inner loop for consensus epochs.

The kernel performs exactly the same arithmetic, in the same order, as the
pure-Python reference in consensus.consensus_round; tests assert bitwise
equality.  Falls back to a Python loop when numba is unavailable.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def deco(f):
            return f

        if args and callable(args[0]):
            return args[0]
        return deco


@njit(cache=True)
def consensus_epoch_kernel(
    W: np.ndarray,
    x: np.ndarray,
    m: np.ndarray,
    q: np.ndarray,
    y: np.ndarray,
    k1: float,
    k2: float,
    k3: float,
    mix: float,
    sigma: float,
    dt: float,
    rounds: int,
    y_hist: np.ndarray,
) -> None:
    """Run `rounds` synchronous update rounds in place.

    x: deflated power-iteration state, m/q: dynamic-average estimates of the
    network means of x and x^2 (input-feedforward form), y: spectral probe.
    y_hist must be (rounds+1, n) and receives the probe trajectory.
    """
    n = W.shape[0]
    Lx = np.empty(n)
    Lm = np.empty(n)
    Lq = np.empty(n)
    Ly = np.empty(n)
    for i in range(n):
        y_hist[0, i] = y[i]
    for r in range(rounds):
        for i in range(n):
            sx = 0.0
            sm = 0.0
            sq = 0.0
            sy = 0.0
            for j in range(n):
                a = W[i, j]
                if a > 0.0:
                    sx += a * (x[i] - x[j])
                    sm += a * (m[i] - m[j])
                    sq += a * (q[i] - q[j])
                    sy += a * (y[i] - y[j])
            Lx[i] = sx
            Lm[i] = sm
            Lq[i] = sq
            Ly[i] = sy
        for i in range(n):
            xn = x[i] + dt * (-k1 * m[i] - k2 * Lx[i] - k3 * (q[i] - 1.0) * x[i])
            mn = m[i] + (xn - x[i]) - mix * Lm[i]
            qn = q[i] + (xn * xn - x[i] * x[i]) - mix * Lq[i]
            yn = y[i] - sigma * Ly[i]
            x[i] = xn
            m[i] = mn
            q[i] = qn
            y[i] = yn
            y_hist[r + 1, i] = yn
