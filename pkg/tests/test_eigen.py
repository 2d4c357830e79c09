import numpy as np
import pytest

from dcmu.eigen import eig_max_2x2, eig_min_2x2, jacobi_eigh, sqrt_psd_2x2


def test_eig_2x2_matches_numpy():
    rng = np.random.default_rng(1)
    for _ in range(500):
        a = rng.uniform(-3, 3, (2, 2))
        m = a + a.T
        evals = np.linalg.eigvalsh(m)
        assert eig_max_2x2(m) == pytest.approx(evals[1], abs=1e-12)
        assert eig_min_2x2(m) == pytest.approx(evals[0], abs=1e-12)


def test_sqrt_psd_2x2_squares_back():
    rng = np.random.default_rng(2)
    for _ in range(200):
        a = rng.uniform(-2, 2, (2, 2))
        m = a @ a.T  # PSD
        s = sqrt_psd_2x2(m)
        assert np.allclose(s @ s, m, atol=1e-10)
        assert np.allclose(s, s.T)
    assert np.allclose(sqrt_psd_2x2(np.zeros((2, 2))), 0.0)


def test_jacobi_matches_numpy_eigh():
    rng = np.random.default_rng(3)
    for n in (2, 3, 5, 8):
        for _ in range(50):
            a = rng.uniform(-2, 2, (n, n))
            m = a + a.T
            evals, evecs = jacobi_eigh(m)
            ref = np.linalg.eigvalsh(m)
            assert np.allclose(evals, ref, atol=1e-9)
            # eigen equation and orthonormality
            assert np.allclose(m @ evecs, evecs @ np.diag(evals), atol=1e-8)
            assert np.allclose(evecs.T @ evecs, np.eye(n), atol=1e-10)


def test_jacobi_deterministic():
    rng = np.random.default_rng(4)
    a = rng.uniform(-1, 1, (6, 6))
    m = a + a.T
    e1, v1 = jacobi_eigh(m.copy())
    e2, v2 = jacobi_eigh(m.copy())
    assert np.array_equal(e1, e2)
    assert np.array_equal(v1, v2)


def test_jacobi_sign_convention():
    m = np.array([[1.0, -1.0], [-1.0, 1.0]])
    _, v = jacobi_eigh(m)
    for k in range(2):
        col = v[:, k]
        first = next(c for c in col if abs(c) > 1e-12)
        assert first > 0
