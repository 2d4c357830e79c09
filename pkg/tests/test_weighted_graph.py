import math

import numpy as np
import pytest

from dcmu.geometry import Obstacle, Vec2
from dcmu.weighted_graph import (
    GraphParams,
    WorldView,
    build_graph,
    collision_clearance,
    collision_factor,
    comm_range_factor,
    conservative_range,
    edge_weight,
    edge_weight_gradient,
    fiedler_oracle,
    laplacian,
    los_clearance,
    los_factor,
    true_binary_connectivity,
)

P = GraphParams()  # rho=20, rho0=18, d_beta/d_gamma in [1,3], s=3.494, eps=0.01


def test_conservative_range_inflation():
    # 10 + 2 * 3.494 * sqrt(1)
    assert conservative_range(Vec2(0, 0), Vec2(10, 0), 1.0, 1.0, 3.494) == pytest.approx(16.988)
    assert conservative_range(Vec2(0, 0), Vec2(10, 0), 1.0, 1.0, 0.0) == pytest.approx(10.0)
    assert conservative_range(Vec2(1, 1), Vec2(1, 1), 0.0, 0.0, 3.494) == 0.0


def test_comm_range_factor_branches():
    assert comm_range_factor(18.0, 18.0, 20.0) == 1.0
    assert comm_range_factor(19.0, 18.0, 20.0) == pytest.approx(0.5)
    assert comm_range_factor(25.0, 18.0, 20.0) == 0.0
    assert comm_range_factor(0.0, 18.0, 20.0) == 1.0


def test_los_clearance_with_obstacle():
    # geometry drop of 3 m minus s*sqrt(max eig) = 3.494
    los = los_clearance(Vec2(0, 0), Vec2(10, 0), [Obstacle(Vec2(5, 4), 1.0)], 1.0, 1.0, 3.494)
    assert los.distance == pytest.approx(3.0 - 3.494)
    assert los.zeta == pytest.approx(0.5)
    assert los.x_beta.dist(Vec2(5, 3)) < 1e-12
    assert los.x_l == Vec2(5, 0)


def test_los_clearance_empty_world():
    los = los_clearance(Vec2(0, 0), Vec2(10, 0), [], 1.0, 1.0, 3.494)
    assert math.isinf(los.distance)


def test_los_clearance_deterministic_reduction():
    los = los_clearance(Vec2(0, 0), Vec2(10, 0), [Obstacle(Vec2(5, 4), 1.0)], 1.0, 1.0, 0.0)
    assert los.distance == pytest.approx(3.0)


def test_los_factor_branches():
    assert los_factor(2.0, 1.0, 3.0) == pytest.approx(0.5)
    assert los_factor(math.inf, 1.0, 3.0) == 1.0
    assert los_factor(0.9, 1.0, 3.0) == 0.0


def test_collision_clearance_robot_case():
    d = collision_clearance(0, [Vec2(0, 0), Vec2(10, 0)], [1.0, 1.0], 3.494, [])
    assert d.distance == pytest.approx(10.0 - 2 * 3.494)
    assert d.kind == "robot" and d.index == 1


def test_collision_clearance_obstacle_case():
    d = collision_clearance(0, [Vec2(0, 0)], [1.0], 3.494, [Obstacle(Vec2(0, 5), 1.0)])
    assert d.distance == pytest.approx(5.0 - 3.494 - 1.0)
    assert d.kind == "obstacle"


def test_collision_clearance_s_zero_reduction():
    d = collision_clearance(0, [Vec2(0, 0)], [1.0], 0.0, [Obstacle(Vec2(0, 5), 1.0)])
    assert d.distance == pytest.approx(4.0)


def test_collision_factor_values():
    assert collision_factor(2.0, 1.0, 3.0) == pytest.approx(0.5)
    assert collision_factor(3.012, 1.0, 3.0) == 1.0
    assert collision_factor(0.506, 1.0, 3.0) == 0.0


def test_edge_weight_composition():
    # far inside all flat branches: every factor 1
    view = WorldView([Vec2(0, 0), Vec2(8, 0)], [0.01, 0.01], [], P)
    e = edge_weight(0, 1, view)
    assert e.alpha == 1.0 and e.beta == 1.0
    assert e.gamma_i == 1.0 and e.gamma_j == 1.0
    assert e.a == 1.0
    assert e.grad_a_wrt_i == Vec2(0.0, 0.0)


def test_edge_weight_zero_when_any_factor_zero():
    # far out of range
    view = WorldView([Vec2(0, 0), Vec2(50, 0)], [0.0, 0.0], [], P)
    assert edge_weight(0, 1, view).a == 0.0


def test_edge_weight_product():
    # alpha = 0.5 via range taper, gammas = 1, beta = 1
    # need conservative range exactly 19: distance 19 with zero eigs
    view = WorldView([Vec2(0, 0), Vec2(19, 0)], [0.0, 0.0], [], P)
    e = edge_weight(0, 1, view)
    assert e.alpha == pytest.approx(0.5)
    assert e.a == pytest.approx(0.5 * e.beta * e.gamma_i * e.gamma_j)


def test_gradient_attraction_on_range_taper():
    # i at origin, j at +x, in the alpha taper: gradient points toward j
    view = WorldView([Vec2(0, 0), Vec2(19, 0)], [0.0, 0.0], [], P)
    g = edge_weight_gradient(0, 1, view)
    assert g.x > 0.0
    assert abs(g.y) < 1e-15


def test_gradient_zero_on_flat_branches():
    view = WorldView([Vec2(0, 0), Vec2(10, 0)], [0.01, 0.01], [], P)
    assert edge_weight_gradient(0, 1, view) == Vec2(0.0, 0.0)


def test_gradient_c1_at_taper_boundaries():
    # the sine term vanishes at both edges of the alpha taper
    for l_target in (18.0 + 1e-6, 20.0 - 1e-6):
        view = WorldView([Vec2(0, 0), Vec2(l_target, 0)], [0.0, 0.0], [], P)
        g = edge_weight_gradient(0, 1, view)
        assert g.norm() < 1e-5


def test_gradient_matches_finite_difference_random():
    from dcmu.gradcheck import run_gradcheck

    result = run_gradcheck(trials=120, seed=7)
    assert result.evaluated == 120
    assert result.max_rel_err < 1e-4


def test_gradient_gamma_j_term_only_when_target_is_i():
    # two robots close enough that each is the other's nearest collision
    # target, inside the gamma taper: the gamma_j term contributes
    view = WorldView([Vec2(0, 0), Vec2(9.0, 0)], [1.0, 1.0], [], P)
    # collision clearance = 9 - 2*3.494 = 2.012 -> taper
    cc = view.collision(1)
    assert cc.kind == "robot" and cc.index == 0
    g = edge_weight_gradient(0, 1, view)
    # both gamma terms plus alpha flat (l = 9 + 6.988 < 18): pure repulsion
    assert g.x < 0.0  # pushed away from j to raise the collision factors


def test_coincident_nominals_degrade_gracefully():
    view = WorldView([Vec2(0, 0), Vec2(0, 0)], [0.5, 0.5], [], P)
    e = edge_weight(0, 1, view)
    assert math.isfinite(e.a)
    assert e.grad_a_wrt_i == Vec2(0.0, 0.0)


def test_laplacian_k2():
    L = laplacian(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert np.array_equal(L, np.array([[1.0, -1.0], [-1.0, 1.0]]))


def test_laplacian_zero():
    assert np.array_equal(laplacian(np.zeros((3, 3))), np.zeros((3, 3)))


def test_laplacian_p3():
    A = np.zeros((3, 3))
    A[0, 1] = A[1, 0] = 1.0
    A[1, 2] = A[2, 1] = 1.0
    L = laplacian(A)
    assert np.array_equal(L, np.array([[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]]))


def test_laplacian_rejects_asymmetric():
    with pytest.raises(ValueError):
        laplacian(np.array([[0.0, 1.0], [0.5, 0.0]]))


def test_fiedler_complete_graphs():
    for n in range(2, 9):
        A = np.ones((n, n)) - np.eye(n)
        lam2, vec = fiedler_oracle(laplacian(A))
        assert lam2 == pytest.approx(n, abs=1e-9)
        assert np.linalg.norm(vec) == pytest.approx(1.0, abs=1e-9)


def test_fiedler_disconnected():
    A = np.zeros((4, 4))
    A[0, 1] = A[1, 0] = 1.0
    A[2, 3] = A[3, 2] = 1.0
    lam2, _ = fiedler_oracle(laplacian(A))
    assert lam2 == pytest.approx(0.0, abs=1e-9)


def test_fiedler_p3_path():
    A = np.zeros((3, 3))
    A[0, 1] = A[1, 0] = 1.0
    A[1, 2] = A[2, 1] = 1.0
    lam2, vec = fiedler_oracle(laplacian(A))
    assert lam2 == pytest.approx(1.0, abs=1e-9)
    L = laplacian(A)
    assert np.linalg.norm(L @ vec - lam2 * vec) < 1e-8
    assert abs(vec.sum()) < 1e-8


def _cubic_lambda2(L):
    """Independent characteristic-polynomial oracle for a 3x3 Laplacian.

    A Laplacian has lambda1 = 0 exactly, so the characteristic cubic deflates
    to t^2 - tr(L) t + e2 = 0 whose roots are {lambda2, lambda3}; lambda2 is
    taken as product/largest-root to avoid cancellation near zero.
    """
    tr = float(np.trace(L))
    e2 = 0.5 * (tr * tr - float(np.trace(L @ L)))  # lambda2 * lambda3
    disc = max(tr * tr - 4.0 * e2, 0.0)
    lam3 = 0.5 * (tr + math.sqrt(disc))
    if lam3 < 1e-300:
        return 0.0
    return e2 / lam3


def test_fiedler_matches_characteristic_polynomial_3x3():
    grid = [k / 8.0 for k in range(9)]
    for w01 in grid:
        for w02 in grid:
            for w12 in grid:
                A = np.array(
                    [[0.0, w01, w02], [w01, 0.0, w12], [w02, w12, 0.0]]
                )
                L = laplacian(A)
                lam2, _ = fiedler_oracle(L)
                assert lam2 == pytest.approx(_cubic_lambda2(L), abs=1e-9)


def test_lambda2_monotone_in_edge_weights():
    rng = np.random.default_rng(17)
    for _ in range(100):
        A = rng.uniform(0.0, 1.0, (4, 4))
        A = np.triu(A, 1)
        A = A + A.T
        lam2, _ = fiedler_oracle(laplacian(A))
        i, j = sorted(rng.choice(4, size=2, replace=False))
        bump = rng.uniform(0.0, 1.0 - A[i, j])
        A2 = A.copy()
        A2[i, j] += bump
        A2[j, i] += bump
        lam2_b, _ = fiedler_oracle(laplacian(A2))
        assert lam2_b >= lam2 - 1e-9


def test_true_connectivity_k2():
    A, lam2 = true_binary_connectivity([Vec2(0, 0), Vec2(5, 0)], [], P)
    assert A[0, 1] == 1.0
    assert lam2 == pytest.approx(2.0, abs=1e-12)


def test_true_connectivity_range_violated():
    A, lam2 = true_binary_connectivity([Vec2(0, 0), Vec2(25, 0)], [], P)
    assert A[0, 1] == 0.0
    assert lam2 == pytest.approx(0.0, abs=1e-12)


def test_true_connectivity_los_violated():
    A, lam2 = true_binary_connectivity(
        [Vec2(0, 0), Vec2(5, 0)], [Obstacle(Vec2(2.5, 0.2), 1.0)], P
    )
    assert A[0, 1] == 0.0
    assert lam2 == pytest.approx(0.0, abs=1e-12)


def test_true_connectivity_collision_disconnects():
    # robots 0.5 m apart (< 2 * collision_radius = 1.0): both in collision
    A, lam2 = true_binary_connectivity([Vec2(0, 0), Vec2(0.5, 0)], [], P)
    assert A[0, 1] == 0.0
    assert lam2 == 0.0


def test_true_connectivity_single_robot():
    A, lam2 = true_binary_connectivity([Vec2(0, 0)], [], P)
    assert A.shape == (1, 1)
    assert math.isinf(lam2)


def test_conservatism_sampling():
    # with Sigma = I and s = 3.494 the conservative range over-bounds the
    # sampled true distance in at least 99% of draws
    rng = np.random.default_rng(2024)
    xi, xj = Vec2(0, 0), Vec2(10, 0)
    l_bar = conservative_range(xi, xj, 1.0, 1.0, 3.494)
    n = 100_000
    di = rng.standard_normal((n, 2))
    dj = rng.standard_normal((n, 2))
    true_d = np.hypot(
        (xi.x + di[:, 0]) - (xj.x + dj[:, 0]),
        (xi.y + di[:, 1]) - (xj.y + dj[:, 1]),
    )
    assert np.mean(l_bar >= true_d) >= 0.99


def test_weighted_positive_implies_true_range_holds():
    # alpha > 0 forces the nominal distance below rho in obstacle-free worlds
    rng = np.random.default_rng(5)
    for _ in range(300):
        xi = Vec2(*rng.uniform(-30, 30, 2))
        xj = Vec2(*rng.uniform(-30, 30, 2))
        eigs = [rng.uniform(0.0, 1.5), rng.uniform(0.0, 1.5)]
        view = WorldView([xi, xj], eigs, [], P)
        e = edge_weight(0, 1, view)
        if e.a > 0.0:
            assert xi.dist(xj) < P.rho


def test_degenerate_fiedler_flagged():
    # equilateral triangle with equal weights: lambda2 = lambda3
    pts = [Vec2(0, 0), Vec2(10, 0), Vec2(5, 5 * math.sqrt(3))]
    view = WorldView(pts, [0.0, 0.0, 0.0], [], P)
    snap, _ = build_graph(view)
    assert snap.degenerate_fiedler


def test_build_graph_snapshot_invariants():
    rng = np.random.default_rng(23)
    for _ in range(20):
        n = int(rng.integers(2, 6))
        pts = [Vec2(*rng.uniform(-15, 15, 2)) for _ in range(n)]
        eigs = [rng.uniform(0.0, 1.0) for _ in range(n)]
        view = WorldView(pts, eigs, [], P)
        snap, edges = build_graph(view)
        assert np.array_equal(snap.A, snap.A.T)
        assert np.all(np.diag(snap.A) == 0.0)
        assert np.all(snap.A >= 0.0) and np.all(snap.A <= 1.0)
        assert np.max(np.abs(snap.L.sum(axis=1))) < 1e-12
        assert -1e-9 <= snap.lambda2 <= n + 1e-9
        if not snap.degenerate_fiedler:
            assert np.linalg.norm(snap.L @ snap.fiedler - snap.lambda2 * snap.fiedler) < 1e-8
        assert abs(snap.fiedler.sum()) < 1e-6 or snap.lambda2 < 1e-12
