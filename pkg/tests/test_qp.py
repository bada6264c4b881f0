from __future__ import annotations

import numpy as np
import pytest

from tailsitter_hmpc.qp import QpError, kkt_residual, qp_solve


def projected_gradient(H, g, lb, ub, tol=1e-10, max_iter=500_000):
    """Accelerated projected gradient; independent reference solver."""
    L = np.linalg.eigvalsh(H)[-1]
    z = np.clip(np.zeros_like(g), lb, ub)
    y, t = z.copy(), 1.0
    for _ in range(max_iter):
        z_new = np.clip(y - (H @ y + g) / L, lb, ub)
        if np.max(np.abs(z_new - z)) < tol * 1e-3:
            # fixed-point check on the plain projected step
            if np.max(np.abs(np.clip(z_new - (H @ z_new + g) / L, lb, ub) - z_new)) < tol:
                return z_new
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        y = z_new + (t - 1) / t_new * (z_new - z)
        z, t = z_new, t_new
    raise RuntimeError("oracle did not converge")


def _random_problem(rng):
    n = int(rng.integers(1, 13))
    A = rng.normal(size=(n, n))
    H = A @ A.T + rng.uniform(0.05, 1.0) * np.eye(n)
    g = rng.normal(scale=3.0, size=n)
    lb = rng.uniform(-2.0, 0.0, n)
    ub = lb + rng.uniform(0.0, 2.5, n)
    return H, g, lb, ub


def test_hand_case_both_bounds_active():
    r = qp_solve(np.eye(2), np.array([-1.0, -1.0]), np.zeros(2), np.full(2, 0.5))
    np.testing.assert_allclose(r.z, [0.5, 0.5])
    assert list(r.active) == [1, 1]


def test_unconstrained_case():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(6, 6))
    H = A @ A.T + np.eye(6)
    g = rng.normal(size=6)
    r = qp_solve(H, g, np.full(6, -1e6), np.full(6, 1e6))
    np.testing.assert_allclose(r.z, -np.linalg.solve(H, g), atol=1e-10)
    assert not r.active.any()


def test_matches_projected_gradient_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        H, g, lb, ub = _random_problem(rng)
        r = qp_solve(H, g, lb, ub)
        assert r.status == "solved"
        assert np.max(np.abs(r.z - projected_gradient(H, g, lb, ub))) < 1e-7
        assert r.kkt <= 1e-8
        # complementary slackness for the reported working set
        assert np.all(r.z[r.active < 0] == lb[r.active < 0])
        assert np.all(r.z[r.active > 0] == ub[r.active > 0])


def test_warm_start_does_not_add_iterations():
    rng = np.random.default_rng(7)
    for _ in range(50):
        H, g, lb, ub = _random_problem(rng)
        cold = qp_solve(H, g, lb, ub)
        warm = qp_solve(H, g, lb, ub, warm_active_set=cold.active)
        assert warm.iterations <= cold.iterations
        np.testing.assert_allclose(warm.z, cold.z, atol=1e-10)


def test_kkt_residual_detects_violation():
    H, g = np.eye(2), np.array([-1.0, 1.0])
    assert kkt_residual(H, g, -np.ones(2), np.ones(2), np.zeros(2), np.zeros(2, dtype=np.int8)) == 1.0


def test_invalid_problems_raise():
    with pytest.raises(QpError):
        qp_solve(np.array([[1.0, 2.0], [2.0, 1.0]]), np.zeros(2), -np.ones(2), np.ones(2))
    with pytest.raises(QpError):
        qp_solve(np.eye(2), np.zeros(2), np.ones(2), np.zeros(2))
    with pytest.raises(QpError):
        qp_solve(np.eye(2), np.array([np.nan, 0.0]), -np.ones(2), np.ones(2))
