import json

import numpy as np
import pytest

from riemetric import (ConstantMetric, FitConfig, NonFiniteLossError, fd_gradient, fit, gen_aniso_grid,
                       project_spd)
from riemetric.datasets import nearest_triplets
from riemetric.objectives import triplet_violations

from conftest import mahalanobis_obs, normal_equations_G

G_STAR = np.diag([4.0, 1.0])


def squared_regression(field, obs):
    D = obs.y - obs.x
    return float(np.sum((obs.d_obs ** 2 - np.einsum("ni,ij,nj->n", D, field.G, D)) ** 2))


class TestProjection:
    def test_fixed_point(self):
        M = np.array([[2.0, 0.3], [0.3, 1.0]])
        np.testing.assert_allclose(project_spd(M, 0.01), M, atol=1e-12)

    def test_clamp(self):
        np.testing.assert_allclose(project_spd(np.diag([1.0, -1.0]), 0.01), np.diag([1.0, 0.01]), atol=1e-15)

    def test_symmetrize(self):
        np.testing.assert_allclose(project_spd([[1.0, 1.0], [0.0, 1.0]], 0.01), [[1.0, 0.5], [0.5, 1.0]], atol=1e-15)

    def test_floor_and_idempotent(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            P = project_spd(rng.standard_normal((3, 3)), 0.1)
            assert np.linalg.eigvalsh(P).min() >= 0.1 - 1e-12
            np.testing.assert_allclose(project_spd(P, 0.1 - 1e-9), P, atol=1e-14)


class TestFdGradient:
    def test_constant(self):
        assert np.array_equal(fd_gradient(lambda t: 3.0, np.array([1.0, 2.0])), np.zeros(2))

    def test_square(self):
        g = fd_gradient(lambda t: t[0] ** 2, np.array([3.0, -1.0]))
        np.testing.assert_allclose(g, [6.0, 0.0], atol=1e-7)

    def test_quadratic(self):
        rng = np.random.default_rng(1)
        Q = rng.standard_normal((4, 4))
        Q = Q + Q.T
        theta = rng.standard_normal(4)
        g = fd_gradient(lambda t: t @ Q @ t, theta)
        exact = 2 * Q @ theta
        assert np.linalg.norm(g - exact) <= 1e-6 * np.linalg.norm(exact)

    def test_second_order(self):
        f = lambda t: np.exp(np.sin(t[0]) * t[1])
        theta = np.array([0.7, 1.3])
        exact = np.exp(np.sin(0.7) * 1.3) * np.array([np.cos(0.7) * 1.3, np.sin(0.7)])
        e1 = np.linalg.norm(fd_gradient(f, theta, 1e-2) - exact)
        e2 = np.linalg.norm(fd_gradient(f, theta, 5e-3) - exact)
        assert e1 / e2 == pytest.approx(4.0, rel=0.05)

    def test_non_finite(self):
        f = lambda t: np.inf if t[1] > 1.0 else 0.0
        with pytest.raises(NonFiniteLossError) as info:
            fd_gradient(f, np.array([0.0, 1.0]), 0.1)
        assert info.value.coordinate == 1


@pytest.fixture(scope="module")
def obs():
    return mahalanobis_obs(G_STAR)


class TestFitConstant:
    def test_recovery(self, obs):
        rep = fit(ConstantMetric.identity(2), "distance", obs)
        assert rep.termination == "converged"
        assert np.linalg.norm(rep.metric.G - G_STAR) < 1e-3
        assert np.linalg.norm(rep.metric.G - normal_equations_G(obs)) < 1e-4
        assert len(rep.loss_history) == rep.n_iter + 1 == len(rep.grad_norm_history)

    def test_backtracking_monotone(self, obs):
        rep = fit(ConstantMetric.identity(2), "distance", obs, FitConfig(backtracking=True))
        assert np.all(np.diff(rep.loss_history) <= 0)
        assert np.linalg.norm(rep.metric.G - G_STAR) < 1e-3

    def test_already_optimal(self, obs):
        rep = fit(ConstantMetric.from_matrix(G_STAR), "distance", obs, FitConfig(tol=1e-5))
        assert rep.termination == "converged" and rep.n_iter <= 2

    def test_deterministic(self, obs):
        cfg = FitConfig(max_iter=50)
        a = fit(ConstantMetric.identity(2), "distance", obs, cfg)
        b = fit(ConstantMetric.identity(2), "distance", obs, cfg)
        assert a.loss_history == b.loss_history and np.array_equal(a.params, b.params)
        assert a.to_text(include_time=False) == b.to_text(include_time=False)

    def test_minibatch_deterministic(self, obs):
        cfg = FitConfig(max_iter=30, batch_size=32, seed=4)
        a = fit(ConstantMetric.identity(2), "distance", obs, cfg)
        b = fit(ConstantMetric.identity(2), "distance", obs, cfg)
        assert a.loss_history == b.loss_history
        assert a.final_loss < a.loss_history[0]

    def test_projection_safety(self, obs):
        seen = []

        def objective(field, data):
            seen.append(np.linalg.eigvalsh(field.G).min())
            return squared_regression(field, data)

        start = ConstantMetric.from_matrix(np.diag([0.05, 3.0]), parametrization="matrix")
        fit(start, objective, obs, FitConfig(max_iter=100, step_size=0.1, spd_floor=1e-3))
        assert min(seen) >= 1e-3 - 1e-12

    def test_convex_case_normal_equations(self):
        obs = mahalanobis_obs(G_STAR, seed=3, noise=0.05)
        start = ConstantMetric.from_matrix(np.eye(2), parametrization="matrix")
        rep = fit(start, squared_regression, obs)
        assert np.linalg.norm(rep.metric.G - normal_equations_G(obs)) < 1e-4

    def test_argmin_direction_invariant(self):
        obs = mahalanobis_obs(np.array([[3.0, 0.5], [0.5, 1.0]]), n=60, seed=5, noise=0.02)
        scaled = type(obs)(obs.x, obs.y, 2.0 * obs.d_obs)
        a = fit(ConstantMetric.identity(2), "distance", obs).metric.G
        b = fit(ConstantMetric.identity(2), "distance", scaled).metric.G
        np.testing.assert_allclose(a / np.linalg.norm(a), b / np.linalg.norm(b), atol=1e-5)
        np.testing.assert_allclose(b, 4 * a, rtol=1e-4)

    def test_divergence(self, obs):
        # unbounded below, like the sum-diff contrastive loss
        rep = fit(ConstantMetric.identity(2), lambda f, d: -float(np.sum(f.A ** 2)), obs,
                  FitConfig(step_size=50.0, max_iter=500))
        assert rep.termination == "error" and "diverged" in rep.message
        assert abs(rep.final_loss) <= 1e6 * abs(rep.loss_history[0])

    def test_report_serialization(self, obs):
        rep = fit(ConstantMetric.identity(2), "distance", obs, FitConfig(max_iter=5))
        doc = json.loads(rep.to_text())
        assert doc["format_version"] == 1 and doc["iterations"] == 5 and "wall_time" in doc
        assert "wall_time" not in json.loads(rep.to_text(include_time=False))
        lines = rep.loss_curve_text().splitlines()
        assert lines[0] == "iter,loss,grad_norm" and len(lines) == 7


def test_triplet_grid_zero_violations():
    grid = gen_aniso_grid(8)
    trip = nearest_triplets(grid)
    assert triplet_violations(ConstantMetric.identity(2), trip) > 0
    rep = fit(ConstantMetric.identity(2), "triplet", trip)
    assert rep.n_iter <= 2000
    assert triplet_violations(rep.metric, trip) == 0


def test_config_validation():
    for bad in (dict(max_iter=-1), dict(step_size=0), dict(tol=-1), dict(betas=(1.0, 0.9, 1e-8)),
                dict(fd_step=0.0), dict(batch_size=0), dict(spd_floor=0)):
        with pytest.raises(ValueError):
            FitConfig(**bad)
    assert FitConfig().replace(seed=3).seed == 3


def test_unknown_objective():
    with pytest.raises((ValueError, KeyError)):
        fit(ConstantMetric.identity(2), "telepathy", None)
