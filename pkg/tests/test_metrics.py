import numpy as np
import pytest

from riemetric import (ConstantMetric, DensityMetric, KernelMetric, PullbackMetric, RankDeficiencyError,
                       ShapeError, VoronoiMetric, map_induced_distance, pack_params, unpack_params)
from riemetric.core import metric_derivatives
from riemetric import FunctionMetric

from conftest import random_spd


def circle(theta):
    t = np.atleast_1d(theta)[0]
    return np.array([np.cos(t), np.sin(t)])


class TestConstant:
    def test_identity(self):
        g = ConstantMetric.identity(3)
        assert np.array_equal(g.metric_at([5.0, -1.0, 2.0]), np.eye(3))

    def test_factor(self):
        g = ConstantMetric([[2.0, 0.0], [0.0, 1.0]])
        assert np.array_equal(g.metric_at([0.0, 0.0]), np.diag([4.0, 1.0]))

    def test_distance(self):
        g = ConstantMetric([[2.0, 0.0], [0.0, 1.0]])
        assert g.distance([0, 0], [1, 1]) == pytest.approx(np.sqrt(5.0), abs=1e-15)
        np.testing.assert_allclose(g.pairwise_distances([[0, 0], [1, 0]], [[1, 1], [1, 0]]), [np.sqrt(5), 0])

    def test_bit_identical_across_points(self):
        rng = np.random.default_rng(0)
        g = ConstantMetric(rng.standard_normal((3, 3)), eps=0.1)
        a, b = g.metric_at(rng.standard_normal(3)), g.metric_at(100 * rng.standard_normal(3))
        assert np.array_equal(a, b)
        assert np.linalg.eigvalsh(a).min() > 0

    def test_orthogonal_gauge(self):
        rng = np.random.default_rng(1)
        A = rng.standard_normal((3, 3))
        Q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        np.testing.assert_allclose(ConstantMetric(Q @ A).G, ConstantMetric(A).G, atol=1e-12)

    def test_packing(self):
        g = ConstantMetric.identity(3)
        assert pack_params(g).shape == (9,)
        h = unpack_params(g, pack_params(g))
        assert np.array_equal(h.metric_at(np.zeros(3)), g.metric_at(np.zeros(3)))
        with pytest.raises(ShapeError):
            g.with_params(np.zeros(4))

    def test_matrix_parametrization(self):
        G = np.array([[2.0, 0.5], [0.5, 1.0]])
        g = ConstantMetric.from_matrix(G, parametrization="matrix")
        assert np.array_equal(g.G, G)
        assert np.array_equal(g.params(), G.ravel())

    def test_bad_inputs(self):
        with pytest.raises(ShapeError):
            ConstantMetric(np.ones((2, 3)))
        with pytest.raises(ValueError):
            ConstantMetric(np.eye(2), eps=-1)
        with pytest.raises(ValueError):
            ConstantMetric.identity(2).metric_at([1.0, 2.0, 3.0])


class TestVoronoi:
    def test_single_center(self):
        M = np.array([[2.0, 0.3], [0.3, 1.0]])
        v = VoronoiMetric([[0.0, 0.0]], [M])
        np.testing.assert_allclose(v.metric_at([10.0, -3.0]), M, atol=1e-15)

    def test_nearest_and_tie(self):
        v = VoronoiMetric([[0.0], [1.0]], [[[1.0]], [[5.0]]])
        assert v.metric_at([0.4])[0, 0] == pytest.approx(1.0)
        assert v.metric_at([0.5])[0, 0] == pytest.approx(1.0)
        assert v.metric_at([0.6])[0, 0] == pytest.approx(5.0)

    def test_round_trip(self):
        rng = np.random.default_rng(2)
        v = VoronoiMetric(rng.standard_normal((3, 2)), [random_spd(rng, 2) for _ in range(3)])
        theta = v.params()
        assert np.array_equal(v.with_params(theta).params(), theta)


class TestKernel:
    def test_at_center(self):
        M = np.array([[2.0, 0.3], [0.3, 1.0]])
        k = KernelMetric([[1.0, 2.0]], [M], sigma=0.7)
        np.testing.assert_allclose(k.metric_at([1.0, 2.0]), M, atol=1e-15)

    def test_far_field(self):
        k = KernelMetric([[0.0, 0.0]], [np.eye(2)], sigma=0.5, eps=0.3)
        np.testing.assert_allclose(k.metric_at([20 * 0.5, 0.0]), 0.3 * np.eye(2), atol=1e-12)

    def test_two_centers(self):
        sigma, eps = 0.8, 0.05
        k = KernelMetric([[-sigma, 0.0], [sigma, 0.0]], [np.eye(2), np.eye(2)], sigma=sigma, eps=eps)
        np.testing.assert_allclose(k.metric_at([0.0, 0.0]), (2 * np.exp(-1.0) + eps) * np.eye(2), atol=1e-14)

    def test_voronoi_limit(self):
        centers = np.array([[0.0, 0.0], [1.0, 0.0]])
        locals_ = [np.eye(2), np.diag([3.0, 2.0])]
        sigma = 1.0 / 10
        k = KernelMetric(centers, locals_, sigma=sigma)
        v = VoronoiMetric(centers, locals_)
        x = np.array([0.1, 0.05])
        kx = k.metric_at(x)
        w = np.exp(-np.sum(x ** 2) / sigma ** 2)
        dominant = w * locals_[0]
        assert np.abs(kx - dominant).max() / np.abs(dominant).max() < 1e-6
        np.testing.assert_allclose(kx / w, v.metric_at(x), rtol=1e-6)

    def test_normalized_derivative(self):
        k = KernelMetric([[0.0, 0.0], [1.0, 1.0]], [np.eye(2), np.diag([2.0, 0.5])], sigma=0.9,
                         eps=0.01, normalize=True)
        x = np.array([0.3, 0.6])
        np.testing.assert_allclose(k.derivative_at(x), metric_derivatives(FunctionMetric(2, k.metric_at), x),
                                   atol=1e-8)
        assert np.trace(k.metric_at([0.5, 0.5])) == pytest.approx(0.5 * 2 + 0.5 * 2.5 + 0.02)

    def test_packing(self):
        k = KernelMetric([[0.0, 0.0], [1.0, 1.0]], [np.eye(2), np.diag([2.0, 0.5])], sigma=0.9, eps=0.01)
        theta = k.params()
        assert theta.shape == (7,)
        assert theta[-1] == pytest.approx(np.log(0.9))
        assert np.array_equal(k.with_params(theta).params(), theta)

    def test_sensitivity(self):
        k = KernelMetric([[0.0, 0.0], [1.0, 1.0]], [np.eye(2), np.diag([2.0, 0.5])], sigma=0.9, eps=0.01)
        probes = np.random.default_rng(0).uniform(-1, 2, (10, 2))
        theta = k.params()
        for i in range(len(theta)):
            t2 = theta.copy()
            t2[i] += 1e-3
            k2 = k.with_params(t2)
            assert max(np.abs(k2.metric_at(p) - k.metric_at(p)).max() for p in probes) > 0


class TestDensity:
    def test_far(self):
        d = DensityMetric([[0.0, 0.0], [0.5, 0.2]], sigma=0.3, eps=0.02)
        np.testing.assert_allclose(d.metric_at([6.0, 6.0]), np.eye(2) / 0.02, atol=1e-10)

    def test_at_single_anchor(self):
        d = DensityMetric([[0.0, 0.0]], sigma=1.0, eps=0.1)
        np.testing.assert_allclose(d.metric_at([0.0, 0.0]), 10.0 * np.eye(2), rtol=1e-15)

    def test_scalar_value(self):
        sigma, eps = 0.7, 0.01
        d = DensityMetric([[0.0]], sigma=sigma, eps=eps)
        h = sigma ** 2 * np.exp(-0.5)
        assert d.metric_at([sigma])[0, 0] == pytest.approx(1.0 / (h + eps), rel=1e-14)

    def test_derivative(self, moons_field):
        x = np.array([0.2, 0.4])
        np.testing.assert_allclose(moons_field.derivative_at(x),
                                   metric_derivatives(FunctionMetric(2, moons_field.metric_at), x),
                                   rtol=1e-6, atol=1e-6)

    def test_defaults_and_packing(self):
        pts = np.array([[0.0, 0.0], [3.0, 4.0], [0.0, 1.0]])
        d = DensityMetric(pts)
        assert d.sigma == pytest.approx(np.median([5.0, 1.0, np.sqrt(18.0)]))
        assert d.eps == pytest.approx(1e-2)
        theta = d.params()
        assert np.array_equal(d.with_params(theta).params(), theta)
        with pytest.raises(ValueError):
            DensityMetric(pts, eps=0.0)

    def test_subsample_is_seeded(self):
        pts = np.random.default_rng(0).standard_normal((40, 2))
        a = DensityMetric(pts, subsample=10, seed=3)
        b = DensityMetric(pts, subsample=10, seed=3)
        assert len(a.anchors) == 10 and np.array_equal(a.anchors, b.anchors)


class TestPullback:
    def test_identity(self):
        p = PullbackMetric(lambda x: x, 2, target=ConstantMetric.identity(2))
        np.testing.assert_allclose(p.metric_at([0.3, 0.1]), np.eye(2), atol=1e-9)

    def test_circle(self):
        # central differences carry an O(h^2) truncation error, h = 1e-5 (1 + |t|)
        p = PullbackMetric(circle, 1)
        exact = PullbackMetric(circle, 1, jacobian=lambda t: [[-np.sin(t[0])], [np.cos(t[0])]])
        for t in np.linspace(0, 2 * np.pi, 7):
            assert p.metric_at([t])[0, 0] == pytest.approx(1.0, abs=1e-8)
            assert exact.metric_at([t])[0, 0] == pytest.approx(1.0, abs=1e-15)

    def test_doubling(self):
        p = PullbackMetric(lambda x: 2 * x, 1)
        assert p.metric_at([0.4])[0, 0] == pytest.approx(4.0, rel=1e-10)
        q = PullbackMetric(lambda x: 2 * x, 1, jacobian=lambda x: [[2.0]])
        assert q.metric_at([0.4])[0, 0] == 4.0

    def test_target_metric(self):
        p = PullbackMetric(lambda x: x, 2, target=ConstantMetric([[2.0, 0.0], [0.0, 1.0]]),
                           jacobian=lambda x: np.eye(2))
        assert np.array_equal(p.metric_at([1.0, 1.0]), np.diag([4.0, 1.0]))

    def test_rank_deficient(self):
        p = PullbackMetric(lambda x: np.array([x[0] + x[1], x[0] + x[1]]), 2)
        with pytest.raises(RankDeficiencyError):
            p.metric_at([0.1, 0.2])


def test_map_induced_distance():
    assert map_induced_distance(circle, [0.3], [0.3]) == 0.0
    assert map_induced_distance(lambda x: np.asarray(x), [0.0, 0.0], [3.0, 4.0]) == pytest.approx(5.0)
    assert map_induced_distance(circle, [0.0], [np.pi]) == pytest.approx(2.0, abs=1e-15)
    assert map_induced_distance(circle, [0.0], [np.pi]) < np.pi


def test_families_symmetric_and_positive():
    rng = np.random.default_rng(7)
    pts = rng.uniform(-3, 3, (1000, 2))
    fields = [
        ConstantMetric(rng.standard_normal((2, 2)), eps=1e-3),
        KernelMetric(rng.standard_normal((4, 2)), [random_spd(rng, 2) for _ in range(4)], sigma=0.8, eps=1e-3),
        DensityMetric(rng.standard_normal((30, 2)), eps=1e-2),
        PullbackMetric(lambda x: np.array([x[0], x[1], x[0] * x[1]]), 2,
                       jacobian=lambda x: np.array([[1.0, 0.0], [0.0, 1.0], [x[1], x[0]]])),
    ]
    for f in fields:
        for x in pts:
            g = f.metric_at(x)
            assert np.abs(g - g.T).max() <= 1e-10
            assert np.linalg.eigvalsh(g).min() > 0
