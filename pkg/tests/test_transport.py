import numpy as np
import pytest

from riemetric import (ConstantMetric, SolverConfig, exp_map, exp_parallelize, fanning_scheme,
                       parallel_transport_ode, pole_ladder, schild_ladder)
from riemetric.geodesic import exp_endpoint
from riemetric.spd import spd_affine_exp, spd_affine_transport
from riemetric.transport import curve_at, transport_along

from conftest import MOON_X

S = np.array([[2.0, 0.3], [0.3, 1.0]])
V = np.array([[0.5, 0.2], [0.2, -0.4]])
W = np.array([[0.3, -0.1], [-0.1, 0.6]])


def gnorm(field, x, w):
    return w @ field.metric_at(x) @ w


@pytest.fixture(scope="module")
def spd_case(spd2, chart2):
    path = exp_map(spd2, chart2.vec(S), chart2.vec(V))
    return path, chart2.vec(spd_affine_transport(S, V, W))


@pytest.fixture(scope="module")
def hyper_path(hyperbolic):
    return exp_map(hyperbolic, [0.0, 1.0], [0.5, 0.2], SolverConfig(steps=200))


class TestOde:
    def test_constant_identity(self):
        G = ConstantMetric([[2.0, 0.5], [0.0, 1.0]])
        path = exp_map(G, [0.0, 0.0], [1.0, 2.0])
        w = np.array([0.3, -0.7])
        np.testing.assert_allclose(parallel_transport_ode(G, path, w), w, atol=1e-15)

    def test_spd_closed_form(self, spd2, chart2, spd_case):
        path, exact = spd_case
        out = parallel_transport_ode(spd2, path, chart2.vec(W))
        assert np.linalg.norm(out - exact) < 1e-4 * np.linalg.norm(exact)

    def test_hyperbolic_conservation(self, hyperbolic, hyper_path):
        V0 = np.array([0.1, 0.2])
        Vs = parallel_transport_ode(hyperbolic, hyper_path, V0, return_all=True)
        n0 = gnorm(hyperbolic, hyper_path.start, V0)
        drift = max(abs(gnorm(hyperbolic, p, v) - n0) for p, v in zip(hyper_path.points, Vs)) / n0
        assert drift < 1e-6

    def test_transports_velocity_to_velocity(self, hyperbolic, hyper_path):
        out = parallel_transport_ode(hyperbolic, hyper_path, hyper_path.velocities[0])
        np.testing.assert_allclose(out, hyper_path.velocities[-1], atol=1e-7)


class TestLadders:
    def test_flat_ladders(self):
        G = ConstantMetric([[2.0, 0.5], [0.0, 1.0]])
        path = exp_map(G, [0.0, 0.0], [1.0, 2.0])
        w = np.array([0.3, -0.7])
        for rungs in (1, 5):
            np.testing.assert_allclose(schild_ladder(G, path, w, rungs), w, atol=1e-10)
            np.testing.assert_allclose(pole_ladder(G, path, w, rungs), w, atol=1e-10)

    def test_schild_first_order_on_spd(self, spd2, spd_case):
        path, exact = spd_case
        w0 = np.array([W[0, 0], np.sqrt(2) * W[0, 1], W[1, 1]])
        cfg = SolverConfig(steps=50)
        e4 = np.linalg.norm(schild_ladder(spd2, path, w0, 4, cfg) - exact)
        e16 = np.linalg.norm(schild_ladder(spd2, path, w0, 16, cfg) - exact)
        assert 3.0 <= e4 / e16 <= 5.0

    def test_pole_exact_on_spd(self, spd2, spd_case):
        path, exact = spd_case
        w0 = np.array([W[0, 0], np.sqrt(2) * W[0, 1], W[1, 1]])
        out = pole_ladder(spd2, path, w0, 2, SolverConfig(steps=50))
        assert np.linalg.norm(out - exact) < 1e-6

    def test_schild_hyperbolic_32_rungs(self, hyperbolic, hyper_path):
        V0 = np.array([0.1, 0.2])
        ref = parallel_transport_ode(hyperbolic, hyper_path, V0)
        out = schild_ladder(hyperbolic, hyper_path, V0, 32, SolverConfig(steps=50))
        assert np.linalg.norm(out - ref) < 1e-3
        assert abs(gnorm(hyperbolic, hyper_path.end, out) / gnorm(hyperbolic, hyper_path.start, V0) - 1) < 1e-3

    def test_pole_converges_on_density(self, moons_field):
        path = exp_map(moons_field, MOON_X, [-0.3, 0.2], SolverConfig(steps=64))
        V0 = np.array([0.05, 0.1])
        ref = parallel_transport_ode(moons_field, path, V0)
        e = [np.linalg.norm(pole_ladder(moons_field, path, V0, r, SolverConfig(steps=40)) - ref) for r in (2, 8)]
        assert e[1] < e[0]

    def test_rungs_validation(self, hyperbolic, hyper_path):
        with pytest.raises(ValueError):
            schild_ladder(hyperbolic, hyper_path, [0.1, 0.2], 0)
        with pytest.raises(ValueError):
            pole_ladder(hyperbolic, hyper_path, [0.1, 0.2], 10_000)


class TestFanning:
    def test_flat(self):
        G = ConstantMetric([[2.0, 0.5], [0.0, 1.0]])
        w = np.array([0.3, -0.7])
        np.testing.assert_allclose(fanning_scheme(G, [0.0, 0.0], [1.0, 2.0], w, 5), w, atol=1e-8)

    def test_spd_100_steps(self, spd2, chart2, spd_case):
        _, exact = spd_case
        w0 = chart2.vec(W)
        out = fanning_scheme(spd2, chart2.vec(S), chart2.vec(V), w0, 100)
        assert np.linalg.norm(out - exact) < 1e-3

    def test_order(self, hyperbolic, hyper_path):
        V0 = np.array([0.1, 0.2])
        ref = parallel_transport_ode(hyperbolic, hyper_path, V0)
        e = [np.linalg.norm(fanning_scheme(hyperbolic, [0.0, 1.0], [0.5, 0.2], V0, s) - ref) for s in (20, 40, 80)]
        orders = np.log2(np.array(e[:-1]) / np.array(e[1:]))
        assert np.all(orders >= 1.0)

    def test_isometry(self, hyperbolic):
        V0 = np.array([0.1, 0.2])
        out = fanning_scheme(hyperbolic, [0.0, 1.0], [0.5, 0.2], V0, 20)
        end = exp_endpoint(hyperbolic, [0.0, 1.0], [0.5, 0.2])
        assert abs(gnorm(hyperbolic, end, out) / gnorm(hyperbolic, [0.0, 1.0], V0) - 1) < 1e-3

    def test_validation(self, hyperbolic):
        with pytest.raises(ValueError):
            fanning_scheme(hyperbolic, [0.0, 1.0], [0.5, 0.2], [0.1, 0.2], 0)


class TestExpParallelize:
    def test_zero_offset(self, hyperbolic, hyper_path):
        for t in (0.0, 0.37, 1.0):
            np.testing.assert_array_equal(exp_parallelize(hyperbolic, hyper_path, 0.0, np.zeros(2), t),
                                          curve_at(hyper_path, t)[0])

    def test_flat_parallel_line(self):
        I = ConstantMetric.identity(2)
        path = exp_map(I, [0.0, 0.0], [1.0, 1.0])
        w = np.array([0.5, -0.5])
        np.testing.assert_allclose(exp_parallelize(I, path, 0.2, w, 0.8), [0.8, 0.8] + w, atol=1e-12)

    def test_composition(self, hyperbolic, hyper_path):
        w, t0 = np.array([0.05, -0.02]), 0.25
        for t in (0.1, 0.6, 0.9):
            moved = transport_along(hyperbolic, hyper_path, t0, t, w)
            expected = exp_endpoint(hyperbolic, curve_at(hyper_path, t)[0], moved)
            assert np.array_equal(exp_parallelize(hyperbolic, hyper_path, t0, w, t), expected)

    def test_backward_transport_inverts(self, hyperbolic, hyper_path):
        w = np.array([0.05, -0.02])
        there = transport_along(hyperbolic, hyper_path, 0.2, 0.9, w)
        back = transport_along(hyperbolic, hyper_path, 0.9, 0.2, there)
        np.testing.assert_allclose(back, w, atol=1e-8)


def test_all_methods_isometric_spd(spd2, chart2, spd_case):
    path, _ = spd_case
    w0 = chart2.vec(W)
    n0 = gnorm(spd2, path.start, w0)
    cfg = SolverConfig(steps=50)
    outs = [parallel_transport_ode(spd2, path, w0), schild_ladder(spd2, path, w0, 8, cfg),
            pole_ladder(spd2, path, w0, 8, cfg), fanning_scheme(spd2, path.start, path.velocities[0], w0, 50)]
    for out in outs:
        assert abs(gnorm(spd2, path.end, out) / n0 - 1) < 1e-3
    end = spd_affine_exp(S, V)
    np.testing.assert_allclose(chart2.unvec(path.end), end, atol=1e-7)
