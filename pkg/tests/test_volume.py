import numpy as np
import pytest
from scipy import stats

from riemetric import ConstantMetric, EfficiencyError, FunctionMetric, sample_by_volume, volume_density


def quartic(x):
    return np.array([[(1 + x[0] ** 2) ** 2]])


def test_identity_density():
    assert volume_density(ConstantMetric.identity(3), [1.0, 2.0, 3.0]) == 1.0


def test_constant_density():
    G = ConstantMetric([[2.0, 0.5], [0.0, 1.5]])
    expected = np.sqrt(np.linalg.det(G.G))
    for x in np.random.default_rng(0).standard_normal((5, 2)):
        assert volume_density(G, x) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("y", [0.5, 1.0, 3.0])
def test_hyperbolic_density(hyperbolic, y):
    assert volume_density(hyperbolic, [0.7, y]) == pytest.approx(y ** -2, rel=1e-14)


def test_uniform_on_box():
    lo, hi = np.array([0.0, -1.0]), np.array([2.0, 3.0])
    X = sample_by_volume(ConstantMetric.identity(2), (lo, hi), 4000, seed=1)
    assert X.shape == (4000, 2)
    assert np.all((X >= lo) & (X <= hi))
    se = (hi - lo) / np.sqrt(12 * len(X))
    assert np.all(np.abs(X.mean(axis=0) - 0.5 * (lo + hi)) < 3 * se)


def test_quartic_ks():
    X = sample_by_volume(FunctionMetric(1, quartic), ([0.0], [1.0]), 10_000, seed=0)[:, 0]
    res = stats.kstest(X, lambda x: (x + x ** 3 / 3) / (4 / 3))
    assert res.pvalue > 0.05


def test_deterministic():
    f = FunctionMetric(1, quartic)
    a = sample_by_volume(f, ([0.0], [1.0]), 500, seed=7)
    b = sample_by_volume(f, ([0.0], [1.0]), 500, seed=7)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, sample_by_volume(f, ([0.0], [1.0]), 500, seed=8))


def test_efficiency_error():
    # a spike the grid scan sees, with negligible mass elsewhere
    spike = FunctionMetric(1, lambda x: np.array([[1e-20 + (1e12 if abs(x[0] - 0.5) < 1e-9 else 0.0)]]))
    with pytest.raises(EfficiencyError):
        sample_by_volume(spike, ([0.0], [1.0]), 10, grid_points=101)


def test_bad_box():
    with pytest.raises(ValueError):
        sample_by_volume(ConstantMetric.identity(1), ([1.0], [0.0]), 5)
