"""Metric-field contract and the differential kernels built on it.

Every geometric routine in the package talks to a metric through
:class:`MetricField`: a map from chart coordinates to SPD matrices with an
optional analytic first derivative. Christoffel symbols, geodesic
accelerations and the Hamiltonian gradient are computed here once and
reused by the solvers.
"""

import abc

import numpy as np

from .errors import SingularMetricError

SPD_RTOL = 1e-12


def as_point(x, dim=None):
    """Return ``x`` as a finite 1-d float array, optionally checking its length."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.ndim != 1:
        raise ValueError(f"chart point must be 1-d, got shape {x.shape}")
    if dim is not None and x.shape[0] != dim:
        raise ValueError(f"chart point has length {x.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(x)):
        raise ValueError("chart point has non-finite entries")
    return x


def fd_step(x):
    """Central-difference step ``1e-5 * (1 + ||x||_inf)``."""
    return 1e-5 * (1.0 + float(np.max(np.abs(x))))


def symmetrize(a):
    return 0.5 * (a + np.swapaxes(a, -1, -2))


class MetricField(abc.ABC):
    """A Riemannian metric expressed on a single global chart.

    Subclasses implement :meth:`_metric` (and optionally :meth:`_derivative`).
    Public evaluation symmetrizes the raw output so round-off in
    parametrized families never leaks into the solvers. Instances are
    treated as immutable and may be shared between threads.
    """

    dim: int
    # True when the metric is the same at every point (straight-line geodesics)
    flat = False

    @abc.abstractmethod
    def _metric(self, x):
        """Raw d x d metric matrix at ``x``."""

    def _derivative(self, x):
        """Analytic ``dg[i, j, k] = d_i g_jk`` or ``None`` when unavailable."""
        return None

    @property
    def has_derivative(self):
        return type(self)._derivative is not MetricField._derivative

    def metric_at(self, x):
        return symmetrize(np.asarray(self._metric(as_point(x, self.dim)), dtype=float))

    def derivative_at(self, x):
        d = self._derivative(as_point(x, self.dim))
        if d is None:
            return None
        return symmetrize(np.asarray(d, dtype=float))

    def _metric_and_derivative(self, x):
        """Raw metric and analytic derivative (or ``None``) in one call.

        Override when the two share expensive work.
        """
        return self._metric(x), self._derivative(x)

    def inner(self, x, v, w):
        """``g_x(v, w)``."""
        return float(np.asarray(v) @ self.metric_at(x) @ np.asarray(w))

    def norm(self, x, v):
        return float(np.sqrt(max(self.inner(x, v, v), 0.0)))


class FunctionMetric(MetricField):
    """Metric field from plain callables.

    Parameters
    ----------
    dim : int
        Chart dimension.
    metric : callable
        ``metric(x) -> (dim, dim) array``.
    derivative : callable, optional
        ``derivative(x) -> (dim, dim, dim) array`` with ``[i, j, k] = d_i g_jk``.
    """

    def __init__(self, dim, metric, derivative=None):
        self.dim = int(dim)
        self._metric_fn = metric
        self._derivative_fn = derivative

    def _metric(self, x):
        return self._metric_fn(x)

    def _derivative(self, x):
        if self._derivative_fn is None:
            return None
        return self._derivative_fn(x)

    @property
    def has_derivative(self):
        return self._derivative_fn is not None


class InverseMetric(MetricField):
    """The pointwise inverse field ``x -> g_x^{-1}`` of another field."""

    def __init__(self, base):
        self.base = base
        self.dim = base.dim

    def _metric(self, x):
        return metric_inverse(self.base, x)

    def _derivative(self, x):
        dg = self.base.derivative_at(x)
        if dg is None:
            return None
        ginv = metric_inverse(self.base, x)
        # d(G^{-1}) = -G^{-1} dG G^{-1}
        return -np.einsum("ab,ibc,cd->iad", ginv, dg, ginv)

    @property
    def has_derivative(self):
        return self.base.has_derivative


def check_spd(g):
    """Raise :class:`SingularMetricError` unless ``g`` is numerically SPD.

    Returns the eigen decomposition ``(w, V)`` for reuse.
    """
    if not np.all(np.isfinite(g)):
        raise SingularMetricError("metric has non-finite entries")
    w, v = np.linalg.eigh(g)
    if w[-1] <= 0 or w[0] <= SPD_RTOL * w[-1]:
        raise SingularMetricError(
            f"metric is not positive definite (eigenvalues {w[0]:.3e} .. {w[-1]:.3e})")
    return w, v


def metric_inverse(field, x):
    """Inverse of the metric matrix at ``x``."""
    g = field.metric_at(x)
    w, v = check_spd(g)
    return symmetrize((v / w) @ v.T)


def metric_derivatives(field, x, h=None):
    """First derivatives ``dg[i, j, k] = d_i g_jk`` of the metric at ``x``.

    Analytic derivatives are used when the field supplies them; otherwise
    central differences with step ``h`` (default :func:`fd_step`).
    """
    x = as_point(x, field.dim)
    d = field.derivative_at(x)
    if d is not None:
        return d
    return symmetrize(_fd_derivative(field, x, h))


def christoffel_from(ginv, dg):
    """Christoffel symbols ``gamma[k, i, j]`` from ``g^{-1}`` and ``d_i g_jk``."""
    # bracket[i, j, l] = d_i g_jl - d_l g_ij + d_j g_li
    bracket = dg + np.swapaxes(dg, 0, 1) - np.transpose(dg, (1, 2, 0))
    gamma = 0.5 * np.einsum("lk,ijl->kij", ginv, bracket)
    return symmetrize(gamma)


def _fd_derivative(field, x, h=None):
    if h is None:
        h = fd_step(x)
    dim = field.dim
    out = np.empty((dim, dim, dim))
    for i in range(dim):
        e = np.zeros(dim)
        e[i] = h
        out[i] = (symmetrize(np.asarray(field._metric(x + e), dtype=float))
                  - symmetrize(np.asarray(field._metric(x - e), dtype=float))) / (2.0 * h)
    return out


def local_geometry(field, x):
    """``(g, g^{-1}, dg)`` at an already validated point; hot-path helper."""
    g, dg = field._metric_and_derivative(x)
    g = symmetrize(np.asarray(g, dtype=float))
    if dg is None:
        dg = _fd_derivative(field, x)
    dg = symmetrize(np.asarray(dg, dtype=float))
    w, v = check_spd(g)
    return g, symmetrize((v / w) @ v.T), dg


def christoffel(field, x):
    """Christoffel symbols of the Levi-Civita connection at ``x``.

    Returns an array ``gamma`` with ``gamma[k, i, j]`` = Gamma^k_ij, symmetric
    in ``(i, j)``.
    """
    x = as_point(x, field.dim)
    return christoffel_from(metric_inverse(field, x), metric_derivatives(field, x))


def geodesic_acceleration(field, x, v):
    """``-Gamma^k_ij v^i v^j`` at ``(x, v)``."""
    _, ginv, dg = local_geometry(field, x)
    # Gamma^k_ij v^i v^j = g^{kl} (d_i g_jl v^i v^j - d_l g_ij v^i v^j / 2)
    a = v @ (v @ dg)
    b = (dg @ v) @ v
    return -ginv @ (a - 0.5 * b)


def hamiltonian(field, x, p):
    """``H(x, p) = p^T g_x^{-1} p / 2``."""
    return 0.5 * float(p @ metric_inverse(field, x) @ p)


def hamiltonian_grad_x(field, x, p):
    """``dH/dx_i = -u^T (d_i g) u / 2`` with ``u = g^{-1} p``."""
    _, ginv, dg = local_geometry(field, x)
    u = ginv @ p
    return -0.5 * ((dg @ u) @ u)
