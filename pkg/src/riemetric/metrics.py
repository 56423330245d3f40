"""Parametrized metric families.

Each family is an immutable :class:`~riemetric.core.MetricField` that also
exposes a flat parameter vector through :meth:`params` and
:meth:`with_params`, which is what the learner optimizes. Positive
hyperparameters live in log space and SPD blocks are stored through
factors, so every packed coordinate is unconstrained.
"""

import numpy as np

from .core import MetricField, as_point, fd_step
from .errors import RankDeficiencyError, ShapeError

_TRIL_CACHE = {}


def _tril(d):
    if d not in _TRIL_CACHE:
        _TRIL_CACHE[d] = np.tril_indices(d)
    return _TRIL_CACHE[d]


def _check_len(theta, n, name):
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (n,):
        raise ShapeError(f"{name} expects {n} parameters, got shape {theta.shape}")
    return theta


class ConstantMetric(MetricField):
    """Mahalanobis metric ``G = A^T A + eps * I``, the same at every point.

    ``parametrization="factor"`` (default) packs the entries of ``A``;
    ``"matrix"`` stores and packs ``G`` itself, which the learner keeps SPD by
    projection after each step.
    """

    flat = True

    def __init__(self, A, eps=0.0, parametrization="factor"):
        A = np.array(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ShapeError(f"factor must be square, got {A.shape}")
        if eps < 0:
            raise ValueError("eps must be >= 0")
        if parametrization not in ("factor", "matrix"):
            raise ValueError(f"unknown parametrization {parametrization!r}")
        self.A = A
        self.eps = float(eps)
        self.parametrization = parametrization
        self.dim = A.shape[0]
        if parametrization == "factor":
            G = A.T @ A
        else:
            G = 0.5 * (A + A.T)
        self.G = G + self.eps * np.eye(self.dim)
        self.G.setflags(write=False)

    @classmethod
    def from_matrix(cls, G, eps=0.0, parametrization="factor"):
        """Build from an SPD matrix (through its Cholesky factor by default)."""
        G = np.asarray(G, dtype=float)
        if parametrization == "matrix":
            return cls(G, eps=eps, parametrization="matrix")
        return cls(np.linalg.cholesky(G).T, eps=eps)

    @classmethod
    def identity(cls, dim):
        return cls(np.eye(dim))

    def _metric(self, x):
        return self.G

    def metric_at(self, x):
        as_point(x, self.dim)
        return self.G.copy()

    def _derivative(self, x):
        return np.zeros((self.dim,) * 3)

    def distance(self, x, y):
        """Closed-form Mahalanobis distance ``sqrt((x-y)^T G (x-y))``."""
        delta = as_point(x, self.dim) - as_point(y, self.dim)
        return float(np.sqrt(max(delta @ self.G @ delta, 0.0)))

    def pairwise_distances(self, X, Y):
        """Vectorized distances between matched rows of ``X`` and ``Y``."""
        delta = np.asarray(X, dtype=float) - np.asarray(Y, dtype=float)
        sq = np.einsum("ni,ij,nj->n", delta, self.G, delta)
        return np.sqrt(np.maximum(sq, 0.0))

    def params(self):
        return self.A.ravel().copy()

    def with_params(self, theta):
        theta = _check_len(theta, self.dim * self.dim, "ConstantMetric")
        return ConstantMetric(theta.reshape(self.dim, self.dim), self.eps, self.parametrization)


class VoronoiMetric(MetricField):
    """Piecewise-constant metric: the local matrix of the nearest center.

    Ties go to the lowest center index. Local matrices are stored through
    lower-triangular Cholesky factors.
    """

    def __init__(self, centers, locals_=None, factors=None):
        self.centers = np.atleast_2d(np.asarray(centers, dtype=float))
        if len(self.centers) == 0:
            raise ValueError("VoronoiMetric needs at least one center")
        self.dim = self.centers.shape[1]
        self.factors = _factors_from(locals_, factors, len(self.centers), self.dim)
        self.locals = np.einsum("nij,nkj->nik", self.factors, self.factors)

    def nearest(self, x):
        d2 = np.sum((self.centers - x) ** 2, axis=1)
        return int(np.argmin(d2))

    def _metric(self, x):
        return self.locals[self.nearest(x)]

    def _derivative(self, x):
        return np.zeros((self.dim,) * 3)

    def params(self):
        r, c = _tril(self.dim)
        return self.factors[:, r, c].ravel().copy()

    def with_params(self, theta):
        n_tri = self.dim * (self.dim + 1) // 2
        theta = _check_len(theta, len(self.centers) * n_tri, "VoronoiMetric")
        return VoronoiMetric(self.centers, factors=_unpack_tril(theta, len(self.centers), self.dim))


def _factors_from(locals_, factors, n, d):
    if factors is not None:
        factors = np.array(factors, dtype=float)
        r, c = np.triu_indices(d, 1)
        factors[:, r, c] = 0.0
    elif locals_ is not None:
        locals_ = np.asarray(locals_, dtype=float)
        factors = np.linalg.cholesky(locals_)
    else:
        factors = np.tile(np.eye(d), (n, 1, 1))
    if factors.shape != (n, d, d):
        raise ShapeError(f"expected {n} local {d}x{d} matrices, got {factors.shape}")
    return factors


def _unpack_tril(theta, n, d):
    r, c = _tril(d)
    out = np.zeros((n, d, d))
    out[:, r, c] = theta.reshape(n, -1)
    return out


class KernelMetric(MetricField):
    """Gaussian-kernel weighted sum of local SPD matrices plus a floor.

    ``g_x = sum_i g_i exp(-||x - c_i||^2 / sigma^2) + eps * I``. With
    ``normalize=True`` the weights are divided by their sum (partition of
    unity); the default keeps them unnormalized.

    Packed parameters: lower-triangular Cholesky entries of every ``g_i``
    followed by ``log sigma``. ``eps`` is a fixed floor.
    """

    def __init__(self, centers, locals_=None, sigma=1.0, eps=0.0, factors=None,
                 normalize=False, log_sigma=None):
        self.centers = np.atleast_2d(np.asarray(centers, dtype=float))
        self.dim = self.centers.shape[1]
        self.factors = _factors_from(locals_, factors, len(self.centers), self.dim)
        self.locals = np.einsum("nij,nkj->nik", self.factors, self.factors)
        self.log_sigma = float(np.log(sigma)) if log_sigma is None else float(log_sigma)
        self.sigma = float(np.exp(self.log_sigma))
        if not self.sigma > 0:
            raise ValueError("sigma must be > 0")
        if eps < 0:
            raise ValueError("eps must be >= 0")
        self.eps = float(eps)
        self.normalize = bool(normalize)

    def weights(self, x):
        diff = x - self.centers
        return np.exp(-np.sum(diff ** 2, axis=1) / self.sigma ** 2), diff

    def _metric(self, x):
        k, _ = self.weights(x)
        if self.normalize:
            k = k / k.sum()
        return np.einsum("n,nij->ij", k, self.locals) + self.eps * np.eye(self.dim)

    def _derivative(self, x):
        k, diff = self.weights(x)
        # dk[n, a] = d_a k_n
        dk = -2.0 / self.sigma ** 2 * diff * k[:, None]
        if self.normalize:
            s = k.sum()
            dk = dk / s - np.outer(k, dk.sum(axis=0)) / s ** 2
        return np.einsum("na,nij->aij", dk, self.locals)

    def params(self):
        r, c = _tril(self.dim)
        return np.concatenate([self.factors[:, r, c].ravel(), [self.log_sigma]])

    def with_params(self, theta):
        n_tri = self.dim * (self.dim + 1) // 2
        theta = _check_len(theta, len(self.centers) * n_tri + 1, "KernelMetric")
        return KernelMetric(self.centers, factors=_unpack_tril(theta[:-1], len(self.centers), self.dim),
                            eps=self.eps, normalize=self.normalize, log_sigma=theta[-1])


def median_pairwise_distance(points):
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if len(points) < 2:
        return 1.0
    diff = points[:, None, :] - points[None, :, :]
    d = np.sqrt(np.sum(diff ** 2, axis=-1))
    iu = np.triu_indices(len(points), 1)
    med = float(np.median(d[iu]))
    return med if med > 0 else 1.0


class DensityMetric(MetricField):
    """Data-driven diagonal metric that is cheap near the anchors.

    ``g_x = (diag(h(x)) + eps I)^{-1}`` where
    ``h_j(x) = sum_i (a_i^j - x^j)^2 exp(-||x - a_i||^2 / (2 sigma^2))``.
    Far from every anchor ``g_x`` tends to ``I / eps``.

    Parameters
    ----------
    anchors : (N, d) array
        Data points defining the metric.
    sigma : float, optional
        Kernel bandwidth; defaults to the median pairwise anchor distance.
    eps : float
        Strictly positive floor, default ``1e-2``.
    subsample : int, optional
        Keep a seeded random subset of this many anchors.
    """

    def __init__(self, anchors, sigma=None, eps=1e-2, subsample=None, seed=0,
                 log_sigma=None, log_eps=None):
        anchors = np.atleast_2d(np.asarray(anchors, dtype=float))
        if subsample is not None and subsample < len(anchors):
            idx = np.sort(np.random.default_rng(seed).choice(len(anchors), subsample, replace=False))
            anchors = anchors[idx]
        self.anchors = anchors
        self.dim = anchors.shape[1]
        if log_sigma is None:
            if sigma is None:
                sigma = median_pairwise_distance(anchors)
            if not sigma > 0:
                raise ValueError("sigma must be > 0")
            log_sigma = np.log(sigma)
        if log_eps is None:
            if not eps > 0:
                raise ValueError("DensityMetric requires eps > 0")
            log_eps = np.log(eps)
        self.log_sigma = float(log_sigma)
        self.log_eps = float(log_eps)
        self.sigma = float(np.exp(self.log_sigma))
        self.eps = float(np.exp(self.log_eps))

    def h(self, x):
        diff = self.anchors - x
        w = np.exp(-np.sum(diff ** 2, axis=1) / (2.0 * self.sigma ** 2))
        return w @ diff ** 2

    def _metric(self, x):
        return np.diag(1.0 / (self.h(x) + self.eps))

    def _derivative(self, x):
        diff = self.anchors - x                      # a_i - x
        w = np.exp(-np.sum(diff ** 2, axis=1) / (2.0 * self.sigma ** 2))
        h = w @ diff ** 2
        # dw_i / dx_a = w_i * (a_i - x)_a / sigma^2
        dw = w[:, None] * diff / self.sigma ** 2
        dh = dw.T @ diff ** 2                        # [a, j]
        dh -= 2.0 * np.diag(w @ diff)
        dgdiag = -dh / (h + self.eps) ** 2
        out = np.zeros((self.dim,) * 3)
        j = np.arange(self.dim)
        out[:, j, j] = dgdiag
        return out

    def params(self):
        return np.array([self.log_sigma, self.log_eps])

    def with_params(self, theta):
        theta = _check_len(theta, 2, "DensityMetric")
        return DensityMetric(self.anchors, log_sigma=theta[0], log_eps=theta[1])


def fd_jacobian(f, x):
    """Central-difference Jacobian of ``f`` at ``x`` (shape ``(m, d)``)."""
    x = np.asarray(x, dtype=float)
    h = fd_step(x)
    cols = []
    for i in range(x.shape[0]):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((np.asarray(f(x + e), dtype=float) - np.asarray(f(x - e), dtype=float)) / (2 * h))
    return np.stack(cols, axis=-1)


class PullbackMetric(MetricField):
    """Metric induced on a d-dimensional chart by a map into a target field.

    ``g_x = J(x)^T g_target(f(x)) J(x)``. The Jacobian is taken from
    ``jacobian`` if given, else by central differences.
    """

    RANK_RTOL = 1e-10

    def __init__(self, f, dim, target=None, jacobian=None):
        self.f = f
        self.dim = int(dim)
        self.target = target
        self.jacobian = jacobian

    def jacobian_at(self, x):
        if self.jacobian is not None:
            J = np.asarray(self.jacobian(x), dtype=float)
        else:
            J = fd_jacobian(self.f, x)
        return J.reshape(-1, self.dim)

    def _metric(self, x):
        J = self.jacobian_at(x)
        s = np.linalg.svd(J, compute_uv=False)
        if J.shape[0] < self.dim or s[-1] <= self.RANK_RTOL * s[0]:
            raise RankDeficiencyError(f"pullback Jacobian is rank deficient at {x}")
        if self.target is None:
            return J.T @ J
        return J.T @ self.target.metric_at(np.atleast_1d(self.f(x))) @ J


def map_induced_distance(f, x, y):
    """``||f(x) - f(y)||``: Euclidean distance between images under ``f``."""
    return float(np.linalg.norm(np.atleast_1d(f(x)) - np.atleast_1d(f(y))))


def pack_params(metric):
    """Flat unconstrained parameter vector of a metric family."""
    return metric.params()


def unpack_params(template, theta):
    """New instance of ``template``'s family carrying parameters ``theta``."""
    return template.with_params(theta)
