"""Closed-form geometry of symmetric positive definite matrices.

The chart identifies a symmetric ``n x n`` matrix with the vector of its
upper triangle, off-diagonal entries scaled by ``sqrt(2)``; this makes the
chart an isometry for the Frobenius inner product, so the affine-invariant
metric at the identity is the identity matrix on the chart.
"""

import numpy as np

from .core import MetricField
from .errors import DomainError

EIG_FLOOR = 1e-300


class SpdChart:
    """Vectorization of symmetric ``n x n`` matrices into ``R^{n(n+1)/2}``."""

    def __init__(self, n):
        if n < 1:
            raise ValueError("matrix side must be >= 1")
        self.n = int(n)
        self.dim = self.n * (self.n + 1) // 2
        self.rows, self.cols = np.triu_indices(self.n)
        self.scale = np.where(self.rows == self.cols, 1.0, np.sqrt(2.0))
        basis = np.zeros((self.dim, self.n, self.n))
        for a, (i, j) in enumerate(zip(self.rows, self.cols)):
            if i == j:
                basis[a, i, i] = 1.0
            else:
                basis[a, i, j] = basis[a, j, i] = 1.0 / np.sqrt(2.0)
        # orthonormal basis E_a with unvec(x) = sum_a x_a E_a
        self.basis = basis

    def vec(self, M):
        M = np.asarray(M, dtype=float)
        return M[self.rows, self.cols] * self.scale

    def unvec(self, x):
        x = np.asarray(x, dtype=float)
        return np.einsum("a,aij->ij", x, self.basis)


def _eigh_sym(M):
    M = np.asarray(M, dtype=float)
    return np.linalg.eigh(0.5 * (M + M.T))


def _require_spd(M, what="matrix"):
    w, v = _eigh_sym(M)
    if not np.all(np.isfinite(w)) or w[0] <= 0:
        raise DomainError(f"{what} is not symmetric positive definite")
    return w, v


def sym_fn(M, fn):
    """Apply a scalar function to a symmetric matrix through its eigenvalues."""
    w, v = _eigh_sym(M)
    return (v * fn(w)) @ v.T


def spd_sqrt(M):
    w, v = _require_spd(M)
    return (v * np.sqrt(w)) @ v.T


def spd_invsqrt(M):
    w, v = _require_spd(M)
    return (v / np.sqrt(w)) @ v.T


def spd_log(M):
    w, v = _require_spd(M)
    return (v * np.log(np.maximum(w, EIG_FLOOR))) @ v.T


def sym_exp(S):
    return sym_fn(S, np.exp)


class SpdAffineMetric(MetricField):
    """Affine-invariant metric ``tr(M^{-1} W M^{-1} V)`` on the SPD chart.

    Chart points outside the SPD cone raise :class:`DomainError`.
    Derivatives are analytic.
    """

    def __init__(self, n):
        self.chart = SpdChart(n)
        self.n = self.chart.n
        self.dim = self.chart.dim

    def _inverse_point(self, x):
        M = self.chart.unvec(x)
        w, v = _eigh_sym(M)
        if w[0] <= 0:
            raise DomainError(f"chart point {x} is not an SPD matrix")
        return (v / w) @ v.T

    def _metric(self, x):
        B = self._inverse_point(x) @ self.chart.basis               # M^{-1} E_a
        return np.einsum("aij,bji->ab", B, B)

    def _derivative(self, x):
        return self._metric_and_derivative(x)[1]

    def _metric_and_derivative(self, x):
        B = self._inverse_point(x) @ self.chart.basis
        d, n = self.dim, self.n
        G = B.reshape(d, n * n) @ B.transpose(0, 2, 1).reshape(d, n * n).T
        # d_c G_ab = -tr(B_c B_a B_b) - tr(B_a B_c B_b)
        BB = (B[:, None] @ B[None, :]).reshape(d, d, n * n)      # (B_c B_a)_ik
        t = BB @ B.transpose(0, 2, 1).reshape(d, n * n).T          # [c, a, b]
        return G, -(t + np.transpose(t, (1, 0, 2)))


def spd_affine_metric_field(n):
    """Metric field of the affine-invariant structure on ``n x n`` SPD matrices."""
    return SpdAffineMetric(n)


def spd_affine_inner(M, V, W):
    Minv = np.linalg.inv(M)
    return float(np.trace(Minv @ V @ Minv @ W))


def spd_affine_distance(M1, M2):
    """``||log(M1^{-1/2} M2 M1^{-1/2})||_F``."""
    _require_spd(M2, "second argument")
    S = spd_invsqrt(M1)
    w, _ = _require_spd(S @ M2 @ S)
    return float(np.sqrt(np.sum(np.log(np.maximum(w, EIG_FLOOR)) ** 2)))


def spd_affine_exp(sigma, V, t=1.0):
    """Point at time ``t`` on the geodesic from ``sigma`` with velocity ``V``."""
    R = spd_sqrt(sigma)
    Ri = spd_invsqrt(sigma)
    return R @ sym_exp(t * Ri @ np.asarray(V, dtype=float) @ Ri) @ R


def spd_affine_log(sigma, M):
    """Inverse of :func:`spd_affine_exp` at ``t = 1``."""
    R = spd_sqrt(sigma)
    Ri = spd_invsqrt(sigma)
    return R @ spd_log(Ri @ M @ Ri) @ R


def spd_affine_transport(sigma, V, W, t=1.0):
    """Transport of ``W`` from ``sigma`` along the geodesic with velocity ``V``.

    ``exp(t V sigma^{-1} / 2) W exp(t sigma^{-1} V / 2)``.
    """
    from scipy.linalg import expm

    _require_spd(sigma)
    sinv = np.linalg.inv(sigma)
    V = np.asarray(V, dtype=float)
    E = expm(0.5 * t * V @ sinv)
    out = E @ np.asarray(W, dtype=float) @ E.T
    return 0.5 * (out + out.T)


def log_euclidean_distance(M1, M2):
    """``||log M1 - log M2||_F``."""
    return float(np.linalg.norm(spd_log(M1) - spd_log(M2), "fro"))
