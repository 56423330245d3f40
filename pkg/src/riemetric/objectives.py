"""Metric-learning objectives and the distance backends they evaluate with.

A backend is a callable ``backend(field, X, Y) -> distances`` over matched
rows of ``X`` and ``Y``. ``"closed"`` is exact for constant metrics,
``"graph"`` measures shortest paths on a kNN graph over the query points
(plus optional support points), and ``"shooting"``, ``"bvp"`` and
``"curve"`` call the continuous solvers pair by pair.
"""

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.optimize import least_squares

from .core import InverseMetric
from .errors import RiemetricError
from .geodesic import DEFAULT_CONFIG, integrate_geodesic, riemannian_distance
from .graph import all_pairs_distances, build_knn_graph
from .metrics import ConstantMetric


@dataclass(frozen=True)
class PairSets:
    """Similar and dissimilar point pairs, each shaped ``(m, 2, d)``."""

    similar: np.ndarray
    dissimilar: np.ndarray

    def __post_init__(self):
        for name in ("similar", "dissimilar"):
            a = np.asarray(getattr(self, name), dtype=float)
            if a.size == 0:
                a = a.reshape(0, 2, 0)
            object.__setattr__(self, name, a)
        neg = self.dissimilar
        if len(neg) and np.any(np.all(neg[:, 0] == neg[:, 1], axis=1)):
            raise ValueError("a dissimilar pair holds two identical points")


@dataclass(frozen=True)
class TripletSet:
    """``(anchor, positive, negative)`` triplets shaped ``(m, 3, d)``."""

    triplets: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.triplets, dtype=float)
        if t.size == 0:
            t = t.reshape(0, 3, 0)
        if len(t) and np.any(np.all(t[:, 1] == t[:, 2], axis=1)):
            raise ValueError("a triplet has identical positive and negative")
        object.__setattr__(self, "triplets", t)


@dataclass(frozen=True)
class DistanceObservations:
    """Observed distances ``d_obs`` between rows of ``x`` and ``y``."""

    x: np.ndarray
    y: np.ndarray
    d_obs: np.ndarray
    weight: np.ndarray = None

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        y = np.atleast_2d(np.asarray(self.y, dtype=float))
        d = np.atleast_1d(np.asarray(self.d_obs, dtype=float))
        w = np.ones_like(d) if self.weight is None else np.atleast_1d(np.asarray(self.weight, dtype=float))
        if not (len(x) == len(y) == len(d) == len(w)):
            raise ValueError("x, y, d_obs and weight must have equal length")
        if np.any(~np.isfinite(d)) or np.any(d < 0):
            raise ValueError("observed distances must be finite and >= 0")
        if np.any(w <= 0):
            raise ValueError("weights must be > 0")
        for name, val in zip(("x", "y", "d_obs", "weight"), (x, y, d, w)):
            object.__setattr__(self, name, val)

    def swapped(self):
        return DistanceObservations(self.y, self.x, self.d_obs, self.weight)


@dataclass(frozen=True)
class TrajectorySet:
    """Timestamped point sequences; ``times[k]`` strictly increasing, length >= 2."""

    times: list
    points: list
    ids: list = dc_field(default=None)

    def __post_init__(self):
        times = [np.asarray(t, dtype=float) for t in self.times]
        points = [np.atleast_2d(np.asarray(p, dtype=float)) for p in self.points]
        if len(times) != len(points):
            raise ValueError("times and points must have the same number of trajectories")
        for t, p in zip(times, points):
            if len(t) < 2 or len(t) != len(p):
                raise ValueError("each trajectory needs >= 2 samples with matching timestamps")
            if np.any(np.diff(t) <= 0):
                raise ValueError("timestamps must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "points", points)
        ids = list(range(len(times))) if self.ids is None else list(self.ids)
        object.__setattr__(self, "ids", ids)

    def __len__(self):
        return len(self.times)


class SolverBackend:
    """Continuous-solver distances, pair by pair."""

    def __init__(self, method="shooting", cfg=DEFAULT_CONFIG):
        self.method = method
        self.cfg = cfg

    def __call__(self, field, X, Y):
        out = np.empty(len(X))
        for n, (x, y) in enumerate(zip(X, Y)):
            try:
                out[n] = riemannian_distance(field, x, y, self.method, self.cfg)
            except RiemetricError as exc:
                exc.pair = (np.array(x), np.array(y))
                exc.args = (f"{exc.args[0] if exc.args else exc} [pair {n}: {x} -> {y}]",)
                raise
        return out


class ClosedFormBackend:
    """Exact Mahalanobis distances; only valid for :class:`ConstantMetric`."""

    def __call__(self, field, X, Y):
        if not isinstance(field, ConstantMetric):
            raise TypeError("closed-form backend needs a ConstantMetric")
        return field.pairwise_distances(X, Y)


class GraphBackend:
    """Shortest-path distances on a kNN graph rebuilt for each field.

    The graph spans the distinct query points plus ``support`` points,
    with midpoint-metric edge weights.
    """

    def __init__(self, k=10, support=None, mutual=False):
        self.k = k
        self.support = None if support is None else np.atleast_2d(np.asarray(support, dtype=float))
        self.mutual = mutual

    def __call__(self, field, X, Y):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        stack = [X, Y] if self.support is None else [self.support, X, Y]
        nodes, inverse = np.unique(np.vstack(stack), axis=0, return_inverse=True)
        inverse = inverse.ravel()
        off = 0 if self.support is None else len(self.support)
        ix = inverse[off:off + len(X)]
        iy = inverse[off + len(X):]
        graph = build_knn_graph(nodes, min(self.k, len(nodes) - 1), field, self.mutual)
        sources = np.unique(ix)
        rows = all_pairs_distances(graph, sources)
        lookup = {s: r for s, r in zip(sources, rows)}
        return np.array([lookup[a][b] for a, b in zip(ix, iy)])


def make_backend(name="auto", field=None, cfg=DEFAULT_CONFIG, **kwargs):
    """Backend from a name, or ``name`` itself when it is already callable.

    ``"auto"`` picks the closed form for constant metrics and the graph
    backend otherwise.
    """
    if callable(name):
        return name
    if name == "auto":
        name = "closed" if isinstance(field, ConstantMetric) else "graph"
    if name == "closed":
        return ClosedFormBackend()
    if name == "graph":
        return GraphBackend(**kwargs)
    if name in ("shooting", "bvp", "curve"):
        return SolverBackend(name, cfg)
    raise ValueError(f"unknown distance backend {name!r}")


def inverse_field(field):
    """Pointwise inverse metric, kept closed-form for constant metrics."""
    if isinstance(field, ConstantMetric):
        return ConstantMetric.from_matrix(np.linalg.inv(field.G))
    return InverseMetric(field)


def _dist(field, X, Y, backend, cfg):
    if len(X) == 0:
        return np.zeros(0)
    return np.asarray(make_backend(backend, field, cfg)(field, X, Y), dtype=float)


def contrastive_loss(field, pairs, variant="sum-diff", backend="auto", cfg=DEFAULT_CONFIG):
    """Pull similar pairs together and push dissimilar ones apart.

    ``"sum-diff"``: ``sum_p d_g - sum_n d_g`` (unbounded below).
    ``"inverse-negatives"``: ``sum_p d_g + sum_n d_{g^{-1}}``.
    """
    sim, dis = pairs.similar, pairs.dissimilar
    pos = _dist(field, sim[:, 0], sim[:, 1], backend, cfg).sum() if len(sim) else 0.0
    if variant == "sum-diff":
        neg = _dist(field, dis[:, 0], dis[:, 1], backend, cfg).sum() if len(dis) else 0.0
        return float(pos - neg)
    if variant == "inverse-negatives":
        inv = inverse_field(field)
        neg = _dist(inv, dis[:, 0], dis[:, 1], backend, cfg).sum() if len(dis) else 0.0
        return float(pos + neg)
    raise ValueError(f"unknown contrastive variant {variant!r}")


def triplet_terms(field, triplets, backend="auto", cfg=DEFAULT_CONFIG):
    """Positive and negative distances ``(d(q, q_p), d(q, q_n))`` per triplet."""
    t = triplets.triplets
    if len(t) == 0:
        return np.zeros(0), np.zeros(0)
    X = np.concatenate([t[:, 0], t[:, 0]])
    Y = np.concatenate([t[:, 1], t[:, 2]])
    d = _dist(field, X, Y, backend, cfg)
    return d[:len(t)], d[len(t):]


def triplet_loss(field, triplets, margin=1.0, backend="auto", cfg=DEFAULT_CONFIG):
    """``sum d(q, q_p) + max(0, margin + d(q, q_p) - d(q, q_n))``."""
    if margin < 0:
        raise ValueError("margin must be >= 0")
    dp, dn = triplet_terms(field, triplets, backend, cfg)
    return float(np.sum(dp + np.maximum(0.0, margin + dp - dn)))


def triplet_violations(field, triplets, backend="auto", cfg=DEFAULT_CONFIG):
    """Number of triplets whose negative is not strictly farther than the positive."""
    dp, dn = triplet_terms(field, triplets, backend, cfg)
    return int(np.sum(dn <= dp))


def distance_regression_loss(field, obs, backend="auto", cfg=DEFAULT_CONFIG):
    """Weighted least squares ``sum w (d_obs - d_g(x, y))^2``."""
    d = _dist(field, obs.x, obs.y, backend, cfg)
    return float(np.sum(obs.weight * (obs.d_obs - d) ** 2))


def geodesic_at_times(field, q, v, times, steps=200):
    """Geodesic through ``q`` at ``times[0]`` with velocity ``v``, sampled at ``times``.

    Each interval gets enough RK4 substeps that the step never exceeds
    ``(times[-1] - times[0]) / steps``.
    """
    times = np.asarray(times, dtype=float)
    span = times[-1] - times[0]
    h_max = span / steps
    x, u = np.array(q, dtype=float), np.array(v, dtype=float)
    out = [x.copy()]
    for t0, t1 in zip(times[:-1], times[1:]):
        sub = max(1, int(np.ceil((t1 - t0) / h_max - 1e-9)))
        pts, vels = integrate_geodesic(field, x, u, [t0, t1], substeps=sub)
        x, u = pts[-1], vels[-1]
        out.append(x.copy())
    return np.array(out)


@dataclass
class TrajectoryFit:
    q: np.ndarray
    v: np.ndarray
    residual: float
    converged: bool


def fit_geodesic(field, times, points, cfg=DEFAULT_CONFIG, restarts=3, steps=None):
    """Best single geodesic ``(q, v)`` through timestamped points.

    Minimizes ``sum_j ||x_j - gamma(t_j)||^2`` with ``gamma(t_0) = q``,
    ``dot gamma(t_0) = v`` by trust-region least squares over exp rollouts,
    starting from the first observation and the chart secant. Up to
    ``restarts`` seeded perturbations are tried while the solver reports
    failure.
    """
    times = np.asarray(times, dtype=float)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    d = points.shape[1]
    steps = cfg.steps if steps is None else steps
    span = times[-1] - times[0]
    secant = (points[-1] - points[0]) / span

    def residual(z):
        try:
            return (geodesic_at_times(field, z[:d], z[d:], times, steps) - points).ravel()
        except (RiemetricError, ValueError, ArithmeticError):
            return np.full(points.size, 1e6)

    rng = np.random.default_rng(cfg.seed)
    scale = max(float(np.std(points)), 1e-3)
    best = None
    for attempt in range(restarts + 1):
        z0 = np.concatenate([points[0], secant])
        if attempt:
            z0 = z0 + 0.1 * scale * rng.standard_normal(2 * d)
        res = least_squares(residual, z0, method="trf", jac="3-point", xtol=1e-12, ftol=1e-12,
                            gtol=1e-12, max_nfev=cfg.max_iter)
        value = float(np.sum(res.fun ** 2))
        if best is None or value < best.residual:
            best = TrajectoryFit(res.x[:d].copy(), res.x[d:].copy(), value, bool(res.success))
        if best.converged:
            break
    return best


def trajectory_loss(field, trs, cfg=DEFAULT_CONFIG, restarts=3, steps=None, return_fits=False):
    """Sum over trajectories of the best single-geodesic residual.

    With ``return_fits`` also returns the per-trajectory
    :class:`TrajectoryFit` list (``converged`` flags inner failures, whose
    best value is still counted).
    """
    fits = [fit_geodesic(field, t, p, cfg, restarts, steps) for t, p in zip(trs.times, trs.points)]
    loss = float(sum(f.residual for f in fits))
    return (loss, fits) if return_fits else loss
