"""Poincare half-plane test field and its brute-force distance oracle."""

import math

import numpy as np
from scipy import sparse
from scipy.optimize import minimize
from scipy.sparse.csgraph import dijkstra

from .core import MetricField
from .errors import DomainError


class HyperbolicHalfPlane(MetricField):
    """``g = I / y^2`` on ``{(x, y) : y > 0}``."""

    dim = 2

    def _metric(self, p):
        if p[1] <= 0:
            raise DomainError(f"half-plane point needs y > 0, got {p}")
        return np.eye(2) / p[1] ** 2

    def _derivative(self, p):
        if p[1] <= 0:
            raise DomainError(f"half-plane point needs y > 0, got {p}")
        out = np.zeros((2, 2, 2))
        out[1] = -2.0 * np.eye(2) / p[1] ** 3
        return out


def hyperbolic_distance(p1, p2):
    """Textbook ``arccosh(1 + |p1 - p2|^2 / (2 y1 y2))``; reference only."""
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    if p1[1] <= 0 or p2[1] <= 0:
        raise DomainError("half-plane points need y > 0")
    return math.acosh(1.0 + float(np.sum((p1 - p2) ** 2)) / (2.0 * p1[1] * p2[1]))


def _stencil(radius):
    offs = []
    for a in range(-radius, radius + 1):
        for b in range(-radius, radius + 1):
            if (a, b) != (0, 0) and math.gcd(abs(a), abs(b)) == 1:
                offs.append((a, b))
    return offs


def _segment_lengths(p, q):
    # Simpson rule for the integral of |q - p| / y along the straight segment
    ym = 0.5 * (p[..., 1] + q[..., 1])
    e = np.linalg.norm(q - p, axis=-1)
    return e / 6.0 * (1.0 / p[..., 1] + 4.0 / ym + 1.0 / q[..., 1])


def hyperbolic_oracle_distance(p1, p2, grid=400, radius=4, refine_nodes=129, return_path=False):
    """Brute-force half-plane distance: grid Dijkstra, then polyline relaxation.

    A ``grid x grid`` lattice covering a box around both points is joined by
    every primitive offset up to ``radius`` cells, with edge weights the
    half-plane length of the straight edge. The Dijkstra path is resampled
    to ``refine_nodes`` nodes and its length minimized over the interior
    nodes. Neither step uses the geodesic solvers or the closed form.
    """
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    if p1[1] <= 0 or p2[1] <= 0:
        raise DomainError("half-plane points need y > 0")
    if np.array_equal(p1, p2):
        return (0.0, np.array([p1, p2])) if return_path else 0.0
    span = max(abs(p2[0] - p1[0]), abs(p2[1] - p1[1]))
    lo_y = min(p1[1], p2[1])
    xs = np.linspace(min(p1[0], p2[0]) - 0.5 * span, max(p1[0], p2[0]) + 0.5 * span, grid)
    ys = np.linspace(max(lo_y - 0.5 * span, 0.5 * lo_y), max(p1[1], p2[1]) + span, grid)
    # snap the endpoints onto the lattice exactly
    xs = np.sort(np.unique(np.concatenate([xs, [p1[0], p2[0]]])))
    ys = np.sort(np.unique(np.concatenate([ys, [p1[1], p2[1]]])))
    nx, ny = len(xs), len(ys)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    coords = np.stack([X, Y], axis=-1)
    idx = np.arange(nx * ny).reshape(nx, ny)
    rows, cols, vals = [], [], []
    for a, b in _stencil(radius):
        i0, i1 = max(0, -a), nx - max(0, a)
        j0, j1 = max(0, -b), ny - max(0, b)
        src = coords[i0:i1, j0:j1]
        dst = coords[i0 + a:i1 + a, j0 + b:j1 + b]
        rows.append(idx[i0:i1, j0:j1].ravel())
        cols.append(idx[i0 + a:i1 + a, j0 + b:j1 + b].ravel())
        vals.append(_segment_lengths(src, dst).ravel())
    graph = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                              shape=(nx * ny, nx * ny))
    s = idx[np.searchsorted(xs, p1[0]), np.searchsorted(ys, p1[1])]
    t = idx[np.searchsorted(xs, p2[0]), np.searchsorted(ys, p2[1])]
    dist, pred = dijkstra(graph, directed=True, indices=s, return_predecessors=True)
    chain = [t]
    while chain[-1] != s:
        chain.append(pred[chain[-1]])
    poly = coords.reshape(-1, 2)[chain[::-1]]
    grid_value = float(dist[t])

    # resample by arclength then relax interior nodes
    seg = np.linalg.norm(np.diff(poly, axis=0), axis=1)
    s_acc = np.concatenate([[0.0], np.cumsum(seg)])
    u = np.linspace(0.0, s_acc[-1], refine_nodes)
    init = np.column_stack([np.interp(u, s_acc, poly[:, 0]), np.interp(u, s_acc, poly[:, 1])])

    def length(z):
        pts = np.vstack([p1, z.reshape(-1, 2), p2])
        return float(np.sum(_segment_lengths(pts[:-1], pts[1:])))

    res = minimize(length, init[1:-1].ravel(), method="L-BFGS-B",
                   bounds=[(None, None), (1e-9, None)] * (refine_nodes - 2),
                   options={"maxiter": 20000, "ftol": 1e-15, "gtol": 1e-12})
    value = min(grid_value, float(res.fun))
    if return_path:
        return value, np.vstack([p1, res.x.reshape(-1, 2), p2])
    return value
