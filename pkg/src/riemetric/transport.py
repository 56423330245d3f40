"""Parallel transport along curves and its discrete approximations.

``parallel_transport_ode`` integrates the transport equation directly;
Schild's ladder and the pole ladder need only Exp and Log; the fanning
scheme needs only Exp.
"""

import numpy as np

from .core import as_point, local_geometry
from .geodesic import DEFAULT_CONFIG, SolverConfig, exp_endpoint, integrate_geodesic, log_map_shooting
from .paths import GeodesicPath


def _transport_rate(field, x, xdot, V):
    # dV^k/dt = -Gamma^k_ij xdot^i V^j
    _, ginv, dg = local_geometry(field, x)
    a = 0.5 * (xdot @ (V @ dg) + V @ (xdot @ dg))
    b = (dg @ V) @ xdot
    return -ginv @ (a - 0.5 * b)


def _hermite_mid(p0, p1, m0, m1, h):
    pos = 0.5 * (p0 + p1) + h * (m0 - m1) / 8.0
    vel = 1.5 * (p1 - p0) / h - 0.25 * (m0 + m1)
    return pos, vel


def parallel_transport_ode(field, curve, V0, return_all=False):
    """Transport ``V0`` from ``curve.start`` to ``curve.end``.

    Classical RK4 on ``dV/dt + Gamma(dot gamma, V) = 0`` over the curve's
    own nodes; midpoints come from cubic Hermite interpolation of the
    stored points and velocities. With ``return_all`` the vector at every
    node is returned as an ``(n, d)`` array.
    """
    V = as_point(V0, field.dim).copy()
    out = [V.copy()]
    t, P, M = curve.times, curve.points, curve.velocities
    for k in range(len(t) - 1):
        h = t[k + 1] - t[k]
        pm, mm = _hermite_mid(P[k], P[k + 1], M[k], M[k + 1], h)
        k1 = _transport_rate(field, P[k], M[k], V)
        k2 = _transport_rate(field, pm, mm, V + 0.5 * h * k1)
        k3 = _transport_rate(field, pm, mm, V + 0.5 * h * k2)
        k4 = _transport_rate(field, P[k + 1], M[k + 1], V + h * k3)
        V = V + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        out.append(V.copy())
    return np.array(out) if return_all else V


def _rung_points(curve, rungs):
    if rungs < 1:
        raise ValueError("rungs must be >= 1")
    if len(curve.points) < rungs + 1:
        raise ValueError(f"curve has {len(curve.points)} nodes, fewer than rungs + 1")
    idx = np.round(np.linspace(0, len(curve.points) - 1, rungs + 1)).astype(int)
    return curve.points[idx]


def _midpoint(field, a, b, cfg):
    return exp_endpoint(field, a, 0.5 * log_map_shooting(field, a, b, cfg), cfg)


def schild_ladder(field, curve, V0, rungs, cfg=DEFAULT_CONFIG):
    """Schild's ladder transport of ``V0`` along ``curve``.

    Each rung closes a geodesic parallelogram through the diagonal
    midpoint. The transported vector is scaled by ``1 / rungs`` while
    climbing so each parallelogram stays small.
    """
    pts = _rung_points(curve, rungs)
    scale = 1.0 / rungs
    U = scale * as_point(V0, field.dim)
    for x0, x1 in zip(pts[:-1], pts[1:]):
        a = exp_endpoint(field, x0, U, cfg)
        m = _midpoint(field, a, x1, cfg)
        b = exp_endpoint(field, x0, 2.0 * log_map_shooting(field, x0, m, cfg), cfg)
        U = log_map_shooting(field, x1, b, cfg)
    return U / scale


def pole_ladder(field, curve, V0, rungs, cfg=DEFAULT_CONFIG):
    """Pole-ladder transport: reflect through the midpoint of each rung."""
    pts = _rung_points(curve, rungs)
    scale = 1.0 / rungs
    U = scale * as_point(V0, field.dim)
    for x0, x1 in zip(pts[:-1], pts[1:]):
        m = _midpoint(field, x0, x1, cfg)
        a = exp_endpoint(field, x0, U, cfg)
        b = exp_endpoint(field, m, -log_map_shooting(field, m, a, cfg), cfg)
        U = -log_map_shooting(field, x1, b, cfg)
    return U / scale


def fanning_scheme(field, x, v_geo, V0, steps, substeps=2, eps=1e-4):
    """Transport ``V0`` along ``t -> Exp_x(t v_geo)`` using only Exp.

    Each step of length ``h`` estimates the Jacobi field of the fan of
    geodesics ``Exp_p(h (v +- eps W))`` by a central difference, divides
    by ``h`` and rescales to keep ``g(W, W)`` fixed.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    x = as_point(x, field.dim)
    v_geo = as_point(v_geo, field.dim)
    W = as_point(V0, field.dim).copy()
    h = 1.0 / steps
    times = np.linspace(0.0, 1.0, steps + 1)
    pts, vels = integrate_geodesic(field, x, v_geo, times, substeps=substeps)
    sub = SolverConfig(steps=substeps)
    for k in range(steps):
        p, v = pts[k], vels[k]
        norm0 = W @ field.metric_at(p) @ W
        if norm0 == 0.0:
            continue
        plus = exp_endpoint(field, p, h * (v + eps * W), sub)
        minus = exp_endpoint(field, p, h * (v - eps * W), sub)
        W = (plus - minus) / (2 * eps * h)
        W *= np.sqrt(norm0 / (W @ field.metric_at(pts[k + 1]) @ W))
    return W


def curve_at(curve, s):
    """Point and velocity of ``curve`` at time ``s`` (cubic Hermite between nodes)."""
    T, P, M = curve.times, curve.points, curve.velocities
    hit = np.flatnonzero(T == s)
    if hit.size:
        return P[hit[0]].copy(), M[hit[0]].copy()
    k = int(np.clip(np.searchsorted(T, s, side="right") - 1, 0, len(T) - 2))
    h = T[k + 1] - T[k]
    u = (s - T[k]) / h
    h00, h10, h01, h11 = 2 * u**3 - 3 * u**2 + 1, u**3 - 2 * u**2 + u, -2 * u**3 + 3 * u**2, u**3 - u**2
    d00, d10, d01, d11 = 6 * u**2 - 6 * u, 3 * u**2 - 4 * u + 1, -6 * u**2 + 6 * u, 3 * u**2 - 2 * u
    pos = h00 * P[k] + h10 * h * M[k] + h01 * P[k + 1] + h11 * h * M[k + 1]
    vel = (d00 * P[k] + d01 * P[k + 1]) / h + d10 * M[k] + d11 * M[k + 1]
    return pos, vel


def sub_path(curve, t0, t):
    """Portion of ``curve`` from time ``t0`` to ``t`` rescaled to ``[0, 1]``.

    Interior nodes are reused; runs backwards when ``t < t0``.
    """
    T = curve.times
    lo, hi = min(t0, t), max(t0, t)
    inner = [k for k in range(len(T)) if lo < T[k] < hi]
    ends = [curve_at(curve, lo), curve_at(curve, hi)]
    pts = np.array([ends[0][0]] + [curve.points[k] for k in inner] + [ends[1][0]])
    vel = np.array([ends[0][1]] + [curve.velocities[k] for k in inner] + [ends[1][1]])
    times = np.array([lo] + [T[k] for k in inner] + [hi])
    span = hi - lo
    s = (times - lo) / span
    vel = vel * span
    if t < t0:
        s, pts, vel = 1.0 - s[::-1], pts[::-1], -vel[::-1]
    s[0], s[-1] = 0.0, 1.0
    return GeodesicPath(s, pts, vel)


def transport_along(field, curve, t0, t, w):
    """Parallel transport of ``w`` along ``curve`` from time ``t0`` to ``t``."""
    w = as_point(w, field.dim)
    if t == t0:
        return w.copy()
    return parallel_transport_ode(field, sub_path(curve, t0, t), w)


def exp_parallelize(field, geo, t0, w, t, cfg=DEFAULT_CONFIG):
    """``Exp_{gamma(t)}`` of ``w`` transported along ``gamma`` from ``t0`` to ``t``."""
    moved = transport_along(field, geo, t0, t, w)
    return exp_endpoint(field, curve_at(geo, t)[0], moved, cfg)


def geodesic_speed_drift(field, path):
    """Max relative deviation of ``g(dot gamma, dot gamma)`` from its start value."""
    sq = np.array([v @ field.metric_at(p) @ v for p, v in zip(path.points, path.velocities)])
    return float(np.max(np.abs(sq - sq[0])) / sq[0])

