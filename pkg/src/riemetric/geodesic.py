"""Exponential and logarithm maps, geodesic boundary-value solvers, distances.

Three routes to a minimizing geodesic between two points are provided:

* shooting: solve ``Exp_x(v) = y`` for the initial velocity;
* ``bvp``: minimize the discrete energy of a polygon with fixed ends;
* ``curve``: fit a radial-basis perturbation of the chord.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .core import (as_point, geodesic_acceleration, hamiltonian_grad_x,
                   metric_derivatives, metric_inverse)
from .errors import BlowUpError, NoConvergenceError
from .paths import GeodesicPath

BLOWUP = 1e12


@dataclass(frozen=True)
class SolverConfig:
    """Numerical settings shared by the geodesic routines.

    ``integrator`` is ``"rk4"`` (Christoffel form) or ``"leapfrog"``
    (Hamiltonian form). ``steps`` is the number of integration steps on
    ``[0, 1]``. ``bvp_nodes`` counts polygon nodes including both ends.
    """

    integrator: str = "rk4"
    steps: int = 200
    bvp_nodes: int = 64
    max_iter: int = 500
    tol: float = 1e-8
    step_size: float = 1e-2
    restarts: int = 4
    seed: int = 0
    basis_size: int = 8
    quad_nodes: int = 48
    bvp_stencil: str = "midpoint"
    bvp_max_iter: int = 20000
    bvp_tol: float = 1e-6
    leapfrog_order: int = 4

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be > 0")
        if self.integrator not in ("rk4", "leapfrog"):
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.leapfrog_order not in (2, 4):
            raise ValueError("leapfrog_order must be 2 or 4")
        if self.bvp_stencil not in ("midpoint", "left"):
            raise ValueError(f"unknown bvp stencil {self.bvp_stencil!r}")

    def replace(self, **changes):
        from dataclasses import replace
        return replace(self, **changes)


DEFAULT_CONFIG = SolverConfig()


def _check_state(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)) or np.max(np.abs(a)) > BLOWUP:
            raise BlowUpError("geodesic state exceeded magnitude bound")


def _rk4_step(field, x, v, h):
    k1x, k1v = v, geodesic_acceleration(field, x, v)
    x2, v2 = x + 0.5 * h * k1x, v + 0.5 * h * k1v
    k2x, k2v = v2, geodesic_acceleration(field, x2, v2)
    x3, v3 = x + 0.5 * h * k2x, v + 0.5 * h * k2v
    k3x, k3v = v3, geodesic_acceleration(field, x3, v3)
    x4, v4 = x + h * k3x, v + h * k3v
    k4x, k4v = v4, geodesic_acceleration(field, x4, v4)
    return (x + h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x),
            v + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v))


def _leapfrog_step(field, x, p, h, iters=100, rtol=1e-15):
    # generalized Stormer-Verlet for the non-separable H(x, p) = p^T g^{-1}(x) p / 2
    p_half = p.copy()
    for _ in range(iters):
        nxt = p - 0.5 * h * hamiltonian_grad_x(field, x, p_half)
        done = np.max(np.abs(nxt - p_half)) <= rtol * (1 + np.max(np.abs(nxt)))
        p_half = nxt
        if done:
            break
    u0 = metric_inverse(field, x) @ p_half
    x_new = x + h * u0
    for _ in range(iters):
        nxt = x + 0.5 * h * (u0 + metric_inverse(field, x_new) @ p_half)
        done = np.max(np.abs(nxt - x_new)) <= rtol * (1 + np.max(np.abs(nxt)))
        x_new = nxt
        if done:
            break
    p_new = p_half - 0.5 * h * hamiltonian_grad_x(field, x_new, p_half)
    return x_new, p_new


_YOSHIDA = (1.0 / (2.0 - 2.0 ** (1.0 / 3.0)),
            -2.0 ** (1.0 / 3.0) / (2.0 - 2.0 ** (1.0 / 3.0)),
            1.0 / (2.0 - 2.0 ** (1.0 / 3.0)))


def _symplectic_step(field, x, p, h, order):
    if order == 2:
        return _leapfrog_step(field, x, p, h)
    for c in _YOSHIDA:
        x, p = _leapfrog_step(field, x, p, c * h)
    return x, p


def integrate_geodesic(field, x, v, times, integrator="rk4", substeps=1, leapfrog_order=4):
    """Integrate the geodesic ODE and sample it at ``times``.

    ``times`` must be increasing and start at the time of ``(x, v)``.
    Each interval is split into ``substeps`` equal steps. Returns
    ``(points, velocities)``.
    """
    x = np.array(x, dtype=float)
    v = np.array(v, dtype=float)
    times = np.asarray(times, dtype=float)
    pts = [x.copy()]
    vels = [v.copy()]
    if integrator == "leapfrog":
        p = field.metric_at(x) @ v
    for t0, t1 in zip(times[:-1], times[1:]):
        h = (t1 - t0) / substeps
        for _ in range(substeps):
            if integrator == "rk4":
                x, v = _rk4_step(field, x, v, h)
                _check_state(x, v)
            else:
                x, p = _symplectic_step(field, x, p, h, leapfrog_order)
                _check_state(x, p)
        if integrator == "leapfrog":
            v = metric_inverse(field, x) @ p
        pts.append(x.copy())
        vels.append(v.copy())
    return np.array(pts), np.array(vels)


def exp_map(field, x, v, cfg=DEFAULT_CONFIG):
    """Geodesic ``t -> Exp_x(t v)`` on ``[0, 1]``.

    The endpoint ``Exp_x(v)`` is ``path.end``. The leapfrog integrator
    (composed to fourth order unless ``cfg.leapfrog_order == 2``) stores the
    Hamiltonian at every node in ``path.info["hamiltonian"]``.
    """
    x = as_point(x, field.dim)
    v = as_point(v, field.dim)
    times = np.linspace(0.0, 1.0, cfg.steps + 1)
    if field.flat:
        pts = x + times[:, None] * v
        pts[-1] = x + v
        vels = np.tile(v, (len(times), 1))
    else:
        pts, vels = integrate_geodesic(field, x, v, times, cfg.integrator,
                                       leapfrog_order=cfg.leapfrog_order)
    info = {}
    if cfg.integrator == "leapfrog":
        info["hamiltonian"] = np.array(
            [0.5 * u @ field.metric_at(q) @ u for q, u in zip(pts, vels)])
    return GeodesicPath(times, pts, vels, info=info)


def exp_endpoint(field, x, v, cfg=DEFAULT_CONFIG):
    """``Exp_x(v)`` without storing the path."""
    x = np.array(x, dtype=float)
    v = np.array(v, dtype=float)
    if field.flat:
        return x + v
    if cfg.integrator == "leapfrog":
        return exp_map(field, x, v, cfg).end
    h = 1.0 / cfg.steps
    for _ in range(cfg.steps):
        x, v = _rk4_step(field, x, v, h)
        _check_state(x, v)
    return x


def _endpoint_jacobian(field, x, v, cfg):
    d = field.dim
    eps = 1e-6 * (1.0 + np.linalg.norm(v))
    J = np.empty((d, d))
    for i in range(d):
        e = np.zeros(d)
        e[i] = eps
        J[:, i] = (exp_endpoint(field, x, v + e, cfg) - exp_endpoint(field, x, v - e, cfg)) / (2 * eps)
    return J


def _shoot_newton(field, x, y, v, cfg, tol, J=None):
    """Damped Newton on ``r(v) = Exp_x(v) - y``.

    The Jacobian (central differences over ``v``) is reused while full
    steps at least halve the residual, and refreshed otherwise.
    Returns ``(v, residual, J)``.
    """

    def residual(u):
        try:
            r = exp_endpoint(field, x, u, cfg) - y
        except Exception as exc:
            if not _recoverable(exc):
                raise
            return None, np.inf
        return r, float(np.linalg.norm(r))

    r, rn = residual(v)
    if r is None:
        raise BlowUpError("shooting start point is not integrable")
    fresh = False
    for _ in range(cfg.max_iter):
        if rn <= tol:
            break
        if J is None:
            J, fresh = _endpoint_jacobian(field, x, v, cfg), True
        step = np.linalg.lstsq(J, -r, rcond=None)[0]
        r_c, rn_c = residual(v + step)
        if rn_c <= 0.5 * rn or (fresh and rn_c < rn):
            v, r, rn, fresh = v + step, r_c, rn_c, False
            continue
        if not fresh:
            J = None
            continue
        lam = 0.5
        while lam > 1e-4:
            r_c, rn_c = residual(v + lam * step)
            if rn_c < rn:
                break
            lam *= 0.5
        if not rn_c < rn:
            break
        v, r, rn, fresh = v + lam * step, r_c, rn_c, False
    return v, rn, J


def _shoot(field, x, y, v, cfg):
    J = None
    if cfg.steps >= 32:
        coarse = cfg.replace(steps=max(16, cfg.steps // 8))
        v, _, J = _shoot_newton(field, x, y, v, coarse, max(cfg.tol, 1e-6 * np.linalg.norm(y - x)))
    v, rn, _ = _shoot_newton(field, x, y, v, cfg, cfg.tol, J)
    return v, rn


def _recoverable(exc):
    from .errors import RiemetricError
    return isinstance(exc, (RiemetricError, ValueError, np.linalg.LinAlgError, ArithmeticError))


def log_map_shooting(field, x, y, cfg=DEFAULT_CONFIG, v0=None):
    """Initial velocity ``v`` with ``Exp_x(v) = y`` by shooting.

    Starts from ``v0`` (default ``y - x``) and, on failure, from
    ``cfg.restarts`` seeded random perturbations of it. Raises
    :class:`NoConvergenceError` carrying the best velocity when
    ``||Exp_x(v) - y|| > cfg.tol`` for every start.
    """
    x = as_point(x, field.dim)
    y = as_point(y, field.dim)
    if np.array_equal(x, y):
        return np.zeros(field.dim)
    field.metric_at(x)  # endpoints outside the domain are an input error, not a solver failure
    field.metric_at(y)
    base = (y - x) if v0 is None else np.asarray(v0, dtype=float)
    rng = np.random.default_rng(cfg.seed)
    best_v, best_r = base, np.inf
    for attempt in range(cfg.restarts + 1):
        if attempt == 0:
            start = base.copy()
        else:
            start = base + 0.25 * np.linalg.norm(base) * rng.standard_normal(field.dim)
        try:
            v, r = _shoot(field, x, y, start, cfg)
        except Exception as exc:
            if not _recoverable(exc):
                raise
            continue
        if r < best_r:
            best_v, best_r = v, r
        if best_r <= cfg.tol:
            return best_v
    raise NoConvergenceError(
        f"shooting did not reach tol {cfg.tol:g} (residual {best_r:.3e})", best=best_v, residual=best_r)


def _discrete_energy(field, nodes, stencil):
    """Discrete energy ``(N-1) * sum_k D_k^T g_k D_k`` and its gradient."""
    n_seg = len(nodes) - 1
    delta = np.diff(nodes, axis=0)
    if stencil == "midpoint":
        where = 0.5 * (nodes[:-1] + nodes[1:])
    else:
        where = nodes[:-1]
    energy = 0.0
    grad = np.zeros_like(nodes)
    for k in range(n_seg):
        g = field.metric_at(where[k])
        dg = metric_derivatives(field, where[k])
        gd = g @ delta[k]
        energy += delta[k] @ gd
        quad = np.einsum("ijk,j,k->i", dg, delta[k], delta[k])
        if stencil == "midpoint":
            grad[k] += -2 * gd + 0.5 * quad
            grad[k + 1] += 2 * gd + 0.5 * quad
        else:
            grad[k] += -2 * gd + quad
            grad[k + 1] += 2 * gd
    return n_seg * energy, n_seg * grad


def discrete_length(field, nodes, stencil="midpoint"):
    """Polygon length ``sum_k sqrt(D_k^T g_k D_k)``."""
    nodes = np.asarray(nodes, dtype=float)
    delta = np.diff(nodes, axis=0)
    where = 0.5 * (nodes[:-1] + nodes[1:]) if stencil == "midpoint" else nodes[:-1]
    return float(sum(np.sqrt(max(dk @ field.metric_at(w) @ dk, 0.0)) for dk, w in zip(delta, where)))


def geodesic_bvp(field, x, y, cfg=DEFAULT_CONFIG, init=None, strict=False):
    """Minimize the discrete path energy over interior polygon nodes.

    The polygon has ``cfg.bvp_nodes`` nodes with the ends pinned at ``x``
    and ``y``; ``init`` optionally supplies a starting polygon. The
    squared segment length uses the metric at the segment midpoint (or at
    the left node with ``cfg.bvp_stencil="left"``). Uses L-BFGS with the
    analytic energy gradient. ``path.info`` holds ``energy_history`` (one
    entry per accepted iteration), ``grad_norm`` and ``length``. A path
    whose gradient norm exceeds ``cfg.bvp_tol`` is returned with ``converged=False``, or raised
    as :class:`NoConvergenceError` when ``strict``.
    """
    x = as_point(x, field.dim)
    y = as_point(y, field.dim)
    n = cfg.bvp_nodes
    if n < 2:
        raise ValueError("bvp_nodes must be >= 2")
    times = np.linspace(0.0, 1.0, n)
    if init is None:
        nodes = x + times[:, None] * (y - x)
    else:
        nodes = np.array(init, dtype=float)
        nodes[0], nodes[-1] = x, y
    d = field.dim
    stencil = cfg.bvp_stencil

    def fun(z):
        full = nodes.copy()
        full[1:-1] = z.reshape(-1, d)
        e, g = _discrete_energy(field, full, stencil)
        return e, g[1:-1].ravel()

    history = [fun(nodes[1:-1].ravel())[0]]
    if n > 2:
        res = minimize(fun, nodes[1:-1].ravel(), jac=True, method="L-BFGS-B",
                       callback=lambda intermediate_result: history.append(float(intermediate_result.fun)),
                       options={"maxiter": cfg.bvp_max_iter, "gtol": 0.1 * cfg.bvp_tol, "ftol": 1e-15,
                                "maxcor": 20, "maxls": 50})
        nodes[1:-1] = res.x.reshape(-1, d)
        _, grad = fun(res.x)
        grad_norm = float(np.linalg.norm(grad))
    else:
        grad_norm = 0.0
    converged = grad_norm <= cfg.bvp_tol
    path = GeodesicPath.from_points(nodes, times, converged=converged)
    path.info.update(energy_history=np.array(history), grad_norm=grad_norm,
                     length=discrete_length(field, nodes, stencil), energy=history[-1])
    if strict and not converged:
        raise NoConvergenceError(f"BVP gradient norm {grad_norm:.3e} above tol", best=path, residual=grad_norm)
    return path


class _RadialCurve:
    """``gamma(t) = (1-t) x + t y + t (1-t) sum_b eta_b psi_b(t)``."""

    def __init__(self, x, y, basis_size):
        self.x, self.y = x, y
        self.centers = (np.arange(basis_size) + 0.5) / basis_size
        self.width = 1.0 / basis_size

    def basis(self, t):
        t = np.atleast_1d(t)[:, None]
        psi = np.exp(-(t - self.centers) ** 2 / (2 * self.width ** 2))
        dpsi = -(t - self.centers) / self.width ** 2 * psi
        return psi, dpsi

    def weights(self, t):
        """Coefficient maps for positions and velocities, each shaped (len(t), B)."""
        t = np.atleast_1d(t)
        psi, dpsi = self.basis(t)
        tt = t[:, None]
        a = tt * (1 - tt) * psi
        da = (1 - 2 * tt) * psi + tt * (1 - tt) * dpsi
        return a, da

    def evaluate(self, eta, t):
        t = np.atleast_1d(t)
        a, da = self.weights(t)
        pts = (1 - t)[:, None] * self.x + t[:, None] * self.y + a @ eta
        vel = (self.y - self.x)[None, :] + da @ eta
        return pts, vel


def geodesic_regression_curve(field, x, y, basis_size=None, cfg=DEFAULT_CONFIG, strict=False):
    """Fit a radial-basis perturbation of the chord by minimizing its energy.

    The curve interpolates ``x`` and ``y`` by construction; the
    ``basis_size`` Gaussian bumps per coordinate are fit with L-BFGS on a
    Gauss-Legendre estimate of the path energy. ``path.info`` carries the
    coefficients ``eta``, ``energy`` and the quadrature ``length``.
    """
    x = as_point(x, field.dim)
    y = as_point(y, field.dim)
    basis_size = cfg.basis_size if basis_size is None else int(basis_size)
    if basis_size < 1:
        raise ValueError("basis_size must be >= 1")
    curve = _RadialCurve(x, y, basis_size)
    tq, wq = np.polynomial.legendre.leggauss(cfg.quad_nodes)
    tq, wq = 0.5 * (tq + 1), 0.5 * wq
    a, da = curve.weights(tq)
    d = field.dim

    def fun(z):
        eta = z.reshape(basis_size, d)
        pts, vel = curve.evaluate(eta, tq)
        energy = 0.0
        grad = np.zeros((basis_size, d))
        for q in range(len(tq)):
            g = field.metric_at(pts[q])
            gv = g @ vel[q]
            energy += wq[q] * (vel[q] @ gv)
            quad = np.einsum("ijk,j,k->i", metric_derivatives(field, pts[q]), vel[q], vel[q])
            grad += wq[q] * (2 * np.outer(da[q], gv) + np.outer(a[q], quad))
        return energy, grad.ravel()

    z0 = np.zeros(basis_size * d)
    res = minimize(fun, z0, jac=True, method="L-BFGS-B",
                   options={"maxiter": cfg.bvp_max_iter, "gtol": 0.1 * cfg.bvp_tol, "ftol": 1e-15, "maxls": 50})
    eta = res.x.reshape(basis_size, d)
    energy, grad = fun(res.x)
    grad_norm = float(np.linalg.norm(grad))
    converged = grad_norm <= cfg.bvp_tol
    pts, vel = curve.evaluate(eta, tq)
    speeds = np.sqrt([max(v @ field.metric_at(p) @ v, 0.0) for p, v in zip(pts, vel)])
    times = np.linspace(0.0, 1.0, cfg.steps + 1)
    out_pts, out_vel = curve.evaluate(eta, times)
    path = GeodesicPath(times, out_pts, out_vel, converged=converged)
    path.info.update(eta=eta, energy=energy, length=float(wq @ speeds), grad_norm=grad_norm)
    if strict and not converged:
        raise NoConvergenceError(f"curve regression gradient norm {grad_norm:.3e} above tol",
                                 best=path, residual=grad_norm)
    return path


def riemannian_distance(field, x, y, method="shooting", cfg=DEFAULT_CONFIG):
    """Geodesic distance between ``x`` and ``y``.

    ``method`` selects the solver: ``"shooting"`` returns
    ``sqrt(g_x(v, v))`` for the shot log ``v``; ``"bvp"`` and ``"curve"``
    return the length of the fitted curve.
    """
    x = as_point(x, field.dim)
    y = as_point(y, field.dim)
    if np.array_equal(x, y):
        return 0.0
    if method == "shooting":
        v = log_map_shooting(field, x, y, cfg)
        return field.norm(x, v)
    if method == "bvp":
        return geodesic_bvp(field, x, y, cfg).info["length"]
    if method == "curve":
        return geodesic_regression_curve(field, x, y, cfg=cfg).info["length"]
    raise ValueError(f"unknown distance method {method!r}")


def frechet_mean(field, points, cfg=DEFAULT_CONFIG, init=None):
    """Karcher mean by the fixed-point iteration ``q <- Exp_q(mean_i Log_q(x_i))``.

    Stops when the g-norm of the mean logarithm is at most ``cfg.tol``.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if len(points) == 0:
        raise ValueError("frechet_mean needs at least one point")
    if len(points) == 1:
        return points[0].copy()
    q = points.mean(axis=0) if init is None else as_point(init, field.dim)
    step_norm = np.inf
    for _ in range(cfg.max_iter):
        mean_log = np.mean([log_map_shooting(field, q, p, cfg) for p in points], axis=0)
        step_norm = field.norm(q, mean_log)
        if step_norm <= cfg.tol:
            return q
        q = exp_endpoint(field, q, mean_log, cfg)
    raise NoConvergenceError(f"Frechet mean iteration stalled at {step_norm:.3e}", best=q, residual=step_norm)
