"""Fitting metric-family parameters with finite-difference Adam."""

import json
import time
from dataclasses import dataclass, field as dc_field, replace

import numpy as np

from .core import fd_step as default_fd_step
from .errors import NonFiniteLossError
from .metrics import ConstantMetric
from .objectives import (DistanceObservations, PairSets, TripletSet, TrajectorySet, contrastive_loss,
                         distance_regression_loss, trajectory_loss, triplet_loss)

OBJECTIVES = {
    "contrastive": contrastive_loss,
    "triplet": triplet_loss,
    "distance": distance_regression_loss,
    "trajectory": trajectory_loss,
}


@dataclass(frozen=True)
class FitConfig:
    """Optimizer settings.

    ``betas`` holds Adam's ``(beta1, beta2, eps)``. ``fd_step=None`` uses the
    default finite-difference rule. ``batch_size=None`` means full batch;
    otherwise pairs/triplets/observations are reshuffled every epoch with
    ``seed``.
    """

    max_iter: int = 2000
    step_size: float = 1e-2
    tol: float = 1e-6
    seed: int = 0
    betas: tuple = (0.9, 0.999, 1e-8)
    spd_floor: float = 1e-6
    fd_step: float = None
    backtracking: bool = False
    batch_size: int = None
    divergence_factor: float = 1e6

    def __post_init__(self):
        if self.max_iter < 0:
            raise ValueError("max_iter must be >= 0")
        for name in ("step_size", "spd_floor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.tol < 0:
            raise ValueError("tol must be >= 0")
        b1, b2, e = self.betas
        if not (0 <= b1 < 1 and 0 <= b2 < 1 and e > 0):
            raise ValueError("betas must be (beta1, beta2, eps) with 0 <= beta < 1 and eps > 0")
        if self.fd_step is not None and not self.fd_step > 0:
            raise ValueError("fd_step must be > 0")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def replace(self, **changes):
        return replace(self, **changes)


@dataclass
class FitReport:
    params: np.ndarray
    loss_history: list
    grad_norm_history: list
    termination: str
    wall_time: float
    metric: object = None
    message: str = ""
    extra: dict = dc_field(default_factory=dict)

    @property
    def n_iter(self):
        return len(self.loss_history) - 1

    @property
    def final_loss(self):
        return self.loss_history[-1]

    def to_dict(self):
        return {
            "format_version": 1,
            "termination": self.termination,
            "message": self.message,
            "iterations": self.n_iter,
            "wall_time": self.wall_time,
            "params": [float(p) for p in self.params],
            "loss_history": [float(v) for v in self.loss_history],
            "grad_norm_history": [float(v) for v in self.grad_norm_history],
        }

    def to_text(self, include_time=True):
        """JSON document; ``include_time=False`` drops the wall time for reproducible files."""
        d = self.to_dict()
        if not include_time:
            d.pop("wall_time")
        return json.dumps(d, indent=2) + "\n"

    def loss_curve_text(self, delimiter=","):
        rows = [f"iter{delimiter}loss{delimiter}grad_norm"]
        for k, (v, g) in enumerate(zip(self.loss_history, self.grad_norm_history)):
            rows.append(f"{k}{delimiter}{v:.17g}{delimiter}{g:.17g}")
        return "\n".join(rows) + "\n"


def project_spd(M, eps):
    """Nearest symmetric matrix with eigenvalues ``>= eps``.

    Symmetrizes, clamps the spectrum at ``eps`` and reconstructs. Inputs
    whose spectrum already clears the floor come back unchanged.
    """
    M = np.asarray(M, dtype=float)
    S = 0.5 * (M + M.T)
    w, V = np.linalg.eigh(S)
    if w[0] >= eps:
        return S
    out = (V * np.maximum(w, eps)) @ V.T
    return 0.5 * (out + out.T)


def fd_gradient(loss, theta, fd_step=None):
    """Central-difference gradient of ``loss`` at ``theta``.

    Raises :class:`NonFiniteLossError` naming the coordinate whose probe
    produced NaN or infinity.
    """
    theta = np.asarray(theta, dtype=float)
    h = default_fd_step(theta) if fd_step is None else float(fd_step)
    grad = np.empty_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        up, down = loss(theta + e), loss(theta - e)
        if not (np.isfinite(up) and np.isfinite(down)):
            raise NonFiniteLossError(f"non-finite loss probing coordinate {i}", coordinate=i)
        grad[i] = (up - down) / (2 * h)
    return grad


def _subset(data, idx):
    if isinstance(data, PairSets):
        sim = [i for i in idx if i < len(data.similar)]
        dis = [i - len(data.similar) for i in idx if i >= len(data.similar)]
        return PairSets(data.similar[sim], data.dissimilar[dis])
    if isinstance(data, TripletSet):
        return TripletSet(data.triplets[idx])
    if isinstance(data, DistanceObservations):
        return DistanceObservations(data.x[idx], data.y[idx], data.d_obs[idx], data.weight[idx])
    if isinstance(data, TrajectorySet):
        return TrajectorySet([data.times[i] for i in idx], [data.points[i] for i in idx],
                             [data.ids[i] for i in idx])
    raise TypeError(f"mini-batching is not supported for {type(data).__name__}")


def _size(data):
    if isinstance(data, PairSets):
        return len(data.similar) + len(data.dissimilar)
    if isinstance(data, TripletSet):
        return len(data.triplets)
    if isinstance(data, DistanceObservations):
        return len(data.d_obs)
    return len(data)


def _backtrack(loss_on, admissible, theta, direction, loss, lr, data, max_halvings=40):
    for _ in range(max_halvings + 1):
        cand = admissible(theta - lr * direction)
        new = loss_on(cand, data)
        if np.isfinite(new) and new <= loss:
            return cand, new
        lr *= 0.5
    return None


def _resolve(objective, kwargs):
    fn = OBJECTIVES[objective] if isinstance(objective, str) else objective
    if fn is None or not callable(fn):
        raise ValueError(f"unknown objective {objective!r}")
    return lambda field, data: fn(field, data, **kwargs)


def fit(family, objective, data, cfg=FitConfig(), objective_kwargs=None):
    """Minimize ``objective(family.with_params(theta), data)`` over ``theta``.

    Parameters
    ----------
    family : MetricField
        Initial metric; must provide ``params`` and ``with_params``.
    objective : str or callable
        ``"contrastive"``, ``"triplet"``, ``"distance"``, ``"trajectory"``
        or any ``f(field, data, **objective_kwargs) -> float``.
    data
        Dataset passed to the objective.
    cfg : FitConfig
    objective_kwargs : dict, optional
        Extra keyword arguments for the objective (``margin``, ``backend``,
        solver ``cfg``, ...).

    Returns
    -------
    FitReport
        ``termination`` is ``"converged"`` (gradient norm at most ``tol``),
        ``"max-iter"`` or ``"error"`` (divergence or no admissible step).

    Notes
    -----
    A :class:`ConstantMetric` that stores ``G`` directly is projected to the
    SPD cone (floor ``cfg.spd_floor``) before every evaluation, including
    finite-difference probes, so every metric the objective sees is SPD.
    Factor and log-space families are unconstrained and used as is.
    """
    start = time.perf_counter()
    fn = _resolve(objective, objective_kwargs or {})
    project = isinstance(family, ConstantMetric) and family.parametrization == "matrix"
    d = family.dim

    def admissible(theta):
        if project:
            return project_spd(theta.reshape(d, d), cfg.spd_floor).ravel()
        return theta

    rng = np.random.default_rng(cfg.seed)
    n_data = _size(data)
    batched = cfg.batch_size is not None and cfg.batch_size < n_data
    order, cursor = None, n_data

    def next_batch():
        nonlocal order, cursor
        if not batched:
            return data
        if cursor + cfg.batch_size > n_data:
            order, cursor = rng.permutation(n_data), 0
        idx = np.sort(order[cursor:cursor + cfg.batch_size])
        cursor += cfg.batch_size
        return _subset(data, idx)

    def loss_on(theta, batch):
        return float(fn(family.with_params(admissible(theta)), batch))

    theta = admissible(np.asarray(family.params(), dtype=float))
    batch = next_batch()
    loss = loss_on(theta, data)
    if not np.isfinite(loss):
        raise NonFiniteLossError("objective is not finite at the initial parameters")
    initial = loss
    grad = fd_gradient(lambda z: loss_on(z, batch), theta, cfg.fd_step)
    losses, gnorms = [loss], [float(np.linalg.norm(grad))]
    b1, b2, eps = cfg.betas
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    termination, message = "max-iter", ""
    t = 0
    while True:
        if gnorms[-1] <= cfg.tol:
            termination = "converged"
            break
        if t >= cfg.max_iter:
            break
        t += 1
        m = b1 * m + (1 - b1) * grad
        v = b2 * v + (1 - b2) * grad ** 2
        direction = (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
        if cfg.backtracking:
            step = _backtrack(loss_on, admissible, theta, direction, loss, cfg.step_size, data)
            if step is None:
                # momentum may point uphill; restart the moments from the raw gradient
                m, v, t = np.zeros_like(theta), np.zeros_like(theta), 0
                step = _backtrack(loss_on, admissible, theta, grad / (np.abs(grad) + eps), loss,
                                  cfg.step_size, data)
            if step is None:
                termination, message = "error", "no descent step found"
                break
            cand, new = step
        else:
            cand = admissible(theta - cfg.step_size * direction)
            new = loss_on(cand, data)
        if not np.isfinite(new) or abs(new) > cfg.divergence_factor * max(abs(initial), 1e-300):
            termination, message = "error", f"diverged at iteration {t} (loss {new!r})"
            break
        theta, loss = cand, new
        batch = next_batch()
        grad = fd_gradient(lambda z: loss_on(z, batch), theta, cfg.fd_step)
        losses.append(loss)
        gnorms.append(float(np.linalg.norm(grad)))
    return FitReport(theta.copy(), losses, gnorms, termination, time.perf_counter() - start,
                     metric=family.with_params(theta), message=message)
