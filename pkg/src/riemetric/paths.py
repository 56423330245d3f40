"""Discretized curves and their length and energy."""

import io
from dataclasses import dataclass, field as dc_field

import numpy as np


@dataclass(frozen=True)
class GeodesicPath:
    """A sampled curve on ``[0, 1]``.

    Attributes
    ----------
    times : (n,) array
        Strictly increasing, from 0 to 1.
    points : (n, d) array
    velocities : (n, d) array
        Curve derivative with respect to ``times`` at each node.
    converged : bool
        False when the producing solver stopped early; the path is then
        its best iterate.
    info : dict
        Solver diagnostics (energy history, fitted coefficients, ...).
    """

    times: np.ndarray
    points: np.ndarray
    velocities: np.ndarray
    converged: bool = True
    info: dict = dc_field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        p = np.atleast_2d(np.asarray(self.points, dtype=float))
        v = np.atleast_2d(np.asarray(self.velocities, dtype=float))
        if not (len(t) == len(p) == len(v)) or len(t) < 2:
            raise ValueError("times, points and velocities must have equal length >= 2")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        if t[0] != 0.0 or t[-1] != 1.0:
            raise ValueError("times must run from 0 to 1")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "points", p)
        object.__setattr__(self, "velocities", v)

    @property
    def start(self):
        return self.points[0]

    @property
    def end(self):
        return self.points[-1]

    @classmethod
    def from_points(cls, points, times=None, converged=True):
        """Path through ``points`` with velocities from finite differences."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if times is None:
            times = np.linspace(0.0, 1.0, len(points))
        velocities = np.gradient(points, times, axis=0, edge_order=2 if len(points) > 2 else 1)
        return cls(times, points, velocities, converged)

    def to_text(self, delimiter=","):
        """Delimited table with columns ``t, x0.., v0..`` for plotting."""
        d = self.points.shape[1]
        header = delimiter.join(["t"] + [f"x{i}" for i in range(d)] + [f"v{i}" for i in range(d)])
        buf = io.StringIO()
        table = np.column_stack([self.times, self.points, self.velocities])
        np.savetxt(buf, table, delimiter=delimiter, fmt="%.17g", header=header, comments="")
        return buf.getvalue()

    @classmethod
    def from_text(cls, text, delimiter=","):
        table = np.loadtxt(io.StringIO(text), delimiter=delimiter, skiprows=1, ndmin=2)
        d = (table.shape[1] - 1) // 2
        return cls(table[:, 0], table[:, 1:1 + d], table[:, 1 + d:])


def _speeds_sq(field, curve):
    return np.array([v @ field.metric_at(x) @ v for x, v in zip(curve.points, curve.velocities)])


def path_length(field, curve):
    """Trapezoid estimate of the integral of ``sqrt(g(dot gamma, dot gamma))``."""
    speeds = np.sqrt(np.maximum(_speeds_sq(field, curve), 0.0))
    return float(np.trapezoid(speeds, curve.times))


def path_energy(field, curve):
    """Trapezoid estimate of the integral of ``g(dot gamma, dot gamma)``."""
    return float(np.trapezoid(_speeds_sq(field, curve), curve.times))
