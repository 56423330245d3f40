"""Riemannian volume density and sampling from it."""

import itertools

import numpy as np

from .core import as_point
from .errors import EfficiencyError

MIN_ACCEPTANCE = 1e-4


def volume_density(field, x):
    """``sqrt(det g_x)``."""
    return float(np.sqrt(abs(np.linalg.det(field.metric_at(x)))))


def _scan_bound(field, lo, hi, grid_points):
    d = len(lo)
    per_axis = max(2, min(101, int(round(grid_points ** (1.0 / d)))))
    axes = [np.linspace(a, b, per_axis) for a, b in zip(lo, hi)]
    return max(volume_density(field, np.array(p)) for p in itertools.product(*axes))


def sample_by_volume(field, box, n, seed=0, grid_points=4096, batch=1024):
    """Rejection-sample ``n`` points with density proportional to ``sqrt(det g)``.

    Parameters
    ----------
    box : pair of arrays
        Lower and upper corners of the sampling box.
    grid_points : int
        Size of the grid scanned for the density bound, which is inflated
        by 10 % for the proposal envelope.

    Raises
    ------
    EfficiencyError
        If the acceptance rate drops below ``1e-4``.
    """
    lo = as_point(box[0], field.dim)
    hi = as_point(box[1], field.dim)
    if np.any(hi <= lo):
        raise ValueError("box upper corner must exceed lower corner")
    bound = 1.1 * _scan_bound(field, lo, hi, grid_points)
    rng = np.random.default_rng(seed)
    out = []
    proposed = 0
    while len(out) < n:
        cand = lo + (hi - lo) * rng.random((batch, field.dim))
        u = rng.random(batch) * bound
        proposed += batch
        for c, ui in zip(cand, u):
            if ui < volume_density(field, c):
                out.append(c)
                if len(out) == n:
                    break
        if proposed >= 100_000 and len(out) / proposed < MIN_ACCEPTANCE:
            raise EfficiencyError(f"acceptance rate {len(out) / proposed:.2e} below {MIN_ACCEPTANCE}")
    return np.array(out).reshape(n, field.dim)
