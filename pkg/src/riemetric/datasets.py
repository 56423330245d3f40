"""Synthetic datasets: interleaved spirals, an anisotropic grid, geodesic trajectories."""

from dataclasses import dataclass, field as dc_field

import numpy as np

from .objectives import TrajectorySet, TripletSet, geodesic_at_times

SPIRAL_DEFAULTS = {"turns": 2.0, "a": 0.5, "noise": 0.05, "theta_min": np.pi / 2}


@dataclass
class LabeledDataset:
    """Points with integer class labels; ``metadata`` records generator settings."""

    points: np.ndarray
    labels: np.ndarray
    metadata: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.labels = np.asarray(self.labels, dtype=int).ravel()
        if len(self.points) != len(self.labels):
            raise ValueError("points and labels must have equal length")

    def __len__(self):
        return len(self.labels)

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def classes(self):
        return np.unique(self.labels)

    def subset(self, idx):
        idx = np.asarray(idx)
        return LabeledDataset(self.points[idx], self.labels[idx], dict(self.metadata))


def spiral_angles(n, turns=2.0, theta_min=np.pi / 2):
    """Evenly spaced angles covering ``turns`` revolutions after ``theta_min``."""
    return np.linspace(theta_min, theta_min + 2 * np.pi * turns, n)


def gen_spiral(n_per_class, turns=2.0, a=0.5, noise=0.05, seed=0):
    """Two interleaved Archimedean spirals ``r = a * theta``.

    Class 1 is class 0 rotated by ``pi``. Angles are evenly spaced, then
    isotropic Gaussian noise of standard deviation ``noise`` is added.
    Points are ordered class by class, angle ascending.
    """
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    if noise < 0:
        raise ValueError("noise must be >= 0")
    theta = spiral_angles(n_per_class, turns, SPIRAL_DEFAULTS["theta_min"])
    r = a * theta
    arm = np.c_[r * np.cos(theta), r * np.sin(theta)]
    points = np.vstack([arm, -arm])
    labels = np.repeat([0, 1], n_per_class)
    rng = np.random.default_rng(seed)
    if noise > 0:
        points = points + noise * rng.standard_normal(points.shape)
    meta = {"generator": "spiral", "n_per_class": n_per_class, "turns": turns, "a": a,
            "noise": noise, "seed": seed, "theta_min": SPIRAL_DEFAULTS["theta_min"]}
    return LabeledDataset(points, labels, meta)


def gen_aniso_grid(n, scale_x=1.0, scale_y=0.3, seed=0, noise=0.0):
    """``n x n`` grid whose class is the row parity.

    Columns are ``scale_x / 2`` apart and rows ``scale_y`` apart. With the
    default scales the nearest Euclidean neighbor lies in the adjacent row
    (other class) while the nearest same-class point is in the same row.
    Under ``G = diag(scale_x^-2, scale_y^-2)`` the same row becomes closer
    (1/2 against 1); ``metadata["G"]`` records that matrix.
    ``noise`` adds seeded Gaussian jitter relative to the scales.
    """
    if not (scale_x > 0 and scale_y > 0):
        raise ValueError("scales must be > 0")
    if n < 2:
        raise ValueError("grid side must be >= 2")
    ix, iy = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    points = np.c_[0.5 * scale_x * ix.ravel(), scale_y * iy.ravel()]
    labels = iy.ravel() % 2
    if noise > 0:
        rng = np.random.default_rng(seed)
        points = points + noise * rng.standard_normal(points.shape) * [scale_x, scale_y]
    G = np.diag([scale_x ** -2, scale_y ** -2])
    meta = {"generator": "aniso_grid", "n": n, "scale_x": scale_x, "scale_y": scale_y,
            "noise": noise, "seed": seed, "G": G.tolist()}
    return LabeledDataset(points, labels, meta)


def gen_trajectories(field, n_traj, samples_per, noise=0.0, seed=0, low=-1.0, high=1.0,
                     speed=0.5, steps=200):
    """Noisy samples of random geodesics of ``field``.

    Start points are uniform in the box ``[low, high]^d``, initial
    velocities Gaussian with scale ``speed``; timestamps are sorted uniform
    draws on ``[0, 1]``.
    """
    if samples_per < 2:
        raise ValueError("each trajectory needs >= 2 samples")
    rng = np.random.default_rng(seed)
    d = field.dim
    lo = np.broadcast_to(np.asarray(low, dtype=float), (d,))
    hi = np.broadcast_to(np.asarray(high, dtype=float), (d,))
    times, points = [], []
    for _ in range(n_traj):
        q = lo + (hi - lo) * rng.random(d)
        v = speed * rng.standard_normal(d)
        t = np.sort(rng.random(samples_per))
        while np.any(np.diff(t) <= 0):
            t = np.sort(rng.random(samples_per))
        x = geodesic_at_times(field, q, v, t, steps)
        if noise > 0:
            x = x + noise * rng.standard_normal(x.shape)
        times.append(t)
        points.append(x)
    return TrajectorySet(times, points)


def nearest_triplets(dataset, field=None):
    """One triplet per point: nearest same-class and nearest other-class neighbor.

    Neighbors are chosen under the Euclidean chart distance, or under a
    constant metric when ``field`` is given.
    """
    X, y = dataset.points, dataset.labels
    G = np.eye(X.shape[1]) if field is None else field.metric_at(X[0])
    diff = X[:, None, :] - X[None, :, :]
    d2 = np.einsum("nmi,ij,nmj->nm", diff, G, diff)
    np.fill_diagonal(d2, np.inf)
    same = y[:, None] == y[None, :]
    out = []
    for i in range(len(X)):
        pos = np.where(same[i], d2[i], np.inf)
        neg = np.where(~same[i], d2[i], np.inf)
        if np.isfinite(pos.min()) and np.isfinite(neg.min()):
            out.append([X[i], X[int(np.argmin(pos))], X[int(np.argmin(neg))]])
    return TripletSet(np.array(out))
