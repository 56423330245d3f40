"""Plain-text file formats for datasets, trajectories, metrics and run configs.

Numbers are written with 17 significant digits so every float64 survives
a write/read round trip exactly. Structured documents are JSON with a
``format_version`` key.
"""

import json
import os
import re
from dataclasses import asdict, dataclass, field as dc_field, fields

import numpy as np

from .datasets import LabeledDataset
from .hyperbolic import HyperbolicHalfPlane
from .metrics import ConstantMetric, DensityMetric, KernelMetric, VoronoiMetric
from .objectives import DistanceObservations, TrajectorySet
from .spd import SpdAffineMetric

FORMAT_VERSION = 1
OUTPUT_DIR_ENV = "RIEMETRIC_OUTPUT_DIR"


BUILTIN_METRIC = re.compile(r"^(identity(:\d+)?|hyperbolic|spd(:\d+)?)$")


def is_builtin_metric(spec):
    """True for the builtin names ``identity[:d]``, ``hyperbolic`` and ``spd[:n]``."""
    return bool(BUILTIN_METRIC.match(spec)) and not os.path.exists(spec)


def _fmt(x):
    return f"{float(x):.17g}"


def output_path(name, directory=None):
    """Resolve an output file name against ``directory`` or ``$RIEMETRIC_OUTPUT_DIR``."""
    if os.path.isabs(name):
        return name
    base = directory if directory is not None else os.environ.get(OUTPUT_DIR_ENV, ".")
    return os.path.join(base, name)


def write_text(path, text):
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def points_to_text(data, delimiter=","):
    """Header line ``d,n,n_classes`` followed by one ``x_0,...,x_{d-1},label`` row per point.

    Unlabeled point arrays are written with ``n_classes = 0`` and no label
    column.
    """
    if isinstance(data, LabeledDataset):
        X, y = data.points, data.labels
    else:
        X, y = np.atleast_2d(np.asarray(data, dtype=float)), None
    n, d = X.shape
    k = 0 if y is None else len(np.unique(y))
    rows = [delimiter.join(map(str, (d, n, k)))]
    for i in range(n):
        vals = [_fmt(v) for v in X[i]]
        if y is not None:
            vals.append(str(int(y[i])))
        rows.append(delimiter.join(vals))
    return "\n".join(rows) + "\n"


def points_from_text(text, delimiter=","):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty points file")
    try:
        d, n, k = (int(v) for v in lines[0].split(delimiter))
    except ValueError as exc:
        raise ValueError(f"bad points header {lines[0]!r}; expected d,n,n_classes") from exc
    body = lines[1:]
    if len(body) != n:
        raise ValueError(f"header announces {n} points, file has {len(body)}")
    rows = [ln.split(delimiter) for ln in body]
    width = d + (1 if k else 0)
    if any(len(r) != width for r in rows):
        raise ValueError(f"every row must have {width} fields")
    X = np.array([[float(v) for v in r[:d]] for r in rows]).reshape(n, d)
    if not k:
        return X
    return LabeledDataset(X, np.array([int(r[d]) for r in rows], dtype=int))


def write_points(path, data):
    write_text(path, points_to_text(data))


def read_points(path):
    with open(path) as fh:
        return points_from_text(fh.read())


def trajectories_to_text(trs, delimiter=","):
    """One ``id,t,x_0,...`` record per sample, preceded by a column header."""
    d = trs.points[0].shape[1]
    rows = [delimiter.join(["id", "t"] + [f"x{i}" for i in range(d)])]
    for tid, t, P in zip(trs.ids, trs.times, trs.points):
        for tj, p in zip(t, P):
            rows.append(delimiter.join([str(tid), _fmt(tj)] + [_fmt(v) for v in p]))
    return "\n".join(rows) + "\n"


def trajectories_from_text(text, delimiter=","):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("id"):
        raise ValueError("trajectory file must start with an 'id,t,x0,...' header")
    groups = {}
    for ln in lines[1:]:
        parts = ln.split(delimiter)
        groups.setdefault(parts[0], []).append([float(v) for v in parts[1:]])
    ids, times, points = [], [], []
    for tid, recs in groups.items():
        a = np.array(recs)
        ids.append(int(tid) if tid.lstrip("-").isdigit() else tid)
        times.append(a[:, 0])
        points.append(a[:, 1:])
    return TrajectorySet(times, points, ids)


def write_trajectories(path, trs):
    write_text(path, trajectories_to_text(trs))


def read_trajectories(path):
    with open(path) as fh:
        return trajectories_from_text(fh.read())


def observations_from_text(text, delimiter=","):
    """Rows ``x_0..x_{d-1},y_0..y_{d-1},d_obs[,weight]`` after a header line ``d``."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    d = int(lines[0].split(delimiter)[0])
    a = np.array([[float(v) for v in ln.split(delimiter)] for ln in lines[1:]])
    w = a[:, 2 * d + 1] if a.shape[1] > 2 * d + 1 else None
    return DistanceObservations(a[:, :d], a[:, d:2 * d], a[:, 2 * d], w)


def observations_to_text(obs, delimiter=","):
    d = obs.x.shape[1]
    rows = [str(d)]
    for x, y, v, w in zip(obs.x, obs.y, obs.d_obs, obs.weight):
        rows.append(delimiter.join([_fmt(u) for u in (*x, *y, v, w)]))
    return "\n".join(rows) + "\n"


def metric_to_dict(metric):
    """JSON-ready description of a metric field."""
    if isinstance(metric, ConstantMetric):
        body = {"family": "constant", "A": metric.A.tolist(), "eps": metric.eps,
                "parametrization": metric.parametrization}
    elif isinstance(metric, VoronoiMetric):
        body = {"family": "voronoi", "centers": metric.centers.tolist(), "factors": metric.factors.tolist()}
    elif isinstance(metric, KernelMetric):
        body = {"family": "kernel", "centers": metric.centers.tolist(), "factors": metric.factors.tolist(),
                "log_sigma": metric.log_sigma, "eps": metric.eps, "normalize": metric.normalize}
    elif isinstance(metric, DensityMetric):
        body = {"family": "density", "anchors": metric.anchors.tolist(),
                "log_sigma": metric.log_sigma, "log_eps": metric.log_eps}
    elif isinstance(metric, HyperbolicHalfPlane):
        body = {"family": "hyperbolic"}
    elif isinstance(metric, SpdAffineMetric):
        body = {"family": "spd_affine", "n": metric.n}
    else:
        raise TypeError(f"cannot serialize {type(metric).__name__}")
    return {"format_version": FORMAT_VERSION, **body}


def metric_from_dict(doc):
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported metric format_version {version!r}")
    fam = doc.get("family")
    if fam == "constant":
        return ConstantMetric(doc["A"], doc.get("eps", 0.0), doc.get("parametrization", "factor"))
    if fam == "voronoi":
        return VoronoiMetric(doc["centers"], factors=doc["factors"])
    if fam == "kernel":
        return KernelMetric(doc["centers"], factors=doc["factors"], log_sigma=doc["log_sigma"],
                            eps=doc.get("eps", 0.0), normalize=doc.get("normalize", False))
    if fam == "density":
        return DensityMetric(doc["anchors"], log_sigma=doc["log_sigma"], log_eps=doc["log_eps"])
    if fam == "hyperbolic":
        return HyperbolicHalfPlane()
    if fam == "spd_affine":
        return SpdAffineMetric(doc["n"])
    raise ValueError(f"unknown metric family {fam!r}")


def dumps(doc):
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def write_metric(path, metric):
    write_text(path, dumps(metric_to_dict(metric)))


def read_metric(path):
    with open(path) as fh:
        return metric_from_dict(json.load(fh))


TASKS = ("gen", "fit", "eval", "dist", "geodesic", "transport", "sample", "export-plot")


@dataclass
class RunConfig:
    """Everything one CLI task needs; mirrors the command-line flags."""

    task: str
    seed: int = 0
    params: dict = dc_field(default_factory=dict)
    family: str = None
    family_params: dict = dc_field(default_factory=dict)
    objective: str = None
    objective_params: dict = dc_field(default_factory=dict)
    solver: dict = dc_field(default_factory=dict)
    fit: dict = dc_field(default_factory=dict)
    inputs: dict = dc_field(default_factory=dict)
    output: str = None

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}; expected one of {', '.join(TASKS)}")

    def check_inputs(self):
        for key, path in self.inputs.items():
            if path is None or (key == "metric" and is_builtin_metric(path)):
                continue
            if not os.path.exists(path):
                raise FileNotFoundError(f"input {key!r} not found: {path}")

    def to_dict(self):
        return {"format_version": FORMAT_VERSION, **asdict(self)}

    @classmethod
    def from_dict(cls, doc):
        doc = dict(doc)
        if doc.pop("format_version", None) != FORMAT_VERSION:
            raise ValueError("unsupported run config format_version")
        known = {f.name for f in fields(cls)}
        extra = set(doc) - known
        if extra:
            raise ValueError(f"unknown run config keys: {sorted(extra)}")
        return cls(**doc)


def write_run_config(path, cfg):
    write_text(path, dumps(cfg.to_dict()))


def read_run_config(path):
    with open(path) as fh:
        return RunConfig.from_dict(json.load(fh))
