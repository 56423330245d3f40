"""Command-line interface: ``riemetric <task> [options]``.

Every invocation is turned into a :class:`~riemetric.io.RunConfig` and
executed by :func:`run`; ``--config FILE`` loads one from JSON and flags
given explicitly override it. Relative output paths resolve against
``$RIEMETRIC_OUTPUT_DIR`` (default: the working directory).

Exit status: 0 on success, 2 on invalid input, 3 when a solver fails to
converge.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import io as rio
from .classify import accuracy, knn_classify, loo_accuracy
from .datasets import LabeledDataset, gen_aniso_grid, gen_spiral, gen_trajectories, nearest_triplets
from .errors import BlowUpError, EfficiencyError, NoConvergenceError, RiemetricError
from .geodesic import SolverConfig, exp_map, geodesic_bvp, geodesic_regression_curve, log_map_shooting
from .geodesic import riemannian_distance
from .hyperbolic import HyperbolicHalfPlane
from .learn import FitConfig, fit
from .metrics import ConstantMetric, DensityMetric, KernelMetric, median_pairwise_distance
from .objectives import PairSets
from .paths import GeodesicPath
from .spd import SpdAffineMetric
from .transport import fanning_scheme, parallel_transport_ode, pole_ladder, schild_ladder
from .volume import sample_by_volume

EXIT_OK, EXIT_INVALID, EXIT_NO_CONVERGENCE = 0, 2, 3

DEFAULT_OUTPUTS = {
    "gen": "dataset.csv",
    "fit": "metric.json",
    "eval": "predictions.csv",
    "dist": "distance.txt",
    "geodesic": "geodesic.csv",
    "transport": "transport.txt",
    "sample": "samples.csv",
    "export-plot": "plot.csv",
}


def load_metric(spec, dim=None):
    """Metric from a JSON file or a builtin name: ``identity[:d]``, ``hyperbolic``, ``spd:n``."""
    if spec is None:
        return None
    if not rio.is_builtin_metric(spec):
        return rio.read_metric(spec)
    name, _, arg = spec.partition(":")
    if name == "identity":
        return ConstantMetric.identity(int(arg) if arg else (dim or 2))
    if name == "hyperbolic":
        return HyperbolicHalfPlane()
    return SpdAffineMetric(int(arg) if arg else 2)


def parse_vector(text):
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        return np.asarray(text, dtype=float)
    return np.array([float(v) for v in str(text).split(",")])


def _box_corner(text, default):
    return default if text is None else parse_vector(text)


def _solver_cfg(rc):
    return SolverConfig(**rc.solver)


def _fmt_vec(v):
    return ",".join(f"{float(x):.17g}" for x in np.atleast_1d(v)) + "\n"


def _task_gen(rc, out):
    p = rc.params
    kind = p.get("kind", "spiral")
    if kind == "spiral":
        data = gen_spiral(int(p.get("n", 200)), p.get("turns", 2.0), p.get("a", 0.5), p.get("noise", 0.05), rc.seed)
        rio.write_points(out, data)
    elif kind == "aniso":
        data = gen_aniso_grid(int(p.get("n", 8)), p.get("scale_x", 1.0), p.get("scale_y", 0.3), rc.seed,
                              p.get("noise", 0.0))
        rio.write_points(out, data)
    elif kind == "trajectories":
        field = load_metric(rc.inputs.get("metric") or "identity:2")
        trs = gen_trajectories(field, int(p.get("n", 5)), int(p.get("samples", 10)), p.get("noise", 0.0), rc.seed,
                               _box_corner(p.get("low"), -1.0), _box_corner(p.get("high"), 1.0),
                               p.get("speed", 0.5))
        rio.write_trajectories(out, trs)
    else:
        raise ValueError(f"unknown dataset kind {kind!r}")
    return [out]


def _initial_family(rc, points):
    if rc.inputs.get("metric"):
        return load_metric(rc.inputs["metric"], points.shape[1])
    fam = rc.family or "constant"
    fp = rc.family_params
    d = points.shape[1]
    if fam == "constant":
        return ConstantMetric(np.eye(d), fp.get("eps", 0.0), fp.get("parametrization", "factor"))
    if fam == "density":
        return DensityMetric(points, fp.get("sigma"), fp.get("eps", 1e-2), fp.get("subsample"), rc.seed)
    if fam == "kernel":
        m = min(int(fp.get("centers", 8)), len(points))
        idx = np.sort(np.random.default_rng(rc.seed).choice(len(points), m, replace=False))
        sigma = fp.get("sigma") or median_pairwise_distance(points[idx])
        return KernelMetric(points[idx], np.tile(np.eye(d), (m, 1, 1)), sigma, fp.get("eps", 1e-3))
    raise ValueError(f"unknown metric family {fam!r}")


def _task_fit(rc, out):
    obj = rc.objective or "triplet"
    path = rc.inputs.get("data")
    if path is None:
        raise ValueError("fit needs --data")
    with open(path) as fh:
        text = fh.read()
    if obj in ("triplet", "contrastive"):
        data = rio.points_from_text(text)
        if not isinstance(data, LabeledDataset):
            raise ValueError(f"{obj} objective needs labeled points")
        points = data.points
        triplets = nearest_triplets(data)
        if obj == "triplet":
            payload = triplets
        else:
            t = triplets.triplets
            payload = PairSets(t[:, [0, 1]], t[:, [0, 2]])
    elif obj == "distance":
        payload = rio.observations_from_text(text)
        points = np.vstack([payload.x, payload.y])
    elif obj == "trajectory":
        payload = rio.trajectories_from_text(text)
        points = np.vstack(payload.points)
    else:
        raise ValueError(f"unknown objective {obj!r}")
    family = _initial_family(rc, points)
    kwargs = dict(rc.objective_params)
    if obj != "trajectory":
        kwargs.setdefault("backend", "auto")
    kwargs["cfg"] = _solver_cfg(rc)
    fcfg = FitConfig(seed=rc.seed, **rc.fit)
    report = fit(family, obj, payload, fcfg, kwargs)
    stem = os.path.splitext(out)[0]
    rio.write_metric(out, report.metric)
    rio.write_text(stem + ".report.json", report.to_text(include_time=False))
    rio.write_text(stem + ".loss.csv", report.loss_curve_text())
    print(f"termination: {report.termination}  iterations: {report.n_iter}  loss: {report.final_loss:.6g}")
    return [out, stem + ".report.json", stem + ".loss.csv"]


def _task_eval(rc, out):
    p = rc.params
    train = rio.read_points(rc.inputs["train"])
    if not isinstance(train, LabeledDataset):
        raise ValueError("training file must be labeled")
    field = load_metric(rc.inputs.get("metric"), train.dim)
    backend = p.get("backend", "auto")
    k = int(p.get("k", 1))
    cfg = _solver_cfg(rc)
    query_path = rc.inputs.get("query")
    if query_path is None:
        acc = loo_accuracy(field, train, k, backend, cfg)
        pred = None
    else:
        query = rio.read_points(query_path)
        qpts = query.points if isinstance(query, LabeledDataset) else query
        pred = knn_classify(field, train, qpts, k, backend, cfg, int(p.get("graph_k", 10)))
        acc = accuracy(pred, query.labels) if isinstance(query, LabeledDataset) else None
        rio.write_points(out, LabeledDataset(qpts, pred))
    summary = {"format_version": rio.FORMAT_VERSION, "k": k, "backend": backend,
               "accuracy": acc, "leave_one_out": query_path is None}
    stem = os.path.splitext(out)[0]
    rio.write_text(stem + ".summary.json", rio.dumps(summary))
    if acc is not None:
        print(f"accuracy: {acc:.6f}")
    return ([] if pred is None else [out]) + [stem + ".summary.json"]


def _task_dist(rc, out):
    p = rc.params
    x, y = parse_vector(p.get("x")), parse_vector(p.get("y"))
    field = load_metric(rc.inputs.get("metric") or "identity", len(x))
    method = p.get("method", "shooting")
    if method == "closed":
        if not isinstance(field, ConstantMetric):
            raise ValueError("closed-form distance needs a constant metric")
        d = field.distance(x, y)
    else:
        d = riemannian_distance(field, x, y, method, _solver_cfg(rc))
    rio.write_text(out, f"{d:.17g}\n")
    print(f"{d:.17g}")
    return [out]


def _task_geodesic(rc, out):
    p = rc.params
    x = parse_vector(p.get("x"))
    field = load_metric(rc.inputs.get("metric") or "identity", len(x))
    cfg = _solver_cfg(rc)
    if p.get("v") is not None:
        path = exp_map(field, x, parse_vector(p["v"]), cfg)
    elif p.get("y") is not None:
        y = parse_vector(p["y"])
        method = p.get("method", "shooting")
        if method == "shooting":
            path = exp_map(field, x, log_map_shooting(field, x, y, cfg), cfg)
        elif method == "bvp":
            path = geodesic_bvp(field, x, y, cfg, strict=True)
        elif method == "curve":
            path = geodesic_regression_curve(field, x, y, cfg=cfg, strict=True)
        else:
            raise ValueError(f"unknown geodesic method {method!r}")
    else:
        raise ValueError("geodesic needs --v (exponential map) or --y (boundary problem)")
    rio.write_text(out, path.to_text())
    return [out]


def _task_transport(rc, out):
    p = rc.params
    x, v, w = (parse_vector(p.get(k)) for k in ("x", "v", "w"))
    if x is None or v is None or w is None:
        raise ValueError("transport needs --x, --v and --w")
    field = load_metric(rc.inputs.get("metric") or "identity", len(x))
    cfg = _solver_cfg(rc)
    method = p.get("method", "ode")
    if method == "fanning":
        res = fanning_scheme(field, x, v, w, int(p.get("steps", 100)))
    else:
        curve = exp_map(field, x, v, cfg)
        if method == "ode":
            res = parallel_transport_ode(field, curve, w)
        elif method == "schild":
            res = schild_ladder(field, curve, w, int(p.get("rungs", 8)), cfg)
        elif method == "pole":
            res = pole_ladder(field, curve, w, int(p.get("rungs", 8)), cfg)
        else:
            raise ValueError(f"unknown transport method {method!r}")
    rio.write_text(out, _fmt_vec(res))
    print(_fmt_vec(res), end="")
    return [out]


def _task_sample(rc, out):
    p = rc.params
    low, high = parse_vector(p.get("low")), parse_vector(p.get("high"))
    if low is None or high is None:
        raise ValueError("sample needs --low and --high")
    field = load_metric(rc.inputs.get("metric") or "identity", len(low))
    pts = sample_by_volume(field, (low, high), int(p.get("n", 1000)), rc.seed)
    rio.write_points(out, pts)
    return [out]


def _task_export_plot(rc, out):
    src = rc.inputs.get("input")
    if src is None:
        raise ValueError("export-plot needs --input")
    with open(src) as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        if "loss_history" not in doc:
            raise ValueError("JSON input is not a fit report")
        rows = ["iter,loss,grad_norm"]
        for k, (v, g) in enumerate(zip(doc["loss_history"], doc["grad_norm_history"])):
            rows.append(f"{k},{v:.17g},{g:.17g}")
        rio.write_text(out, "\n".join(rows) + "\n")
    else:
        path = GeodesicPath.from_text(text)
        d = path.points.shape[1]
        rows = [",".join(["t"] + [f"x{i}" for i in range(d)])]
        for t, q in zip(path.times, path.points):
            rows.append(",".join(f"{u:.17g}" for u in (t, *q)))
        rio.write_text(out, "\n".join(rows) + "\n")
    return [out]


TASK_FUNCS = {
    "gen": _task_gen,
    "fit": _task_fit,
    "eval": _task_eval,
    "dist": _task_dist,
    "geodesic": _task_geodesic,
    "transport": _task_transport,
    "sample": _task_sample,
    "export-plot": _task_export_plot,
}


def run(rc):
    """Execute a :class:`RunConfig`; returns the list of files written."""
    rc.check_inputs()
    out = rio.output_path(rc.output or DEFAULT_OUTPUTS[rc.task])
    return TASK_FUNCS[rc.task](rc, out)


# flag name -> (RunConfig section, key, type)
_FLAGS = {
    "gen": [("kind", "params", str), ("n", "params", int), ("noise", "params", float), ("turns", "params", float),
            ("a", "params", float), ("scale_x", "params", float), ("scale_y", "params", float),
            ("samples", "params", int), ("speed", "params", float), ("low", "params", str),
            ("high", "params", str), ("metric", "inputs", str)],
    "fit": [("data", "inputs", str), ("metric", "inputs", str), ("objective", None, str), ("family", None, str),
            ("max_iter", "fit", int), ("step_size", "fit", float), ("tol", "fit", float),
            ("spd_floor", "fit", float), ("batch_size", "fit", int), ("margin", "objective_params", float),
            ("backend", "objective_params", str), ("variant", "objective_params", str)],
    "eval": [("train", "inputs", str), ("query", "inputs", str), ("metric", "inputs", str), ("k", "params", int),
             ("backend", "params", str), ("graph_k", "params", int)],
    "dist": [("metric", "inputs", str), ("x", "params", str), ("y", "params", str), ("method", "params", str)],
    "geodesic": [("metric", "inputs", str), ("x", "params", str), ("v", "params", str), ("y", "params", str),
                 ("method", "params", str)],
    "transport": [("metric", "inputs", str), ("x", "params", str), ("v", "params", str), ("w", "params", str),
                  ("method", "params", str), ("rungs", "params", int), ("steps", "params", int)],
    "sample": [("metric", "inputs", str), ("low", "params", str), ("high", "params", str), ("n", "params", int)],
    "export-plot": [("input", "inputs", str)],
}
# flag name -> SolverConfig field
_SOLVER_FLAGS = [("integrator", "integrator", str), ("steps", "steps", int), ("bvp_nodes", "bvp_nodes", int),
                 ("solver_tol", "tol", float)]


def build_parser():
    parser = argparse.ArgumentParser(prog="riemetric", description="Riemannian metric toolkit.")
    sub = parser.add_subparsers(dest="task", required=True)
    for task, flags in _FLAGS.items():
        sp = sub.add_parser(task)
        sp.add_argument("--config", help="RunConfig JSON; explicit flags override it")
        sp.add_argument("-o", "--output")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--save-config", help="also write the effective RunConfig here")
        for name, _, typ in flags:
            sp.add_argument("--" + name.replace("_", "-"), dest=name, type=typ)
        if task == "fit":
            sp.add_argument("--backtracking", action="store_true", default=None)
        names = {n for n, _, _ in flags}
        for name, key, typ in _SOLVER_FLAGS:
            if name not in names:
                sp.add_argument("--" + name.replace("_", "-"), dest="solver_" + key, type=typ)
    return parser


def config_from_args(args):
    if args.config:
        rc = rio.read_run_config(args.config)
        if rc.task != args.task:
            raise ValueError(f"config is for task {rc.task!r}, not {args.task!r}")
    else:
        rc = rio.RunConfig(args.task)
    if args.seed is not None:
        rc.seed = args.seed
    if args.output is not None:
        rc.output = args.output
    for name, section, _ in _FLAGS[args.task]:
        val = getattr(args, name)
        if val is None:
            continue
        if section is None:
            setattr(rc, name, val)
        else:
            getattr(rc, section)[name] = val
    if getattr(args, "backtracking", None):
        rc.fit["backtracking"] = True
    for _, key, _ in _SOLVER_FLAGS:
        val = getattr(args, "solver_" + key, None)
        if val is not None:
            rc.solver[key] = val
    return rc


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        rc = config_from_args(args)
        if args.save_config:
            rio.write_run_config(rio.output_path(args.save_config), rc)
        for path in run(rc):
            print(f"wrote {path}")
    except (NoConvergenceError, BlowUpError, EfficiencyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except (ValueError, TypeError, KeyError, OSError, RiemetricError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
