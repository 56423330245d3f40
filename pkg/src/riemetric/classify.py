"""k-nearest-neighbor classification under a metric field."""

import numpy as np

from .errors import RiemetricError
from .geodesic import DEFAULT_CONFIG, riemannian_distance
from .graph import all_pairs_distances, build_knn_graph
from .metrics import ConstantMetric


def distance_matrix(field, A, B, backend="auto", cfg=DEFAULT_CONFIG, graph_k=10):
    """Distances from every row of ``A`` to every row of ``B``, shape ``(len(A), len(B))``.

    ``backend``: ``"closed"`` (constant metrics), ``"euclidean"``,
    ``"graph"`` (shortest paths on a kNN graph over ``A`` and ``B``
    together, ``graph_k`` neighbors) or a solver name. ``"auto"`` picks the
    closed form for constant metrics and the graph otherwise.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if backend == "auto":
        backend = "closed" if isinstance(field, ConstantMetric) else "graph"
    if backend in ("closed", "euclidean"):
        G = np.eye(A.shape[1]) if backend == "euclidean" or field is None else field.metric_at(A[0])
        if backend == "closed" and not isinstance(field, ConstantMetric):
            raise TypeError("closed-form distances need a ConstantMetric")
        diff = A[:, None, :] - B[None, :, :]
        return np.sqrt(np.maximum(np.einsum("nmi,ij,nmj->nm", diff, G, diff), 0.0))
    if backend == "graph":
        nodes = np.vstack([A, B])
        graph = build_knn_graph(nodes, min(graph_k, len(nodes) - 1), field)
        rows = all_pairs_distances(graph, np.arange(len(A)))
        return np.atleast_2d(rows)[:, len(A):]
    out = np.empty((len(A), len(B)))
    for i, a in enumerate(A):
        for j, b in enumerate(B):
            try:
                out[i, j] = riemannian_distance(field, a, b, backend, cfg)
            except RiemetricError as exc:
                exc.pair = (a.copy(), b.copy())
                raise
    return out


def vote(dist_row, labels, k):
    """Majority label among the ``k`` nearest entries of ``dist_row``.

    Distance ties go to the smaller training index and vote ties to the
    smaller class id.
    """
    order = np.lexsort((np.arange(len(dist_row)), dist_row))[:k]
    classes, counts = np.unique(labels[order], return_counts=True)
    return int(classes[np.argmax(counts)])


def knn_classify(field, train, query, k=1, backend="auto", cfg=DEFAULT_CONFIG, graph_k=10):
    """Predict labels for ``query`` by k-NN majority vote over ``train``.

    Parameters
    ----------
    field : MetricField or None
        ``None`` means Euclidean distances.
    train : LabeledDataset
    query : (m, d) array
    """
    if not 1 <= k <= len(train):
        raise ValueError(f"k must be in [1, {len(train)}], got {k}")
    if field is None:
        backend = "euclidean"
    query = np.atleast_2d(np.asarray(query, dtype=float))
    D = distance_matrix(field, query, train.points, backend, cfg, graph_k)
    return np.array([vote(row, train.labels, k) for row in D], dtype=int)


def loo_accuracy(field, data, k=1, backend="auto", cfg=DEFAULT_CONFIG):
    """Leave-one-out k-NN accuracy on a labeled dataset."""
    if field is None:
        backend = "euclidean"
    D = distance_matrix(field, data.points, data.points, backend, cfg)
    np.fill_diagonal(D, np.inf)
    pred = np.array([vote(row, data.labels, k) for row in D])
    return float(np.mean(pred == data.labels))


def accuracy(pred, labels):
    return float(np.mean(np.asarray(pred) == np.asarray(labels)))
