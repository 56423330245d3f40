"""k-nearest-neighbor graphs with metric edge weights and shortest paths."""

import heapq
import io
import math
from fractions import Fraction

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra
from scipy.spatial import cKDTree

UNREACHABLE = math.inf


class MetricGraph:
    """Undirected weighted graph over chart points.

    ``adjacency[i]`` maps neighbor index to edge weight; weights are
    symmetric by construction.
    """

    def __init__(self, nodes, adjacency, k=None):
        self.nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
        self.adjacency = [dict(sorted(a.items())) for a in adjacency]
        self.k = k

    def __len__(self):
        return len(self.nodes)

    def edges(self):
        """Sorted ``(i, j, weight)`` triples with ``i < j``."""
        return [(i, j, w) for i, nbrs in enumerate(self.adjacency) for j, w in nbrs.items() if i < j]

    def to_sparse(self):
        n = len(self)
        e = self.edges()
        if not e:
            return csr_matrix((n, n))
        i, j, w = map(np.array, zip(*e))
        return csr_matrix((np.concatenate([w, w]), (np.concatenate([i, j]), np.concatenate([j, i]))), shape=(n, n))

    def components(self):
        """``(count, labels)`` of connected components."""
        return connected_components(self.to_sparse(), directed=False)

    def to_text(self):
        """Edge list, one ``i j weight`` line per undirected edge."""
        buf = io.StringIO()
        for i, j, w in self.edges():
            buf.write(f"{i} {j} {w:.17g}\n")
        return buf.getvalue()

    @classmethod
    def from_text(cls, text, nodes):
        adjacency = [dict() for _ in range(len(nodes))]
        for line in text.splitlines():
            if not line.strip():
                continue
            i, j, w = line.split()
            i, j, w = int(i), int(j), float(w)
            adjacency[i][j] = w
            adjacency[j][i] = w
        return cls(nodes, adjacency)


def edge_weight(field, p, q):
    """``sqrt(D^T g_mid D)`` with the metric at the midpoint, or ``||D||`` without a field."""
    delta = q - p
    if field is None:
        return float(np.sqrt(delta @ delta))
    g = field.metric_at(0.5 * (p + q))
    return float(np.sqrt(max(delta @ g @ delta, 0.0)))


def build_knn_graph(points, k, field=None, mutual=False):
    """Symmetrized k-nearest-neighbor graph.

    Neighbors are found in Euclidean chart distance; the union of the
    directed kNN relations is kept (the intersection with ``mutual=True``).
    Edge weights are metric lengths of the straight edge measured with
    the metric at its midpoint.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = len(points)
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < {n}, got {k}")
    _, idx = cKDTree(points).query(points, k=k + 1)
    directed = [set() for _ in range(n)]
    for i in range(n):
        for j in idx[i]:
            if j != i:
                directed[i].add(int(j))
        if len(directed[i]) > k:  # duplicate points can push i itself out of the query
            directed[i] = set(sorted(directed[i])[:k])
    adjacency = [dict() for _ in range(n)]
    for i in range(n):
        for j in directed[i]:
            if mutual and i not in directed[j]:
                continue
            if j not in adjacency[i]:
                a, b = min(i, j), max(i, j)
                w = edge_weight(field, points[a], points[b])
                adjacency[a][b] = w
                adjacency[b][a] = w
    return MetricGraph(points, adjacency, k)


def shortest_paths(graph, source, exact=False):
    """Binary-heap Dijkstra from ``source``.

    Returns ``(dist, pred)``; unreachable nodes have ``dist = inf`` and
    ``pred = -1``. Among equal-length paths the smaller predecessor index
    wins. With ``exact=True`` path lengths are accumulated as exact
    rationals (``fractions.Fraction`` of the float weights) and ``dist`` is
    a list holding them, so metric axioms can be checked without round-off.
    """
    n = len(graph)
    zero = Fraction(0) if exact else 0.0
    dist = [UNREACHABLE] * n
    pred = [-1] * n
    done = [False] * n
    dist[source] = zero
    heap = [(zero, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for v, w in graph.adjacency[u].items():
            nd = d + (Fraction(w) if exact else w)
            if nd < dist[v] or (nd == dist[v] and not done[v] and u < pred[v]):
                dist[v] = nd
                pred[v] = u
                heapq.heappush(heap, (nd, v))
    if exact:
        return dist, np.array(pred)
    return np.array(dist), np.array(pred)


def graph_distance(graph, i, j, exact=False):
    """Shortest-path weight between ``i`` and ``j``; :data:`UNREACHABLE` across components.

    The search always starts from the smaller index so the float result
    is exactly symmetric.
    """
    if i == j:
        return Fraction(0) if exact else 0.0
    a, b = min(i, j), max(i, j)
    d = shortest_paths(graph, a, exact)[0][b]
    return d if exact else float(d)


def graph_geodesic_path(graph, i, j):
    """Node indices of a shortest path from ``i`` to ``j``."""
    if i == j:
        return [i]
    dist, pred = shortest_paths(graph, i)
    if not np.isfinite(dist[j]):
        raise ValueError(f"node {j} is unreachable from node {i}")
    chain = [j]
    while chain[-1] != i:
        chain.append(int(pred[chain[-1]]))
    return chain[::-1]


def all_pairs_distances(graph, sources=None):
    """Distance rows for ``sources`` (default all nodes) via scipy's Dijkstra."""
    return dijkstra(graph.to_sparse(), directed=False, indices=sources)
