"""
Density-adapted distances on a two-armed spiral
===============================================

With only 20 labeled points, Euclidean nearest neighbors confuse the two arms.
A metric that is cheap where data is dense, approximated by shortest paths on a
kNN graph, follows the arms instead.
"""

import numpy as np

from riemetric import DensityMetric, LabeledDataset, gen_spiral, knn_classify
from riemetric.classify import accuracy

ds = gen_spiral(200, seed=0)
idx = np.arange(len(ds))
train_idx = idx[::20]
query_idx = np.setdiff1d(idx, train_idx)
train, query = ds.subset(train_idx), ds.subset(query_idx)

euclid = knn_classify(None, train, query.points)
print(f"Euclidean 1-NN       {accuracy(euclid, query.labels):.4f}")

pred = knn_classify(DensityMetric(ds.points), train, query.points, 1, "graph", graph_k=5)
print(f"density-graph 1-NN   {accuracy(pred, query.labels):.4f}")

# a linear distortion of the plane hurts Euclidean neighbors further
c, s = np.cos(0.7), np.sin(0.7)
T = np.array([[c, -s], [s, c]]) @ np.diag([1.5, 0.7])
X = ds.points @ T.T
pred = knn_classify(None, LabeledDataset(X[train_idx], ds.labels[train_idx]), X[query_idx])
print(f"Euclidean, distorted {accuracy(pred, ds.labels[query_idx]):.4f}")
