"""
Parallel transport on SPD matrices
==================================

The affine-invariant metric on 2x2 SPD matrices has a closed-form transport,
so each numerical scheme can be checked against it.
"""

import numpy as np

from riemetric import (SolverConfig, SpdChart, exp_map, fanning_scheme, parallel_transport_ode, pole_ladder,
                       schild_ladder, spd_affine_metric_field, spd_affine_transport)

chart = SpdChart(2)
field = spd_affine_metric_field(2)
S = np.array([[2.0, 0.3], [0.3, 1.0]])
V = np.array([[0.5, 0.2], [0.2, -0.4]])
W = np.array([[0.3, -0.1], [-0.1, 0.6]])

path = exp_map(field, chart.vec(S), chart.vec(V))
exact = chart.vec(spd_affine_transport(S, V, W))
w = chart.vec(W)
cfg = SolverConfig(steps=50)

print(f"ODE transport      error {np.linalg.norm(parallel_transport_ode(field, path, w) - exact):.2e}")

# Schild's ladder is first order: each 4x refinement cuts the error by about 4
for rungs in (4, 16, 64):
    err = np.linalg.norm(schild_ladder(field, path, w, rungs, cfg) - exact)
    print(f"Schild {rungs:3d} rungs   error {err:.2e}")

# the pole ladder is exact on symmetric spaces up to solver error
print(f"pole 4 rungs       error {np.linalg.norm(pole_ladder(field, path, w, 4, cfg) - exact):.2e}")

for steps in (25, 100):
    err = np.linalg.norm(fanning_scheme(field, chart.vec(S), chart.vec(V), w, steps) - exact)
    print(f"fanning {steps:3d} steps  error {err:.2e}")
