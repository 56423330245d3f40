"""
Geodesics three ways on the hyperbolic half-plane
=================================================

The upper half-plane with g = I / y^2 has a closed-form distance, which makes
it a good place to compare the three boundary-value solvers.
"""

import numpy as np

from riemetric import (HyperbolicHalfPlane, SolverConfig, exp_map, geodesic_bvp, geodesic_regression_curve,
                       hyperbolic_distance, log_map_shooting, path_length, riemannian_distance)

field = HyperbolicHalfPlane()
x, y = np.array([-1.0, 1.0]), np.array([1.0, 1.0])

# the exact answer
print(f"closed form        {hyperbolic_distance(x, y):.8f}")

# shooting: Newton on the initial velocity of Exp_x
print(f"shooting           {riemannian_distance(field, x, y, 'shooting'):.8f}")

# collocation on a discretized path
print(f"boundary value     {geodesic_bvp(field, x, y, SolverConfig(bvp_nodes=64)).info['length']:.8f}")

# energy minimization over a smooth curve family
print(f"curve regression   {geodesic_regression_curve(field, x, y).info['length']:.8f}")

# the geodesic bends upward, where the metric is cheaper
v = log_map_shooting(field, x, y)
path = exp_map(field, x, v)
print("initial velocity  ", v)
print("highest point      y =", path.points[:, 1].max().round(4))
print("length of Exp path ", round(path_length(field, path), 8))
