"""Numerical Riemannian geometry on charts and metric learning.

Metric fields map chart points to SPD matrices; on top of them the package
provides exponential and logarithm maps, geodesic boundary-value solvers,
parallel transport, volume sampling, kNN-graph distances, metric-learning
objectives and a finite-difference Adam fitter.
"""

from .core import (FunctionMetric, InverseMetric, MetricField, christoffel, geodesic_acceleration,
                   hamiltonian, metric_derivatives, metric_inverse)
from .errors import (BlowUpError, DomainError, EfficiencyError, NoConvergenceError, NonFiniteLossError,
                     RankDeficiencyError, RiemetricError, ShapeError, SingularMetricError)
from .metrics import (ConstantMetric, DensityMetric, KernelMetric, PullbackMetric, VoronoiMetric,
                      map_induced_distance, pack_params, unpack_params)
from .paths import GeodesicPath, path_energy, path_length
from .geodesic import (DEFAULT_CONFIG, SolverConfig, exp_endpoint, exp_map, frechet_mean, geodesic_bvp,
                       geodesic_regression_curve, integrate_geodesic, log_map_shooting, riemannian_distance)
from .transport import (exp_parallelize, fanning_scheme, parallel_transport_ode, pole_ladder,
                        schild_ladder)
from .spd import (SpdAffineMetric, SpdChart, log_euclidean_distance, spd_affine_distance, spd_affine_exp,
                  spd_affine_log, spd_affine_metric_field, spd_affine_transport)
from .hyperbolic import HyperbolicHalfPlane, hyperbolic_distance, hyperbolic_oracle_distance
from .volume import sample_by_volume, volume_density
from .graph import MetricGraph, build_knn_graph, graph_distance, graph_geodesic_path, shortest_paths
from .objectives import (DistanceObservations, PairSets, TrajectorySet, TripletSet, contrastive_loss,
                         distance_regression_loss, trajectory_loss, triplet_loss)
from .learn import FitConfig, FitReport, fd_gradient, fit, project_spd
from .datasets import LabeledDataset, gen_aniso_grid, gen_spiral, gen_trajectories
from .classify import knn_classify, loo_accuracy

__version__ = "0.1.0"
