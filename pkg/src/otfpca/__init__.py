"""Optimal transport representations and functional principal components
for samples of distribution-valued trajectories on [0, 1]."""

__version__ = "0.1.0"

from .dense import FittedDenseModel, estimate_baselines, fit_dense, predict_dense, predict_dense_path, rescale_baseline
from .errors import *  # noqa: F401,F403
from .fpca import (
    AnalyticBasis,
    CovarianceSurface,
    EigenSystem,
    dense_scores,
    eigendecompose,
    pace_scores,
    raw_scores,
    select_components,
    smooth_covariance,
)
from .frechet import Panel, Subject, center_panel, cross_sectional_mean, local_frechet_mean, mean_transport
from .grid import GridMeasure, TransportMap, unit_grid
from .kernels import KernelSpec
from .links import LinkFunction
from .measures import empirical_quantile, measure_to_transport, push_forward, transport_to_measure, wasserstein_distance
from .simulation import ImseResult, SimConfig, generate_truth, imse, run_study
from .sparse import FittedSparseModel, fit_sparse, predict_sparse, predict_sparse_path
from .transport import equiv_class_distance, geodesic, invert, norm1, optimal_transport, scalar_mult, sign, transport_distance
