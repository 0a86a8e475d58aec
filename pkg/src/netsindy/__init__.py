"""Forecasting network dynamics from snapshots with POD and sparse regression."""

from .analysis import ClusterAssignment, eigh_laplacian, kmeans, spectral_cluster
from .dynamics import (ConsensusParams, DivergenceError, SisParams, Trajectory, integrate_rk4,
                       sample_curing_rates, sample_initial_sis, simulate)
from .graph import (Graph, SbmSpec, generate_balanced_tree, generate_path, generate_sbm,
                    laplacian, load_dataset, load_edge_list, serialize_edge_list)
from .pod import PodBasis, fit_pod, project, reconstruct, select_modes, thin_svd
from .predict import (PipelineConfig, error_metrics, fit, forecast, run_pipeline,
                      surrogate_fit, surrogate_forecast)
from .sindy import (LibrarySpec, SindyModel, build_library, central_difference, solve,
                    solve_sr3, solve_stlsq)

__all__ = [
    "ClusterAssignment", "eigh_laplacian", "kmeans", "spectral_cluster",
    "ConsensusParams", "DivergenceError", "SisParams", "Trajectory", "integrate_rk4",
    "sample_curing_rates", "sample_initial_sis", "simulate",
    "Graph", "SbmSpec", "generate_balanced_tree", "generate_path", "generate_sbm",
    "laplacian", "load_dataset", "load_edge_list", "serialize_edge_list",
    "PodBasis", "fit_pod", "project", "reconstruct", "select_modes", "thin_svd",
    "PipelineConfig", "error_metrics", "fit", "forecast", "run_pipeline",
    "surrogate_fit", "surrogate_forecast",
    "LibrarySpec", "SindyModel", "build_library", "central_difference", "solve",
    "solve_sr3", "solve_stlsq",
]
