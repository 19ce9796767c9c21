"""Hyper-tour guided neighbourhood search for large 2-D Euclidean TSP."""

from .heatmap import (CandidateSet, DistanceHeatProvider, HeatmapProvider, SparseHeatmapGraph,
                      build_heatmap_graph, cover_edges, load_heatmap_file)
from .hypertour import Clustering, HyperTour, cluster_by_bridge_deletion, find_bridges, hyper_tour
from .initialization import InitResult, initialize_tour, nearest_neighbor_tour, random_tour
from .instance import Instance, Tour, TsplibError, load_tsplib, read_tour, write_tour, write_tsplib
from .lk import LkProblem, LkResult, held_karp_exact, lk_path_solve, lk_solve
from .pipeline import Config, RunReport, StageError, benchmark, generate_instance, noise_experiment, solve
from .subtour import optimize_subtours
from .tns import EdgeStats, run_tns

__all__ = [
    "CandidateSet", "Clustering", "Config", "DistanceHeatProvider", "EdgeStats", "HeatmapProvider",
    "HyperTour", "InitResult", "Instance", "LkProblem", "LkResult", "RunReport", "SparseHeatmapGraph",
    "StageError", "Tour", "TsplibError", "benchmark", "build_heatmap_graph", "cluster_by_bridge_deletion",
    "cover_edges", "find_bridges", "generate_instance", "held_karp_exact", "hyper_tour",
    "initialize_tour", "load_heatmap_file", "load_tsplib", "lk_path_solve", "lk_solve",
    "nearest_neighbor_tour", "noise_experiment", "optimize_subtours", "random_tour", "read_tour",
    "run_tns", "solve", "write_tour", "write_tsplib",
]

__version__ = "0.1.0"
