"""Spectral graph bisection driven by epidemic diffusion."""

from .graph import (
    DisconnectedGraphError,
    Graph,
    GraphError,
    NodeSet,
    degree,
    is_connected,
    largest_component,
    load_edge_list,
    reweight_by_centrality,
    toy_graph,
    volume,
)
from .spectral import (
    ConvergenceError,
    OperatorKind,
    SpectralPair,
    apply_operator,
    eigenvector_centrality,
    ratio_vector,
    replicator_equivalence_check,
    simulate_diffusion,
    two_smallest_eigenpairs,
)
from .partition import (
    CutQuality,
    Partition,
    cut_weight,
    normalized_cut,
    ratio_cut,
    reweighted_quality,
    sweep_bisect,
    verify_sweep_incremental,
)
from .benchmark import BenchmarkSpec, GridResult, avg_clustering_coefficient, generate, nmi, run_grid

__version__ = "0.1.0"
