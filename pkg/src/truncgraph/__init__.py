"""Semi-supervised binary classification on graphs with a randomly truncated
Laplacian eigenbasis prior, sampled by reversible-jump MCMC.

The usual entry point is :class:`TruncatedSeriesClassifier`; the submodules
expose the graph builders (:mod:`~truncgraph.graph`), eigensolvers
(:mod:`~truncgraph.spectral`), model densities (:mod:`~truncgraph.model`),
the sampler (:mod:`~truncgraph.sampler`) and the experiment drivers behind
the ``truncgraph`` command.
"""

from .estimator import FullLaplacianClassifier, TruncatedSeriesClassifier, default_basis_size
from .graph import (
    Graph,
    build_grid3d,
    build_knn_graph,
    build_path,
    build_ring,
    build_watts_strogatz,
    grid_index,
    laplacian,
    largest_connected_component,
)
from .model import BasisExhaustedError, Hyperparams, ProposalSpec
from .sampler import (
    ChainState,
    DegenerateStateError,
    LabelData,
    PosteriorSummary,
    Trace,
    accuracy,
    run_baseline_full,
    run_chain,
    summarize,
)
from .spectral import (
    ConvergenceError,
    SpectralBasis,
    extend_basis,
    full_eigensolve,
    grid3d_eigenpairs,
    partial_eigensolve,
    path_eigenpairs,
)

__version__ = "0.1.0"

__all__ = [
    "BasisExhaustedError",
    "ChainState",
    "ConvergenceError",
    "DegenerateStateError",
    "FullLaplacianClassifier",
    "Graph",
    "Hyperparams",
    "LabelData",
    "PosteriorSummary",
    "ProposalSpec",
    "SpectralBasis",
    "Trace",
    "TruncatedSeriesClassifier",
    "accuracy",
    "build_grid3d",
    "build_knn_graph",
    "build_path",
    "build_ring",
    "build_watts_strogatz",
    "default_basis_size",
    "extend_basis",
    "full_eigensolve",
    "grid3d_eigenpairs",
    "grid_index",
    "laplacian",
    "largest_connected_component",
    "partial_eigensolve",
    "path_eigenpairs",
    "run_baseline_full",
    "run_chain",
    "summarize",
]
