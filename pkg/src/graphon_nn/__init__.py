"""Graphon neural networks: sampling, spectra, filters, GNN/WNN maps and transfer bounds."""

from .filters import (
    FilterTaps,
    SpectralFilter,
    graph_convolve,
    graph_convolve_spectral,
    graphon_convolve,
    make_banded_ramp,
    polynomial_filter,
)
from .gnn import GnnParams, gnn_forward, induced_output, instantiate_gnn, wnn_forward
from .graphon import (
    Graphon,
    ShiftOperator,
    StepSignal,
    graphon_family,
    graphon_l2_distance,
    induce_graphon,
    induce_signal,
    l2_distance,
    sample_graph,
    sample_signal,
    signal_family,
)
from .spectral import band_constants, decompose_graph, decompose_graphon
from .transferability import theorem1_bound, theorem2_bound, theorem4_bound, transfer_sweep

__version__ = "0.1.0"
