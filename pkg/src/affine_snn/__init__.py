"""Affine spiking neural networks with exact time-to-first-spike dynamics."""

from .codec import AffineMap, AffineSnn, add, add_all, load_model, realize, realize_clipped, save_model, size
from .errors import (
    AffineSnnError,
    BadMagic,
    ConfigError,
    CycleDetected,
    DimensionMismatch,
    DuplicateEdge,
    GraphError,
    IsolatedNode,
    NoSpike,
    SingularSimplex,
    TruncatedFile,
)
from .graph import NetworkGraph, build_graph, layering, load_graph
from .spike import ForwardTrace, SnnParams, forward, neuron_spike_time

__version__ = "0.1.0"

__all__ = [
    "AffineMap",
    "AffineSnn",
    "AffineSnnError",
    "BadMagic",
    "ConfigError",
    "CycleDetected",
    "DimensionMismatch",
    "DuplicateEdge",
    "ForwardTrace",
    "GraphError",
    "IsolatedNode",
    "NetworkGraph",
    "NoSpike",
    "SingularSimplex",
    "SnnParams",
    "TruncatedFile",
    "add",
    "add_all",
    "build_graph",
    "forward",
    "layering",
    "load_graph",
    "load_model",
    "neuron_spike_time",
    "realize",
    "realize_clipped",
    "save_model",
    "size",
]
