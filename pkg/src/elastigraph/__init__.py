"""Energies, harmonic maps and stretch factors for maps between marked graphs."""

from .graph_core import EdgeScalars, GraphValidationError, MarkedGraph, graph_from_dict, scalars
from .graph_maps import EdgePath, GraphMap, Point, energy, map_from_dict, realize
from .harmonic import harmonic_solve
from .emb_iter import compute_emb

__all__ = [
    "EdgePath", "EdgeScalars", "GraphMap", "GraphValidationError", "MarkedGraph", "Point",
    "compute_emb", "energy", "graph_from_dict", "harmonic_solve", "map_from_dict", "realize", "scalars",
]
