"""Persistent coverage planning for battery-limited UAV fleets on a graph."""

from .graph import Graph, GraphError, InstanceParams, build_grid, build_path, build_random_geometric, shortest_paths
from .methods import METHODS, Planner, RunConfig, Solution, preset, solve
from .tours import CandidateTour, InfeasibleInstance

__all__ = [
    "Graph", "GraphError", "InstanceParams", "build_grid", "build_path", "build_random_geometric",
    "shortest_paths", "METHODS", "Planner", "RunConfig", "Solution", "preset", "solve",
    "CandidateTour", "InfeasibleInstance",
]
__version__ = "0.1.0"
