"""Mesh-graph construction: icosahedral and quadrilateral hierarchies,
multiscale merges, grid coupling, static features, stats and serialization."""

from .assemble import (
    G2M_FACTOR_PLANAR,
    G2M_FACTOR_SPHERICAL,
    INTER_LEVEL_FACTOR,
    assemble_model_graph,
    build_interlevel_global,
    build_interlevel_lam,
    merge_multiscale,
)
from .bipartite import connect_grid_to_mesh, connect_mesh_to_grid
from .features import compute_static_features
from .grids import GridSpec, global_grid, planar_grid
from .icosphere import build_icosphere_levels
from .io import load_graph, save_graph
from .lam import build_lam_levels
from .stats import check_graph, graph_stats
from .types import (
    HIERARCHICAL,
    MULTISCALE,
    PLANAR,
    SPHERICAL,
    EdgeSet,
    MeshGraph,
    Node,
    StaticFeatures,
    latlon_to_unit,
    unit_to_latlon,
)

__all__ = [
    "G2M_FACTOR_PLANAR",
    "G2M_FACTOR_SPHERICAL",
    "INTER_LEVEL_FACTOR",
    "assemble_model_graph",
    "build_interlevel_global",
    "build_interlevel_lam",
    "merge_multiscale",
    "connect_grid_to_mesh",
    "connect_mesh_to_grid",
    "compute_static_features",
    "GridSpec",
    "global_grid",
    "planar_grid",
    "build_icosphere_levels",
    "load_graph",
    "save_graph",
    "build_lam_levels",
    "check_graph",
    "graph_stats",
    "HIERARCHICAL",
    "MULTISCALE",
    "PLANAR",
    "SPHERICAL",
    "EdgeSet",
    "MeshGraph",
    "Node",
    "StaticFeatures",
    "latlon_to_unit",
    "unit_to_latlon",
]
