"""Graph-building entry points shared by the CLI, demos and tests."""

from __future__ import annotations

from ..errors import ConfigError
from ..meshgraph import (
    HIERARCHICAL,
    MULTISCALE,
    GridSpec,
    MeshGraph,
    assemble_model_graph,
    build_icosphere_levels,
    build_lam_levels,
    global_grid,
    planar_grid,
)


def largest_power_of_three(limit: int) -> int:
    n = 3
    while n * 3 <= limit:
        n *= 3
    return n


def build_global_graph(kind: str, n_lat: int, n_lon: int, refinements: int,
                       hierarchy_levels: int | None = None) -> MeshGraph:
    """Icosphere-based model graph over a lat-lon grid.

    The multiscale merge always includes the base icosahedron; the
    hierarchy uses the ``hierarchy_levels`` finest levels (default: all but
    the base icosahedron).
    """
    levels = build_icosphere_levels(refinements)
    grid = global_grid(n_lat, n_lon)
    if kind == MULTISCALE:
        return assemble_model_graph(grid, levels, MULTISCALE)
    if hierarchy_levels is None:
        hierarchy_levels = max(1, len(levels) - 1)
    if hierarchy_levels > len(levels):
        raise ConfigError(f"{hierarchy_levels} hierarchy levels but only {len(levels)} built")
    return assemble_model_graph(grid, levels, HIERARCHICAL, hierarchy_levels=hierarchy_levels)


def build_lam_graph(kind: str, rows: int, cols: int, levels: int,
                    mesh_side: int | None = None) -> MeshGraph:
    """Quadrilateral-mesh model graph over a rows x cols planar grid.

    The finest mesh defaults to the largest power-of-three side fitting
    the grid; ``levels`` counts the hierarchy levels (or the lattices
    merged into the multiscale mesh).
    """
    grid = planar_grid(rows, cols)
    if mesh_side is None:
        mesh_side = largest_power_of_three(min(rows, cols))
    lam_levels = build_lam_levels(mesh_side, mesh_side, levels, extent=grid.extent)
    if kind == MULTISCALE:
        return assemble_model_graph(grid, lam_levels, MULTISCALE)
    return assemble_model_graph(grid, lam_levels, HIERARCHICAL, hierarchy_levels=levels)


def toy_global_grid() -> GridSpec:
    return global_grid(12, 24)


def toy_global_graph(kind: str = HIERARCHICAL) -> MeshGraph:
    """Minutes-scale global domain: 24x12 grid, 2-level icosphere hierarchy."""
    return build_global_graph(kind, 12, 24, refinements=1,
                              hierarchy_levels=2 if kind == HIERARCHICAL else None)


def toy_lam_grid() -> GridSpec:
    # slightly rectangular so the 0.67-radius rule covers the grid corners
    return planar_grid(45, 52)


def toy_lam_graph(kind: str = HIERARCHICAL) -> MeshGraph:
    """Minutes-scale limited area: 45x52 grid, 3-level quadrilateral mesh."""
    grid = toy_lam_grid()
    return build_lam_graph(kind, grid.n_rows, grid.n_cols, levels=3)
