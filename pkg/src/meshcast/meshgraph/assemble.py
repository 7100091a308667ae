"""Inter-level connectivity, multiscale merging, and full-graph assembly.

All functions here consume the single-level graphs produced by the
icosphere / lattice builders (ordered coarsest first) and emit either
merged mesh graphs or complete model graphs with grid nodes attached.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from ..errors import GraphBuildError
from .bipartite import connect_grid_to_mesh, connect_mesh_to_grid
from .features import compute_static_features
from .grids import GridSpec
from .types import HIERARCHICAL, MULTISCALE, PLANAR, SPHERICAL, EdgeSet, MeshGraph

INTER_LEVEL_FACTOR = 1.1  # global rule: reach 1.1x the finer level's edge length
G2M_FACTOR_SPHERICAL = 0.6
G2M_FACTOR_PLANAR = 0.67


def _nearest_with_id_tiebreak(tree: cKDTree, points: np.ndarray, k: int) -> np.ndarray:
    """Index of the closest tree point per query, ties going to the smallest id."""
    dist, idx = tree.query(points, k=k)
    dist = np.round(dist, 12)
    # lexsort per row: smallest distance first, then smallest index
    order = np.lexsort((idx, dist), axis=1)
    return idx[np.arange(len(points)), order[:, 0]]


def build_interlevel_global(levels: list[MeshGraph], factor: float = INTER_LEVEL_FACTOR) -> list[tuple[EdgeSet, EdgeSet]]:
    """(Up, Down) edge sets between each adjacent pair of spherical levels.

    Level l connects upward to every level-(l+1) node within ``factor``
    times the maximum intra-level edge length of level l, measured as 3-d
    chords; the construction guarantees 1 or 2 connections per node.
    Input is ordered coarsest first; pair i links levels (n-1-i) apart,
    returned finest-pair first as [(up:1:2, down:2:1), (up:2:3, ...), ...].
    """
    out = []
    n = len(levels)
    for i in range(n - 1, 0, -1):  # fine index i, coarse index i-1
        fine, coarse = levels[i], levels[i - 1]
        lev = n - i  # hierarchy numbering: finest = 1
        radius = factor * fine.meta["max_edge_len"]
        tree = cKDTree(coarse.coords3d())
        neigh = tree.query_ball_point(fine.coords3d(), radius)
        pairs = []
        for src, dst in enumerate(neigh):
            if not dst:
                raise GraphBuildError(
                    f"level-{lev} node {src} has no upward connection within radius"
                )
            if len(dst) > 2:
                raise GraphBuildError(
                    f"level-{lev} node {src} has {len(dst)} upward connections; expected 1 or 2"
                )
            pairs.extend((src, int(d)) for d in sorted(dst))
        up = EdgeSet(f"up:{lev}:{lev + 1}", np.array(pairs, dtype=np.int64))
        out.append((up, up.reversed(f"down:{lev + 1}:{lev}")))
    return out


def build_interlevel_lam(levels: list[MeshGraph]) -> list[tuple[EdgeSet, EdgeSet]]:
    """(Up, Down) edge sets for planar hierarchies: one closest-node up edge.

    Distance ties resolve to the smallest coarse node id.  With tripled
    lattices every coarse node ends up receiving exactly nine up edges.
    """
    out = []
    n = len(levels)
    for i in range(n - 1, 0, -1):
        fine, coarse = levels[i], levels[i - 1]
        lev = n - i
        tree = cKDTree(coarse.node_pos)
        k = min(4, len(coarse.node_pos))
        nearest = _nearest_with_id_tiebreak(tree, fine.node_pos, k)
        pairs = np.stack([np.arange(len(nearest), dtype=np.int64), nearest], axis=1)
        up = EdgeSet(f"up:{lev}:{lev + 1}", pairs)
        out.append((up, up.reversed(f"down:{lev + 1}:{lev}")))
    return out


def merge_multiscale(levels: list[MeshGraph]) -> MeshGraph:
    """Union of all level edge sets over the finest level's nodes.

    Coarse nodes are identified with the coincident finest-level node;
    failing to find one means the levels are not nested.  The merged set is
    deduplicated and sorted.
    """
    if not levels:
        raise GraphBuildError("no levels to merge")
    finest = levels[-1]
    pos_index = {tuple(p): i for i, p in enumerate(finest.node_pos)}
    merged = []
    for g in levels:
        remap = np.empty(len(g.node_pos), dtype=np.int64)
        for local, p in enumerate(map(tuple, g.node_pos)):
            if p not in pos_index:
                raise GraphBuildError("levels are not nested: coarse node has no finest-level twin")
            remap[local] = pos_index[p]
        merged.append(remap[g.edge_sets[_sole_intra(g)].pairs])
    pairs = np.unique(np.concatenate(merged, axis=0), axis=0)
    out = MeshGraph(
        kind=MULTISCALE,
        geometry=finest.geometry,
        node_level=np.ones(len(finest.node_pos), dtype=np.int64),
        node_pos=finest.node_pos.copy(),
        edge_sets={"m2m": EdgeSet("m2m", pairs)},
        meta=dict(finest.meta),
    )
    return out


def _sole_intra(g: MeshGraph) -> str:
    names = [n for n in g.edge_sets if n.startswith("m2m")]
    if len(names) != 1:
        raise GraphBuildError("expected a single intra-level edge set")
    return names[0]


def assemble_model_graph(
    grid: GridSpec,
    levels: list[MeshGraph],
    kind: str,
    *,
    hierarchy_levels: int | None = None,
) -> MeshGraph:
    """Full model graph: grid nodes + mesh + all edge sets + static features.

    ``levels`` comes from a builder, coarsest first.  For hierarchical
    graphs the finest ``hierarchy_levels`` levels are used (default all);
    for multiscale graphs every given level is merged.  Node ids: grid
    first (row-major), then mesh levels coarsest to finest.
    """
    geometry = levels[-1].geometry
    if geometry != grid.geometry:
        raise GraphBuildError("grid and mesh geometry differ")
    grid_pos = grid.positions()
    n_grid = len(grid_pos)

    if kind == MULTISCALE:
        mesh = merge_multiscale(levels)
        mesh_levels = [mesh]
        intra_sets = {"m2m": mesh.edge_sets["m2m"].pairs}
        inter: list[tuple[EdgeSet, EdgeSet]] = []
        finest = mesh
    elif kind == HIERARCHICAL:
        used = levels if hierarchy_levels is None else levels[-hierarchy_levels:]
        mesh_levels = used
        L = len(used)
        intra_sets = {
            f"m2m:{L - i}": g.edge_sets[_sole_intra(g)].pairs for i, g in enumerate(used)
        }
        if geometry == SPHERICAL:
            inter = build_interlevel_global(used)
        else:
            inter = build_interlevel_lam(used)
        finest = used[-1]
    else:
        raise GraphBuildError(f"unknown kind '{kind}'")

    # ---- node table: grid, then mesh coarsest..finest -------------------------
    L = len(mesh_levels)
    node_pos = [grid_pos]
    node_level = [np.zeros(n_grid, dtype=np.int64)]
    offsets = {}  # hierarchy level number -> id offset
    cursor = n_grid
    for i, g in enumerate(mesh_levels):
        lev = L - i
        offsets[lev] = cursor
        node_pos.append(g.node_pos)
        node_level.append(np.full(len(g.node_pos), lev, dtype=np.int64))
        cursor += len(g.node_pos)

    edge_sets: dict[str, EdgeSet] = {}
    for i, g in enumerate(mesh_levels):
        lev = L - i
        name = "m2m" if kind == MULTISCALE else f"m2m:{lev}"
        edge_sets[name] = EdgeSet(name, intra_sets[name] + offsets[lev])
    for up, down in inter:
        lev = int(up.name.split(":")[1])
        up_pairs = up.pairs.copy()
        up_pairs[:, 0] += offsets[lev]
        up_pairs[:, 1] += offsets[lev + 1]
        edge_sets[up.name] = EdgeSet(up.name, up_pairs)
        edge_sets[down.name] = EdgeSet(down.name, up_pairs[:, ::-1])

    # ---- grid <-> finest mesh --------------------------------------------------
    fine_offset = offsets[1]
    factor = G2M_FACTOR_SPHERICAL if geometry == SPHERICAL else G2M_FACTOR_PLANAR
    g2m = connect_grid_to_mesh(grid_pos, finest, factor, geometry)
    m2g = connect_mesh_to_grid(grid_pos, finest, geometry)
    g2m_pairs = g2m.pairs.copy()
    g2m_pairs[:, 1] += fine_offset
    m2g_pairs = m2g.pairs.copy()
    m2g_pairs[:, 0] += fine_offset
    edge_sets["g2m"] = EdgeSet("g2m", g2m_pairs)
    edge_sets["m2g"] = EdgeSet("m2g", m2g_pairs)

    graph = MeshGraph(
        kind=kind,
        geometry=geometry,
        node_level=np.concatenate(node_level),
        node_pos=np.concatenate(node_pos, axis=0),
        edge_sets=edge_sets,
        meta={"grid": grid.describe(), "mesh_levels": L},
    )
    graph.features = compute_static_features(graph)
    return graph
