"""Grid-to-mesh and mesh-to-grid bipartite edge sets.

Grid-to-mesh connects each grid node to every finest-mesh node within a
radius: 0.6x the mesh edge length (spherical, 3-d chords) or 0.67x the
mesh node spacing (planar).  Mesh-to-grid gives each grid node exactly
three senders (the corners of its containing icosphere triangle) or four
(the closest planar mesh nodes).
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from ..errors import GraphBuildError
from .types import PLANAR, SPHERICAL, EdgeSet, MeshGraph, latlon_to_unit

_BARY_TOL = 1e-12


def connect_grid_to_mesh(
    grid_pos: np.ndarray,
    mesh: MeshGraph,
    radius_factor: float,
    geometry: str,
) -> EdgeSet:
    """G2M edges (grid i -> mesh j, local indices), radius rule per geometry.

    Raises if any grid node ends up without a connection.
    """
    if geometry == SPHERICAL:
        gxyz = latlon_to_unit(grid_pos)
        mxyz = mesh.coords3d()
        radius = radius_factor * mesh.meta["max_edge_len"]
    else:
        gxyz, mxyz = grid_pos, mesh.node_pos
        radius = radius_factor * mesh.meta["node_spacing"]
    tree = cKDTree(mxyz)
    neigh = tree.query_ball_point(gxyz, radius)
    pairs = []
    for gi, ms in enumerate(neigh):
        if not ms:
            raise GraphBuildError(f"grid node {gi} has no mesh node within the G2M radius")
        pairs.extend((gi, int(m)) for m in sorted(ms))
    return EdgeSet("g2m", np.array(pairs, dtype=np.int64))


def connect_mesh_to_grid(grid_pos: np.ndarray, mesh: MeshGraph, geometry: str) -> EdgeSet:
    """M2G edges (mesh j -> grid i, local indices)."""
    if geometry == SPHERICAL:
        return _containing_triangle_m2g(grid_pos, mesh)
    return _four_nearest_m2g(grid_pos, mesh)


def _four_nearest_m2g(grid_pos: np.ndarray, mesh: MeshGraph) -> EdgeSet:
    tree = cKDTree(mesh.node_pos)
    k = min(4, len(mesh.node_pos))
    if k < 4:
        raise GraphBuildError("planar M2G needs at least 4 mesh nodes")
    # query extra neighbours so exact-distance ties can be re-broken by id
    kq = min(8, len(mesh.node_pos))
    dist, idx = tree.query(grid_pos, k=kq)
    dist = np.round(dist, 12)
    order = np.lexsort((idx, dist), axis=1)
    rows = np.arange(len(grid_pos))[:, None]
    chosen = idx[rows, order[:, :4]]
    pairs = np.stack(
        [chosen.ravel(), np.repeat(np.arange(len(grid_pos), dtype=np.int64), 4)], axis=1
    )
    ordered = np.lexsort((pairs[:, 0], pairs[:, 1]))
    return EdgeSet("m2g", pairs[ordered])


def _containing_triangle_m2g(grid_pos: np.ndarray, mesh: MeshGraph) -> EdgeSet:
    faces = mesh.meta.get("faces")
    if faces is None:
        raise GraphBuildError("spherical M2G requires the mesh face list")
    V = mesh.coords3d()
    P = latlon_to_unit(grid_pos)
    centroids = V[faces].mean(axis=1)
    centroids /= np.linalg.norm(centroids, axis=1, keepdims=True)
    tree = cKDTree(centroids)
    k = min(16, len(faces))
    dist, cand = tree.query(P, k=k)
    # deterministic candidate order: distance, then face id
    order = np.lexsort((cand, np.round(dist, 12)), axis=1)
    cand = cand[np.arange(len(P))[:, None], order]

    chosen = np.full(len(P), -1, dtype=np.int64)
    unresolved = np.arange(len(P))
    for rank in range(k):
        if not len(unresolved):
            break
        f = cand[unresolved, rank]
        mats = np.transpose(V[faces[f]], (0, 2, 1))  # [n, 3, 3], columns = corners
        bary = np.linalg.solve(mats, P[unresolved][..., None])[..., 0]
        ok = bary.min(axis=1) >= -_BARY_TOL
        chosen[unresolved[ok]] = f[ok]
        unresolved = unresolved[~ok]
    if len(unresolved):
        raise GraphBuildError(
            f"containing-triangle lookup failed for {len(unresolved)} grid nodes"
        )
    corners = faces[chosen]  # [n, 3]
    pairs = np.stack(
        [corners.ravel(), np.repeat(np.arange(len(P), dtype=np.int64), 3)], axis=1
    )
    ordered = np.lexsort((pairs[:, 0], pairs[:, 1]))
    return EdgeSet("m2g", pairs[ordered])
