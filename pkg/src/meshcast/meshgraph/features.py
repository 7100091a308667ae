"""Static node and edge features of an assembled graph."""

from __future__ import annotations

import numpy as np

from ..errors import GraphBuildError
from .types import SPHERICAL, MeshGraph, StaticFeatures


def _mesh_set_names(graph: MeshGraph) -> list[str]:
    return [n for n in graph.edge_sets if not n.startswith(("g2m", "m2g"))]


def compute_static_features(graph: MeshGraph) -> StaticFeatures:
    """Trigonometric / scaled-coordinate node features plus edge geometry.

    Every edge carries (length, displacement components) computed from the
    3-d (spherical) or 2-d (planar) node coordinates and normalized by the
    longest edge over all mesh edge sets, so the longest mesh edge has
    length feature exactly 1.
    """
    if graph.n_nodes == 0:
        raise GraphBuildError("empty graph")
    if graph.geometry == SPHERICAL:
        lat = np.deg2rad(graph.node_pos[:, 0])
        lon = np.deg2rad(graph.node_pos[:, 1])
        node_features = np.stack([np.cos(lat), np.sin(lon), np.cos(lon)], axis=1)
        coords = graph.coords3d()
    else:
        max_coord = np.abs(graph.node_pos).max()
        if max_coord == 0:
            raise GraphBuildError("degenerate planar coordinates")
        node_features = graph.node_pos / max_coord
        coords = graph.node_pos

    mesh_names = _mesh_set_names(graph)
    if not mesh_names:
        raise GraphBuildError("graph has no mesh edge sets")
    longest = max(graph.edge_lengths(name).max() for name in mesh_names)

    edge_features: dict[str, np.ndarray] = {}
    for name, es in graph.edge_sets.items():
        disp = coords[es.receivers] - coords[es.senders]
        length = np.linalg.norm(disp, axis=1, keepdims=True)
        edge_features[name] = np.concatenate([length, disp], axis=1) / longest
    return StaticFeatures(node_features, edge_features)
