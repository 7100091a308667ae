"""Precomputed view of a mesh graph as the models consume it.

Node sets ("grid", "mesh:1", ...) map to contiguous global-id ranges; each
edge set becomes an EdgeIndex with set-local endpoints, plus static node
and edge feature matrices ready for embedding.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import GraphBuildError
from ..layers import EdgeIndex
from ..meshgraph import MULTISCALE, MeshGraph, compute_static_features
from ..meshgraph.io import graph_to_dict

GRID = "grid"


def _mesh_set(level: int) -> str:
    return f"mesh:{level}"


def _endpoints(name: str) -> tuple[str, str]:
    if name == "g2m":
        return GRID, _mesh_set(1)
    if name == "m2g":
        return _mesh_set(1), GRID
    if name == "m2m":
        return _mesh_set(1), _mesh_set(1)
    parts = name.split(":")
    if parts[0] == "m2m":
        return _mesh_set(int(parts[1])), _mesh_set(int(parts[1]))
    if parts[0] in ("up", "down"):
        return _mesh_set(int(parts[1])), _mesh_set(int(parts[2]))
    raise GraphBuildError(f"cannot infer endpoints of edge set '{name}'")


@dataclass
class GraphTopology:
    kind: str
    geometry: str
    n_grid: int
    levels: list[int]
    node_counts: dict[str, int]
    node_offsets: dict[str, int]
    edge_index: dict[str, EdgeIndex]
    set_endpoints: dict[str, tuple[str, str]]
    node_static: dict[str, np.ndarray]
    edge_static: dict[str, np.ndarray]
    graph_hash: str
    grid_meta: dict = field(default_factory=dict)

    @property
    def top_level(self) -> int:
        return max(self.levels)

    @property
    def n_top(self) -> int:
        return self.node_counts[_mesh_set(self.top_level)]

    def mesh_set(self, level: int) -> str:
        return _mesh_set(level)


def graph_fingerprint(graph: MeshGraph) -> str:
    doc = graph_to_dict(graph)
    doc.pop("features", None)
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()


def build_topology(graph: MeshGraph) -> GraphTopology:
    if graph.features is None:
        graph.features = compute_static_features(graph)
    levels = graph.levels
    if graph.kind == MULTISCALE and levels != [1]:
        raise GraphBuildError("multiscale graph must have all mesh nodes at level 1")

    node_counts: dict[str, int] = {}
    node_offsets: dict[str, int] = {}
    node_static: dict[str, np.ndarray] = {}
    for lev in [0] + levels:
        ids = graph.nodes_at(lev)
        if len(ids) == 0:
            if lev == 0:
                continue
            raise GraphBuildError(f"level {lev} has no nodes")
        if not np.array_equal(ids, np.arange(ids[0], ids[0] + len(ids))):
            raise GraphBuildError(f"level {lev} ids are not contiguous")
        name = GRID if lev == 0 else _mesh_set(lev)
        node_counts[name] = len(ids)
        node_offsets[name] = int(ids[0])
        node_static[name] = graph.features.node_features[ids]

    edge_index: dict[str, EdgeIndex] = {}
    set_endpoints: dict[str, tuple[str, str]] = {}
    edge_static: dict[str, np.ndarray] = {}
    for name, es in graph.edge_sets.items():
        snd_set, rcv_set = _endpoints(name)
        if snd_set not in node_counts or rcv_set not in node_counts:
            raise GraphBuildError(f"edge set '{name}' references missing node set")
        senders = es.senders - node_offsets[snd_set]
        receivers = es.receivers - node_offsets[rcv_set]
        if senders.min() < 0 or senders.max() >= node_counts[snd_set]:
            raise GraphBuildError(f"edge set '{name}' has out-of-range senders")
        if receivers.min() < 0 or receivers.max() >= node_counts[rcv_set]:
            raise GraphBuildError(f"edge set '{name}' has out-of-range receivers")
        edge_index[name] = EdgeIndex(senders, receivers, node_counts[rcv_set])
        set_endpoints[name] = (snd_set, rcv_set)
        edge_static[name] = graph.features.edge_features[name]

    return GraphTopology(
        kind=graph.kind,
        geometry=graph.geometry,
        n_grid=node_counts.get(GRID, 0),
        levels=levels,
        node_counts=node_counts,
        node_offsets=node_offsets,
        edge_index=edge_index,
        set_endpoints=set_endpoints,
        node_static=node_static,
        edge_static=edge_static,
        graph_hash=graph_fingerprint(graph),
        grid_meta=dict(graph.meta.get("grid", {})),
    )
