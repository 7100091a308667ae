"""Graph serialization: versioned JSON, exact float round-trip.

Positions are emitted through Python's shortest-roundtrip float repr
(17 significant digits when needed), so load(save(graph)) reproduces the
arrays bit for bit.
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from ..errors import ConfigError
from .features import compute_static_features
from .types import EdgeSet, MeshGraph

SCHEMA_VERSION = 1


def graph_to_dict(graph: MeshGraph) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": graph.kind,
        "geometry": graph.geometry,
        "nodes": [
            {"id": i, "level": int(graph.node_level[i]), "pos": [graph.node_pos[i, 0], graph.node_pos[i, 1]]}
            for i in range(graph.n_nodes)
        ],
        "edge_sets": [
            {"name": name, "pairs": es.pairs.tolist()} for name, es in sorted(graph.edge_sets.items())
        ],
        "features": graph.features is not None,
        "meta": _jsonable_meta(graph.meta),
    }
    return doc


def _jsonable_meta(meta: dict) -> dict:
    out = {}
    for k, v in meta.items():
        if isinstance(v, np.ndarray):
            out[k] = v.tolist()
        elif isinstance(v, tuple):
            out[k] = list(v)
        else:
            out[k] = v
    return out


def graph_from_dict(doc: dict) -> MeshGraph:
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"unsupported graph schema version {doc.get('schema_version')!r}")
    nodes = doc["nodes"]
    ids = [n["id"] for n in nodes]
    if ids != list(range(len(nodes))):
        raise ConfigError("node ids must be consecutive from 0")
    graph = MeshGraph(
        kind=doc["kind"],
        geometry=doc["geometry"],
        node_level=np.array([n["level"] for n in nodes], dtype=np.int64),
        node_pos=np.array([n["pos"] for n in nodes], dtype=np.float64),
        edge_sets={
            es["name"]: EdgeSet(es["name"], np.array(es["pairs"], dtype=np.int64))
            for es in doc["edge_sets"]
        },
        meta=_meta_from_doc(doc.get("meta", {})),
    )
    if doc.get("features"):
        graph.features = compute_static_features(graph)
    return graph


def _meta_from_doc(meta: dict) -> dict:
    out = dict(meta)
    if "faces" in out:
        out["faces"] = np.array(out["faces"], dtype=np.int64)
    return out


def save_graph(graph: MeshGraph, path: str) -> None:
    atomic_write_text(path, json.dumps(graph_to_dict(graph)))


def load_graph(path: str) -> MeshGraph:
    with open(path, "r", encoding="utf-8") as fh:
        return graph_from_dict(json.load(fh))


def atomic_write_text(path: str, text: str) -> None:
    """Write-temp-then-rename so readers never observe partial files."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
