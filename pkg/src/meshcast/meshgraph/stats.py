"""Count reports and structural validation for built graphs."""

from __future__ import annotations

import numpy as np

from ..errors import GraphBuildError
from .types import HIERARCHICAL, PLANAR, SPHERICAL, MeshGraph


def graph_stats(graph: MeshGraph) -> dict:
    """Per-level node counts plus per-set edge counts and degree ranges."""
    levels = {int(l): int(np.sum(graph.node_level == l)) for l in np.unique(graph.node_level)}
    sets = {}
    for name, es in graph.edge_sets.items():
        rec_counts = np.bincount(es.receivers, minlength=graph.n_nodes)
        snd_counts = np.bincount(es.senders, minlength=graph.n_nodes)
        # degree ranges over the node population that the set actually targets
        rec_active = rec_counts[np.unique(es.receivers)] if len(es) else np.zeros(1, int)
        snd_active = snd_counts[np.unique(es.senders)] if len(es) else np.zeros(1, int)
        sets[name] = {
            "edges": len(es),
            "min_in_degree": int(rec_active.min()),
            "max_in_degree": int(rec_active.max()),
            "min_out_degree": int(snd_active.min()),
            "max_out_degree": int(snd_active.max()),
        }
    mesh_nodes = int(np.sum(graph.node_level > 0))
    mesh_edges = sum(len(es) for n, es in graph.edge_sets.items() if not n.startswith(("g2m", "m2g")))
    return {
        "kind": graph.kind,
        "geometry": graph.geometry,
        "nodes_per_level": levels,
        "mesh_nodes": mesh_nodes,
        "mesh_edges_total": mesh_edges,
        "edge_sets": sets,
    }


def check_graph(graph: MeshGraph) -> list[str]:
    """Validate structural invariants; returns the list of violations."""
    problems: list[str] = []
    for name, es in graph.edge_sets.items():
        if len(es) == 0:
            continue
        if len(np.unique(es.pairs, axis=0)) != len(es.pairs):
            problems.append(f"{name}: duplicate directed edges")
        if es.pairs.min() < 0 or es.pairs.max() >= graph.n_nodes:
            problems.append(f"{name}: node id out of range")

    # Down(l+1->l) must be the exact reversal of Up(l->l+1)
    for name in graph.edge_sets:
        if name.startswith("up:"):
            _, lo, hi = name.split(":")
            down = graph.edge_sets.get(f"down:{hi}:{lo}")
            if down is None:
                problems.append(f"{name}: missing down counterpart")
                continue
            a = {tuple(p) for p in graph.edge_sets[name].pairs}
            b = {(r, s) for s, r in down.pairs}
            if a != b:
                problems.append(f"{name}: down set is not the exact reversal")

    if graph.kind == HIERARCHICAL:
        L = len(graph.levels)
        expect = {f"m2m:{l}" for l in range(1, L + 1)}
        expect |= {f"up:{l}:{l + 1}" for l in range(1, L)}
        expect |= {f"down:{l + 1}:{l}" for l in range(1, L)}
        missing = expect - set(graph.edge_sets)
        if missing:
            problems.append(f"hierarchical graph missing sets: {sorted(missing)}")
    else:
        if "m2m" not in graph.edge_sets:
            problems.append("multiscale graph must carry one merged m2m set")

    n_grid = int(np.sum(graph.node_level == 0))
    if n_grid and "g2m" in graph.edge_sets:
        out_deg = np.bincount(graph.edge_sets["g2m"].senders, minlength=n_grid)[:n_grid]
        if out_deg.min() < 1:
            problems.append("a grid node has no g2m edge")
    if n_grid and "m2g" in graph.edge_sets:
        in_deg = np.bincount(graph.edge_sets["m2g"].receivers, minlength=n_grid)[:n_grid]
        want = 3 if graph.geometry == SPHERICAL else 4
        if not np.all(in_deg == want):
            problems.append(f"m2g in-degree must be exactly {want} per grid node")

    if graph.geometry == SPHERICAL:
        for name in graph.edge_sets:
            if name.startswith("up:"):
                lev = int(name.split(":")[1])
                senders = graph.edge_sets[name].senders
                deg = np.bincount(senders)[np.unique(senders)]
                n_level = int(np.sum(graph.node_level == lev))
                if len(np.unique(senders)) != n_level or deg.min() < 1 or deg.max() > 2:
                    problems.append(f"{name}: up-degree must be 1 or 2 for every node")
    elif graph.kind == HIERARCHICAL:
        for name in graph.edge_sets:
            if name.startswith("up:"):
                lev = int(name.split(":")[1])
                n_level = int(np.sum(graph.node_level == lev))
                if len(graph.edge_sets[name]) != n_level:
                    problems.append(f"{name}: planar up edges must be exactly one per node")
    return problems
