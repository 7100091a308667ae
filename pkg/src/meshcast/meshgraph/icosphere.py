"""Icosahedral sphere meshes by recursive face splitting.

The base icosahedron uses the golden-ratio vertex set rotated about the
y-axis by (pi - 2 asin(phi / sqrt(3))) / 2.  This is the one canonical
orientation (relative to a latitude-longitude grid) that reproduces the
published grid-to-mesh edge counts; vertex counts and intra/inter-level
edge counts are orientation-invariant.

Splitting k times yields 10 * 4^k + 2 vertices and 60 * 4^k directed
edges.  New midpoint vertices are appended after their parents, so vertex
arrays are prefix-nested across levels: coarse node i and fine node i are
the same point.
"""

from __future__ import annotations

import numpy as np

from ..errors import GraphBuildError
from .types import HIERARCHICAL, SPHERICAL, EdgeSet, MeshGraph, unit_to_latlon

_ICO_FACES = [
    (0, 1, 2), (0, 6, 1), (8, 0, 2), (8, 4, 0), (3, 8, 2),
    (3, 2, 7), (7, 2, 1), (0, 4, 6), (4, 11, 6), (6, 11, 5),
    (1, 5, 7), (4, 10, 11), (4, 8, 10), (10, 8, 3), (10, 3, 9),
    (11, 10, 9), (11, 9, 5), (5, 9, 7), (9, 3, 7), (1, 6, 5),
]


def base_icosahedron() -> tuple[np.ndarray, np.ndarray]:
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = []
    for c1 in (1.0, -1.0):
        for c2 in (phi, -phi):
            verts.append((c1, c2, 0.0))
            verts.append((0.0, c1, c2))
            verts.append((c2, 0.0, c1))
    vertices = np.array(verts) / np.linalg.norm([1.0, phi])
    angle_between_faces = 2.0 * np.arcsin(phi / np.sqrt(3.0))
    rot = (np.pi - angle_between_faces) / 2.0
    c, s = np.cos(rot), np.sin(rot)
    rotation_y = np.array([[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]])
    return vertices @ rotation_y, np.array(_ICO_FACES, dtype=np.int64)


def split_faces(vertices: np.ndarray, faces: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One 4-way split of every face; midpoints projected to the unit sphere."""
    verts = [tuple(v) for v in vertices]
    midpoint: dict[tuple[int, int], int] = {}

    def mid(i: int, j: int) -> int:
        key = (i, j) if i < j else (j, i)
        if key not in midpoint:
            p = (np.asarray(verts[i]) + np.asarray(verts[j])) / 2.0
            p /= np.linalg.norm(p)
            midpoint[key] = len(verts)
            verts.append(tuple(p))
        return midpoint[key]

    new_faces = []
    for a, b, c in faces:
        ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
        new_faces += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
    return np.array(verts), np.array(new_faces, dtype=np.int64)


def faces_to_edges(faces: np.ndarray) -> np.ndarray:
    """Directed edge pairs (both directions), lexicographically sorted."""
    undirected = set()
    for a, b, c in faces:
        undirected.update({(int(a), int(b)), (int(b), int(c)), (int(c), int(a))})
    directed = undirected | {(j, i) for i, j in undirected}
    return np.array(sorted(directed), dtype=np.int64)


def _level_graph(vertices: np.ndarray, faces: np.ndarray) -> MeshGraph:
    pairs = faces_to_edges(faces)
    latlon = unit_to_latlon(vertices)
    g = MeshGraph(
        kind=HIERARCHICAL,
        geometry=SPHERICAL,
        node_level=np.ones(len(vertices), dtype=np.int64),
        node_pos=latlon,
        edge_sets={"m2m:1": EdgeSet("m2m:1", pairs)},
    )
    lengths = g.edge_lengths("m2m:1")
    g.meta = {"faces": faces, "max_edge_len": float(lengths.max())}
    return g


def build_icosphere_levels(refinements: int) -> list[MeshGraph]:
    """Nested icosphere levels, coarsest first.

    Returns ``refinements + 1`` single-level graphs: the base icosahedron
    followed by each successive split.  Vertex id spaces are nested
    prefixes, which ``merge_multiscale`` relies on.
    """
    if refinements < 0:
        raise GraphBuildError("refinements must be >= 0")
    vertices, faces = base_icosahedron()
    out = [_level_graph(vertices, faces)]
    for _ in range(refinements):
        vertices, faces = split_faces(vertices, faces)
        out.append(_level_graph(vertices, faces))
    return out
