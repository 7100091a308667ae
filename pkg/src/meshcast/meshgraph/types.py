"""Graph data model: nodes, named directed edge sets, static features.

Positions are stored in the spec's canonical 2-vector form: (lat, lon) in
degrees for spherical geometry, (x, y) in planar projection units
otherwise.  Node ids are implicit row indices into the position array;
level 0 marks grid nodes and levels 1..L mesh nodes (1 = finest).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import GraphBuildError

SPHERICAL = "spherical"
PLANAR = "planar"
MULTISCALE = "multiscale"
HIERARCHICAL = "hierarchical"


@dataclass
class Node:
    """Single-node view; the arrays in MeshGraph are the backing store."""

    id: int
    level: int
    pos: tuple[float, float]


@dataclass
class EdgeSet:
    """Directed edges (sender, receiver) under one name.

    Names follow the roles in the construction: ``m2m`` (merged multiscale),
    ``m2m:l`` (intra-level l), ``up:l:l+1`` / ``down:l+1:l`` (inter-level),
    ``g2m`` and ``m2g``.
    """

    name: str
    pairs: np.ndarray  # [m, 2] int64

    def __post_init__(self):
        self.pairs = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def senders(self) -> np.ndarray:
        return self.pairs[:, 0]

    @property
    def receivers(self) -> np.ndarray:
        return self.pairs[:, 1]

    def reversed(self, name: str) -> "EdgeSet":
        return EdgeSet(name, self.pairs[:, ::-1])

    def validate_unique(self) -> None:
        if len(np.unique(self.pairs, axis=0)) != len(self.pairs):
            raise GraphBuildError(f"duplicate directed edges in set '{self.name}'")


@dataclass
class StaticFeatures:
    """Per-node and per-edge-set feature matrices.

    Edge features are (length, displacement...) normalized by the longest
    edge over all mesh edge sets; spherical node features are
    (cos lat, sin lon, cos lon) and planar ones coordinates scaled by the
    maximum coordinate.
    """

    node_features: np.ndarray  # [n_nodes, d]
    edge_features: dict[str, np.ndarray]  # set name -> [m, d]


@dataclass
class MeshGraph:
    """A complete graph artifact: nodes at levels plus named edge sets."""

    kind: str  # MULTISCALE | HIERARCHICAL
    geometry: str  # SPHERICAL | PLANAR
    node_level: np.ndarray  # [n] int64, 0 = grid
    node_pos: np.ndarray  # [n, 2] float64, (lat, lon) deg or (x, y)
    edge_sets: dict[str, EdgeSet] = field(default_factory=dict)
    features: StaticFeatures | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.node_level = np.asarray(self.node_level, dtype=np.int64)
        self.node_pos = np.asarray(self.node_pos, dtype=np.float64).reshape(len(self.node_level), 2)
        if self.kind not in (MULTISCALE, HIERARCHICAL):
            raise GraphBuildError(f"unknown graph kind '{self.kind}'")
        if self.geometry not in (SPHERICAL, PLANAR):
            raise GraphBuildError(f"unknown geometry '{self.geometry}'")
        if self.geometry == SPHERICAL and len(self.node_pos):
            lat, lon = self.node_pos[:, 0], self.node_pos[:, 1]
            if lat.min() < -90.0 or lat.max() > 90.0 or lon.min() < -180.0 or lon.max() >= 180.0:
                raise GraphBuildError("spherical positions must satisfy lat in [-90,90], lon in [-180,180)")

    # -- node access -----------------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.node_level)

    @property
    def levels(self) -> list[int]:
        return sorted(int(l) for l in np.unique(self.node_level) if l > 0)

    def nodes_at(self, level: int) -> np.ndarray:
        """Global node ids at a level, in id order."""
        return np.flatnonzero(self.node_level == level)

    @property
    def nodes(self) -> list[Node]:
        return [
            Node(i, int(self.node_level[i]), (float(self.node_pos[i, 0]), float(self.node_pos[i, 1])))
            for i in range(self.n_nodes)
        ]

    # -- geometry helpers -------------------------------------------------------

    def coords3d(self) -> np.ndarray:
        """Unit-sphere 3-vectors (spherical) or z=0-padded planar coords."""
        if self.geometry == SPHERICAL:
            return latlon_to_unit(self.node_pos)
        out = np.zeros((self.n_nodes, 3))
        out[:, 0] = self.node_pos[:, 0]
        out[:, 1] = self.node_pos[:, 1]
        return out

    def edge_lengths(self, name: str) -> np.ndarray:
        xyz = self.coords3d()
        pairs = self.edge_sets[name].pairs
        return np.linalg.norm(xyz[pairs[:, 1]] - xyz[pairs[:, 0]], axis=1)


def latlon_to_unit(latlon: np.ndarray) -> np.ndarray:
    """(lat, lon) degrees -> unit vectors; chordal distances live here."""
    lat = np.deg2rad(latlon[..., 0])
    lon = np.deg2rad(latlon[..., 1])
    return np.stack([np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)], axis=-1)


def unit_to_latlon(xyz: np.ndarray) -> np.ndarray:
    """Unit vectors -> (lat, lon) degrees with lon in [-180, 180)."""
    xyz = np.asarray(xyz, dtype=np.float64)
    lat = np.rad2deg(np.arcsin(np.clip(xyz[..., 2], -1.0, 1.0)))
    lon = np.rad2deg(np.arctan2(xyz[..., 1], xyz[..., 0]))
    lon = np.where(lon >= 180.0, lon - 360.0, lon)
    return np.stack([lat, lon], axis=-1)
