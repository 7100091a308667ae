"""Data-grid descriptors: global latitude-longitude and planar lattices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import GraphBuildError
from .types import PLANAR, SPHERICAL


@dataclass(frozen=True)
class GridSpec:
    """Row-major data grid.

    Spherical grids put ``n_rows`` latitudes (poles included, ascending
    from -90) against ``n_cols`` longitudes starting at -180.  Planar grids
    use integer (x, y) coordinates with unit spacing: x = column, y = row.
    """

    geometry: str
    n_rows: int  # latitude count (spherical) or y-extent rows (planar)
    n_cols: int  # longitude count or x-extent columns

    def __post_init__(self):
        if self.geometry not in (SPHERICAL, PLANAR):
            raise GraphBuildError(f"unknown geometry '{self.geometry}'")
        if self.n_rows < 2 or self.n_cols < 2:
            raise GraphBuildError("grid must be at least 2x2")

    @property
    def n_nodes(self) -> int:
        return self.n_rows * self.n_cols

    def positions(self) -> np.ndarray:
        """[n, 2] positions: (lat, lon) degrees or (x, y) units, row-major."""
        if self.geometry == SPHERICAL:
            lats = np.linspace(-90.0, 90.0, self.n_rows)
            lons = -180.0 + 360.0 * np.arange(self.n_cols) / self.n_cols
            LA, LO = np.meshgrid(lats, lons, indexing="ij")
            return np.stack([LA.ravel(), LO.ravel()], axis=1)
        X, Y = np.meshgrid(np.arange(self.n_cols, dtype=np.float64),
                           np.arange(self.n_rows, dtype=np.float64))
        return np.stack([X.ravel(), Y.ravel()], axis=1)

    @property
    def extent(self) -> tuple[float, float]:
        """Planar (width, height) spanned by the node coordinates."""
        if self.geometry != PLANAR:
            raise GraphBuildError("extent is a planar-grid property")
        return float(self.n_cols - 1), float(self.n_rows - 1)

    def describe(self) -> dict:
        return {"geometry": self.geometry, "n_rows": self.n_rows, "n_cols": self.n_cols}


def global_grid(n_lat: int, n_lon: int) -> GridSpec:
    return GridSpec(SPHERICAL, n_lat, n_lon)


def planar_grid(rows: int, cols: int) -> GridSpec:
    return GridSpec(PLANAR, rows, cols)
