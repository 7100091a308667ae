"""Regular quadrilateral meshes for limited-area domains.

The finest level is an ``nr x nc`` lattice with 8-neighbour connectivity;
each coarser level keeps every third node per axis (offset 1), so a coarse
node sits at the exact position of the center of a 3x3 group below it.
"""

from __future__ import annotations

import numpy as np

from ..errors import GraphBuildError
from .types import HIERARCHICAL, PLANAR, EdgeSet, MeshGraph


def lattice_positions(nr: int, nc: int, extent: tuple[float, float] | None = None) -> np.ndarray:
    """Row-major (x, y) positions; cell centers of ``extent`` when given.

    With ``extent=(width, height)`` the nr*nc nodes are placed at the cell
    centers of an nc-by-nr subdivision of [0,width] x [0,height]; otherwise
    spacing is 1 with integer coordinates.
    """
    if extent is None:
        xs = np.arange(nc, dtype=np.float64)
        ys = np.arange(nr, dtype=np.float64)
    else:
        width, height = extent
        xs = width * (np.arange(nc) + 0.5) / nc
        ys = height * (np.arange(nr) + 0.5) / nr
    gx, gy = np.meshgrid(xs, ys)
    return np.stack([gx.ravel(), gy.ravel()], axis=1)


def lattice_edges(nr: int, nc: int) -> np.ndarray:
    """Directed 8-neighbour edges of an nr x nc lattice, sorted."""
    idx = np.arange(nr * nc).reshape(nr, nc)
    pairs = []
    for dr, dc in ((0, 1), (1, 0), (1, 1), (1, -1)):
        r0, r1 = max(0, -dr), nr - max(0, dr)
        c0, c1 = max(0, -dc), nc - max(0, dc)
        src = idx[r0:r1, c0:c1].ravel()
        a, b = src, src + dr * nc + dc
        pairs.append(np.stack([a, b], axis=1))
        pairs.append(np.stack([b, a], axis=1))
    allp = np.concatenate(pairs, axis=0)
    order = np.lexsort((allp[:, 1], allp[:, 0]))
    return allp[order].astype(np.int64)


def build_lam_levels(
    rows: int,
    cols: int,
    num_levels: int,
    extent: tuple[float, float] | None = None,
) -> list[MeshGraph]:
    """Quadrilateral mesh levels, coarsest first.

    ``rows``/``cols`` give the finest level; each coarser level triples the
    node spacing.  Both dimensions must be divisible by 3^(num_levels - 1).
    """
    if num_levels < 1:
        raise GraphBuildError("num_levels must be >= 1")
    factor = 3 ** (num_levels - 1)
    if rows < factor or cols < factor or rows % factor or cols % factor:
        raise GraphBuildError(
            f"{rows}x{cols} is not compatible with tripling to {num_levels} levels"
        )
    fine_pos = lattice_positions(rows, cols, extent)

    graphs = []
    for lev in range(num_levels):  # lev 0 = finest
        step = 3**lev
        nr, nc = rows // step, cols // step
        # keep every step-th node starting at the 3x3 group center offset
        off = (step - 1) // 2
        ridx = off + step * np.arange(nr)
        cidx = off + step * np.arange(nc)
        sel = (ridx[:, None] * cols + cidx[None, :]).ravel()
        g = MeshGraph(
            kind=HIERARCHICAL,
            geometry=PLANAR,
            node_level=np.ones(nr * nc, dtype=np.int64),
            node_pos=fine_pos[sel],
            edge_sets={"m2m:1": EdgeSet("m2m:1", lattice_edges(nr, nc))},
        )
        lengths = g.edge_lengths("m2m:1") if len(g.edge_sets["m2m:1"]) else np.zeros(1)
        g.meta = {
            "lattice_shape": (nr, nc),
            "max_edge_len": float(lengths.max()),
            "node_spacing": float(max((extent[0] / cols if extent else 1.0) * step,
                                      (extent[1] / rows if extent else 1.0) * step)),
        }
        graphs.append(g)
    graphs.reverse()  # coarsest first, matching the icosphere builder
    return graphs
