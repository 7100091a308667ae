"""Message-passing layers and embedding blocks.

Two layer types cover every model in the package.  An *interaction* step
updates edges from (edge, sender, receiver) and adds the summed incoming
messages to each receiver through a residual, so zero-initialized MLPs
leave the state untouched.  A *propagation* step instead replaces each
receiver with the mean of its incoming messages (each message carrying
the sender representation through a residual), which at zero
initialization reduces to averaging the neighbouring senders - a bias
that actively pushes information along the graph.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .numcore import MlpParams, Tensor, concat, mlp_forward, segment_sum, take_rows

INTERACTION = "interaction"
PROPAGATION = "propagation"


@dataclass
class GnnLayerParams:
    """Edge and node update MLPs of one GNN layer.

    The edge MLP consumes (edge, sender, receiver) = 3 d_z features, the
    node MLP (receiver, aggregate) = 2 d_z, both emitting d_z.
    """

    edge_mlp: MlpParams
    node_mlp: MlpParams
    kind: str = INTERACTION

    def __post_init__(self):
        if self.kind not in (INTERACTION, PROPAGATION):
            raise ShapeError(f"unknown layer kind '{self.kind}'")


@dataclass(frozen=True)
class EdgeIndex:
    """Edge endpoints as rows into the sender / receiver matrices."""

    senders: np.ndarray
    receivers: np.ndarray
    n_receivers: int

    @property
    def in_counts(self) -> np.ndarray:
        return np.bincount(self.receivers, minlength=self.n_receivers)


@dataclass
class GraphState:
    """Representation matrices: one per node set and one per edge set."""

    node_reps: dict[str, Tensor]
    edge_reps: dict[str, Tensor]


def _edge_messages(idx: EdgeIndex, h_s: Tensor, e: Tensor, h_r: Tensor, params: GnnLayerParams):
    if len(idx.senders) != e.shape[0]:
        raise ShapeError("edge count does not match edge representations")
    senders = take_rows(h_s, idx.senders)
    receivers = take_rows(h_r, idx.receivers)
    return senders, mlp_forward(params.edge_mlp, concat([e, senders, receivers], axis=1))


def interaction_step(
    idx: EdgeIndex, h_s: Tensor, e: Tensor, h_r: Tensor, params: GnnLayerParams
) -> tuple[Tensor, Tensor]:
    """Residual edge/node update; receivers without in-edges aggregate zero."""
    if params.kind != INTERACTION:
        raise ShapeError("interaction_step requires an interaction-kind layer")
    if h_r.shape[0] != idx.n_receivers:
        raise ShapeError("receiver matrix does not match edge index")
    _, msg = _edge_messages(idx, h_s, e, h_r, params)
    e_new = e + msg
    agg = segment_sum(msg, idx.receivers, idx.n_receivers)
    h_new = h_r + mlp_forward(params.node_mlp, concat([h_r, agg], axis=1))
    return h_new, e_new


def propagation_step(
    idx: EdgeIndex, h_s: Tensor, e: Tensor, h_r: Tensor, params: GnnLayerParams
) -> tuple[Tensor, Tensor]:
    """Mean-of-messages update; every receiver must have an in-edge."""
    if params.kind != PROPAGATION:
        raise ShapeError("propagation_step requires a propagation-kind layer")
    if h_r.shape[0] != idx.n_receivers:
        raise ShapeError("receiver matrix does not match edge index")
    counts = idx.in_counts
    if counts.min() < 1:
        raise ShapeError("propagation requires every receiver to have at least one in-edge")
    senders, delta = _edge_messages(idx, h_s, e, h_r, params)
    msg = senders + delta
    e_new = e + msg
    mean = segment_sum(msg, idx.receivers, idx.n_receivers) * Tensor(1.0 / counts[:, None])
    h_new = mean + mlp_forward(params.node_mlp, concat([h_r, mean], axis=1))
    return h_new, e_new


def gnn_step(idx, h_s, e, h_r, params: GnnLayerParams):
    if params.kind == PROPAGATION:
        return propagation_step(idx, h_s, e, h_r, params)
    return interaction_step(idx, h_s, e, h_r, params)


def embed(features: Tensor, params: MlpParams) -> Tensor:
    """Map raw feature rows to d_z-wide representations."""
    return mlp_forward(params, features)
