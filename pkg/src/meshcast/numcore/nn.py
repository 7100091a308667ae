"""Single-hidden-layer MLP blocks with Swish activation.

All networks in this package are built from this one block: one hidden
layer of configurable width, Swish activation, and an optional per-vector
output normalization (zero mean, unit variance over the last axis,
followed by a learned scale and shift).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError
from .tensor import Tensor, maximum

LAYER_NORM_EPS = 1e-5


@dataclass
class MlpParams:
    """Parameters of a one-hidden-layer MLP.

    ``norm_scale``/``norm_shift`` are present iff ``apply_output_norm`` is set.
    """

    w_in: Tensor
    b_in: Tensor
    w_out: Tensor
    b_out: Tensor
    apply_output_norm: bool = False
    norm_scale: Tensor | None = None
    norm_shift: Tensor | None = None

    @property
    def in_width(self) -> int:
        return self.w_in.shape[0]

    @property
    def out_width(self) -> int:
        return self.w_out.shape[1]

    def named_tensors(self, prefix: str = ""):
        yield prefix + "w_in", self.w_in
        yield prefix + "b_in", self.b_in
        yield prefix + "w_out", self.w_out
        yield prefix + "b_out", self.b_out
        if self.apply_output_norm:
            yield prefix + "norm_scale", self.norm_scale
            yield prefix + "norm_shift", self.norm_shift


def mlp_init(
    rng: np.random.Generator,
    d_in: int,
    d_hidden: int,
    d_out: int,
    *,
    output_norm: bool = False,
    requires_grad: bool = True,
) -> MlpParams:
    """Small random hidden layer, zero output layer.

    Zeroing the output layer makes every freshly initialized MLP the zero
    map, which in turn makes Interaction layers identities, Propagation
    layers neighbourhood means, and full model steps exact persistence.
    """
    scale = 1.0 / np.sqrt(d_in)
    w_in = Tensor(rng.normal(0.0, scale, size=(d_in, d_hidden)), requires_grad)
    b_in = Tensor(rng.normal(0.0, 0.1, size=(d_hidden,)), requires_grad)
    w_out = Tensor(np.zeros((d_hidden, d_out)), requires_grad)
    b_out = Tensor(np.zeros((d_out,)), requires_grad)
    if output_norm:
        return MlpParams(
            w_in, b_in, w_out, b_out, True,
            norm_scale=Tensor(np.ones(d_out), requires_grad),
            norm_shift=Tensor(np.zeros(d_out), requires_grad),
        )
    return MlpParams(w_in, b_in, w_out, b_out, False)


def mlp_zero(d_in: int, d_hidden: int, d_out: int, output_norm: bool = False) -> MlpParams:
    """All-zero MLP (identity-at-init tests)."""
    rng = np.random.default_rng(0)
    p = mlp_init(rng, d_in, d_hidden, d_out, output_norm=output_norm, requires_grad=False)
    return MlpParams(
        Tensor(np.zeros_like(p.w_in.data)),
        Tensor(np.zeros_like(p.b_in.data)),
        p.w_out,
        p.b_out,
        p.apply_output_norm,
        p.norm_scale,
        p.norm_shift,
    )


def swish(x: Tensor) -> Tensor:
    """x * sigmoid(x)."""
    return x * x.sigmoid()


def layer_norm(x: Tensor, scale: Tensor, shift: Tensor, eps: float = LAYER_NORM_EPS) -> Tensor:
    """Normalize each row to zero mean / unit variance, then affine.

    The variance is floored at ``eps`` (rather than added to) so that
    non-degenerate rows are normalized to variance exactly 1.
    """
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = centered.square().mean(axis=-1, keepdims=True)
    normed = centered / maximum(var, eps).sqrt()
    return normed * scale + shift


def mlp_forward(params: MlpParams, x: Tensor) -> Tensor:
    """y = maybe_norm(w_out . swish(w_in . x + b_in) + b_out)."""
    if x.ndim != 2:
        raise ShapeError(f"mlp_forward expects [n, d] input, got {x.shape}")
    if x.shape[-1] != params.in_width:
        raise ShapeError(f"input width {x.shape[-1]} != MLP input width {params.in_width}")
    h = swish(x @ params.w_in + params.b_in)
    y = h @ params.w_out + params.b_out
    if params.apply_output_norm:
        y = layer_norm(y, params.norm_scale, params.norm_shift)
    return y
