"""AdamW with decoupled weight decay, as a pure functional update.

Parameters live in a flat ``{name: Tensor}`` mapping; the optimizer never
mutates them, returning fresh tensors plus an updated state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError
from .tensor import Tensor


@dataclass
class AdamWState:
    first_moment: dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: dict[str, np.ndarray] = field(default_factory=dict)
    step_count: int = 0

    @staticmethod
    def init(params: dict[str, Tensor]) -> "AdamWState":
        return AdamWState(
            {k: np.zeros_like(t.data) for k, t in params.items()},
            {k: np.zeros_like(t.data) for k, t in params.items()},
            0,
        )


def adamw_step(
    params: dict[str, Tensor],
    grads: dict[str, np.ndarray],
    state: AdamWState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    weight_decay: float = 0.01,
) -> tuple[dict[str, Tensor], AdamWState]:
    """One decoupled-weight-decay Adam update over the whole parameter tree.

    Parameters missing from ``grads`` are treated as having zero gradient
    (they still decay).  Deterministic given its inputs.
    """
    if lr <= 0:
        raise ValueError("lr must be positive")
    t = state.step_count + 1
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    new_params: dict[str, Tensor] = {}
    new_m: dict[str, np.ndarray] = {}
    new_v: dict[str, np.ndarray] = {}
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p.data)
        if g.shape != p.data.shape:
            raise ShapeError(f"gradient shape {g.shape} != param shape {p.data.shape} for '{name}'")
        m = beta1 * state.first_moment[name] + (1.0 - beta1) * g
        v = beta2 * state.second_moment[name] + (1.0 - beta2) * (g * g)
        update = (m / bc1) / (np.sqrt(v / bc2) + eps)
        data = p.data * (1.0 - lr * weight_decay) - lr * update
        new_params[name] = Tensor(data, requires_grad=p.requires_grad)
        new_m[name] = m
        new_v[name] = v
    return new_params, AdamWState(new_m, new_v, t)
