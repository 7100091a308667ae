"""Snapshot ensembles: keep optimizing at a constant rate, save periodically.

Starting from a trained deterministic model, the caller supplies a
single-gradient-step closure (carrying its own optimizer state and fixed
learning rate); parameters are snapshotted every ``save_every`` steps and
later used one-per-member for forecasting.  No Gaussian is fitted over
the snapshots; they are used directly.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..errors import NumericsError
from .params import ModelParams

TrainStep = Callable[[ModelParams, int], tuple[ModelParams, float]]


def swag_snapshot_ensemble(
    params0: ModelParams,
    train_step: TrainStep,
    steps: int,
    save_every: int = 100,
) -> list[ModelParams]:
    """Run ``steps`` updates, snapshotting after every ``save_every``-th."""
    if save_every < 1:
        raise ValueError("save_every must be positive")
    snapshots: list[ModelParams] = []
    params = params0
    for i in range(steps):
        params, loss = train_step(params, i)
        if not np.isfinite(loss):
            raise NumericsError(f"snapshot training diverged at step {i + 1}")
        if (i + 1) % save_every == 0:
            snapshots.append(params.copy())
    return snapshots
