"""Staged training: deterministic MSE/NLL and variational/CRPS schedules."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericsError
from ..metrics import area_weights
from ..meshgraph import MeshGraph
from ..models import (
    GraphTopology,
    ModelParams,
    build_topology,
    init_model_params,
    save_checkpoint,
    single_step,
    swag_snapshot_ensemble,
)
from ..numcore import AdamWState, Tensor, adamw_step, backward, stream
from ..objectives import (
    LossWeights,
    StageConfig,
    TrainingWindow,
    combined_loss,
    draw_training_noise,
    estimate_inv_var_weights,
    nll_loss,
    weighted_mse,
)
from .config import RunConfig
from .data import Dataset


@dataclass
class TrainResult:
    params: ModelParams
    topology: GraphTopology
    log: list[dict] = field(default_factory=list)
    checkpoint_paths: list[str] = field(default_factory=list)


def make_loss_weights(config: RunConfig, dataset: Dataset, stage: StageConfig | None = None) -> LossWeights:
    """Area weights (boundary cells excluded), data-driven variable weights."""
    area = area_weights(dataset.grid)
    mask = dataset.boundary_mask()
    if mask is not None:
        area = np.where(mask, 0.0, area)
    lo, hi = dataset.splits["train"]
    lam = estimate_inv_var_weights(dataset.normalized_fields[lo:hi])
    return LossWeights(
        area_w=area,
        var_inv_var=lam,
        level_w=np.ones(dataset.d_x),
        lambda_kl=stage.lambda_kl if stage else 1.0,
        lambda_crps=stage.lambda_crps if stage else 0.0,
    )


def _deterministic_window_loss(
    params: ModelParams,
    topo: GraphTopology,
    window: TrainingWindow,
    T: int,
    weights: LossWeights,
    mode: str,
):
    from ..models import overwrite_boundary

    x2, x1 = Tensor(window.x_prev2), Tensor(window.x_prev1)
    preds, sigmas = [], []
    for t in range(T):
        pred, sigma = single_step(params, topo, x2, x1, Tensor(window.forcing[t]))
        preds.append(pred)
        sigmas.append(sigma)
        fed = pred
        if window.boundary_mask is not None:
            fed = overwrite_boundary(pred, window.targets[t], window.boundary_mask)
        x2, x1 = x1, fed
    targets = [Tensor(window.targets[t]) for t in range(T)]
    if mode == "nll":
        return nll_loss(preds, sigmas, targets, weights.area_w)
    return weighted_mse(preds, targets, weights)


def _window_loss(params, topo, window, stage: StageConfig, weights: LossWeights, config: RunConfig, noise_key: int):
    if config.is_latent:
        noise = draw_training_noise(params, topo, config.seed, noise_key, stage.unroll_T)
        return combined_loss(params, topo, window, stage.unroll_T, weights, noise)
    return _deterministic_window_loss(params, topo, window, stage.unroll_T, weights, stage.mode)


def train(
    config: RunConfig,
    dataset: Dataset,
    graph: MeshGraph,
    out_dir: str | None = None,
) -> TrainResult:
    """Run every schedule stage in order; checkpoint after each stage.

    Deterministic given (config.seed, dataset, graph): initialization,
    window shuffling and latent noise all come from keyed streams.
    """
    topo = build_topology(graph)
    model_cfg = config.model_config(dataset.d_x, dataset.forcing_window_width)
    params = init_model_params(stream(config.seed, "init"), model_cfg, topo)
    state = AdamWState.init(params.tensors())
    result = TrainResult(params=params, topology=topo)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)

    global_step = 0
    for s_idx, stage in enumerate(config.schedule):
        weights = make_loss_weights(config, dataset, stage)
        inits = dataset.eligible_inits("train", stage.unroll_T, config.window_stride)
        if not inits:
            raise NumericsError(f"stage {s_idx}: no eligible training windows")
        for epoch in range(stage.epochs):
            order = stream(config.seed, "shuffle", s_idx, epoch).permutation(len(inits))
            epoch_losses = []
            for b0 in range(0, len(order), config.batch_size):
                batch = order[b0: b0 + config.batch_size]
                total = None
                for k in batch:
                    window = dataset.training_window(inits[int(k)], stage.unroll_T)
                    loss = _window_loss(params, topo, window, stage, weights, config, global_step)
                    global_step += 1
                    total = loss if total is None else total + loss
                total = total * (1.0 / len(batch))
                value = total.item()
                if not np.isfinite(value):
                    raise NumericsError(
                        f"non-finite loss in stage {s_idx} epoch {epoch} step {global_step}"
                    )
                epoch_losses.append(value)
                grads = params.named_grads(backward(total))
                flat, state = adamw_step(
                    params.tensors(), grads, state, lr=stage.learning_rate, weight_decay=0.0
                )
                params = params.with_tensors(flat)
            result.log.append(
                {
                    "stage": s_idx,
                    "mode": stage.mode,
                    "epoch": epoch,
                    "loss": float(np.mean(epoch_losses)),
                }
            )
        if out_dir:
            path = os.path.join(out_dir, f"stage{s_idx}.npz")
            save_checkpoint(path, params, topo.graph_hash, extra={"stage": s_idx, "run": config.to_dict()})
            result.checkpoint_paths.append(path)

    result.params = params
    if out_dir:
        final = os.path.join(out_dir, "final.npz")
        save_checkpoint(final, params, topo.graph_hash, extra={"stage": "final", "run": config.to_dict()})
        result.checkpoint_paths.append(final)
    return result


def make_constant_lr_step(
    config: RunConfig,
    dataset: Dataset,
    topo: GraphTopology,
    stage: StageConfig,
    purpose: str = "swag",
):
    """Single-gradient-step closure for snapshot ensembles (fixed lr)."""
    weights = make_loss_weights(config, dataset, stage)
    inits = dataset.eligible_inits("train", stage.unroll_T, config.window_stride)
    holder = {"state": None}

    def step(params: ModelParams, i: int):
        if holder["state"] is None:
            holder["state"] = AdamWState.init(params.tensors())
        pick = int(stream(config.seed, purpose, 0, i).integers(len(inits)))
        window = dataset.training_window(inits[pick], stage.unroll_T)
        loss = _window_loss(params, topo, window, stage, weights, config, i)
        value = loss.item()
        grads = params.named_grads(backward(loss))
        flat, holder["state"] = adamw_step(
            params.tensors(), grads, holder["state"], lr=stage.learning_rate, weight_decay=0.0
        )
        return params.with_tensors(flat), value

    return step


def snapshot_ensemble_from(
    params: ModelParams,
    config: RunConfig,
    dataset: Dataset,
    topo: GraphTopology,
    steps: int,
    save_every: int = 100,
    learning_rate: float = 1e-3,
    unroll_T: int = 1,
) -> list[ModelParams]:
    """Continue training a deterministic model at constant lr, snapshotting."""
    stage = StageConfig(epochs=1, learning_rate=learning_rate, unroll_T=unroll_T,
                        mode="nll" if config.learn_sigma else "mse")
    step = make_constant_lr_step(config, dataset, topo, stage)
    return swag_snapshot_ensemble(params, step, steps, save_every)
