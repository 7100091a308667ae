"""Evaluation runs: roll out forecasts over a split, score, and report."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..metrics import MetricTable, area_weights, evaluate_deterministic, evaluate_ensemble, report_text
from ..meshgraph import MeshGraph
from ..meshgraph.io import atomic_write_text
from ..models import (
    GraphTopology,
    ModelParams,
    build_topology,
    rollout_deterministic,
    sample_ensemble,
)
from ..numcore import stream
from .data import Dataset


@dataclass
class EvalSettings:
    horizon: int
    ensemble_size: int = 1
    split: str = "test"
    stride: int = 1
    base_seed: int = 0
    ensemble_sizes: tuple[int, ...] = ()
    sweep_reuse_members: bool = False  # True: score prefixes of one big ensemble
    max_workers: int | None = None
    model_name: str = "model"


def _init_seed(base_seed: int, i0: int) -> int:
    return int(stream(base_seed, "eval-init", i0).integers(2**62))


def collect_deterministic(params, topo, dataset: Dataset, settings: EvalSettings, forecast_fn=None):
    """Denormalized forecasts and targets: [S, T, N, d_x] each."""
    inits = dataset.eligible_inits(settings.split, settings.horizon, settings.stride)
    if not inits:
        raise ConfigError(f"no eligible initializations in split '{settings.split}'")
    preds, targets = [], []
    for i0 in inits:
        inp = dataset.rollout_input(i0, settings.horizon)
        if forecast_fn is not None:
            traj = forecast_fn(inp, i0, settings.horizon)
        else:
            traj = rollout_deterministic(params, topo, inp, settings.horizon)
        preds.append(dataset.denormalize(traj))
        targets.append(dataset.fields[i0 + 1: i0 + 1 + settings.horizon])
    return np.stack(preds), np.stack(targets)


def collect_ensembles(params, topo, dataset: Dataset, settings: EvalSettings, K: int):
    """Denormalized members [S, K, T, N, d_x] plus targets [S, T, N, d_x]."""
    inits = dataset.eligible_inits(settings.split, settings.horizon, settings.stride)
    if not inits:
        raise ConfigError(f"no eligible initializations in split '{settings.split}'")
    members, targets = [], []
    for i0 in inits:
        inp = dataset.rollout_input(i0, settings.horizon)
        ens = sample_ensemble(
            params, topo, inp, settings.horizon, K,
            _init_seed(settings.base_seed, i0), max_workers=settings.max_workers,
        )
        members.append(dataset.denormalize(ens.members))
        targets.append(dataset.fields[i0 + 1: i0 + 1 + settings.horizon])
    return np.stack(members), np.stack(targets)


def _interior(dataset: Dataset):
    """Node subset used for scoring: everything except boundary forcing cells."""
    mask = dataset.boundary_mask()
    w = area_weights(dataset.grid)
    if mask is None:
        return slice(None), w
    keep = ~mask
    return keep, w[keep]


def evaluate(
    params: ModelParams,
    topo: GraphTopology,
    dataset: Dataset,
    settings: EvalSettings,
    *,
    checkpoint_graph_hash: str | None = None,
    forecast_fn=None,
) -> dict[str, MetricTable]:
    """Score a checkpointed model over every eligible initialization.

    Deterministic variants produce one RMSE/CRPS(=MAE) table; latent
    variants produce ensemble tables, optionally repeated over an
    ensemble-size sweep (independent resampling by default, member
    prefixes of the largest ensemble when requested).
    """
    if checkpoint_graph_hash is not None and checkpoint_graph_hash != topo.graph_hash:
        raise ConfigError("checkpoint was trained on a different graph (hash mismatch)")
    keep, w = _interior(dataset)
    leads = list(range(1, settings.horizon + 1))
    tables: dict[str, MetricTable] = {}

    latent = params.config.is_latent and forecast_fn is None
    if not latent:
        preds, targets = collect_deterministic(params, topo, dataset, settings, forecast_fn)
        tables[settings.model_name] = evaluate_deterministic(
            preds[:, :, keep], targets[:, :, keep], w, dataset.variables, leads
        )
        return tables

    sizes = list(settings.ensemble_sizes)
    main_k = settings.ensemble_size
    if settings.sweep_reuse_members and sizes:
        big = max([main_k] + sizes)
        members, targets = collect_ensembles(params, topo, dataset, settings, big)
        tables[settings.model_name] = evaluate_ensemble(
            members[:, :main_k, :, keep], targets[:, :, keep], w, dataset.variables, leads
        )
        for k in sizes:
            tables[f"{settings.model_name}@K{k}"] = evaluate_ensemble(
                members[:, :k, :, keep], targets[:, :, keep], w, dataset.variables, leads
            )
        return tables

    members, targets = collect_ensembles(params, topo, dataset, settings, main_k)
    tables[settings.model_name] = evaluate_ensemble(
        members[:, :, :, keep], targets[:, :, keep], w, dataset.variables, leads
    )
    for k in sizes:
        sub = EvalSettings(**{**settings.__dict__, "base_seed": _init_seed(settings.base_seed, 10**6 + k)})
        mk, tk = collect_ensembles(params, topo, dataset, sub, k)
        tables[f"{settings.model_name}@K{k}"] = evaluate_ensemble(
            mk[:, :, :, keep], tk[:, :, keep], w, dataset.variables, leads
        )
    return tables


def write_report(tables: dict[str, MetricTable], path: str) -> None:
    atomic_write_text(path, report_text(tables))


def write_plots(tables: dict[str, MetricTable], out_dir: str) -> list[str]:
    """SVG line plots of each metric against lead time, one file per variable."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    os.makedirs(out_dir, exist_ok=True)
    written = []
    metrics = sorted({m for t in tables.values() for m in t.metrics})
    variables = next(iter(tables.values())).variables
    for metric in metrics:
        for var in variables:
            fig, ax = plt.subplots(figsize=(5, 3.2))
            for model, table in sorted(tables.items()):
                if metric not in table.metrics:
                    continue
                ys = [table.value(metric, var, t) for t in table.lead_times]
                ax.plot(table.lead_times, ys, marker="o", label=model)
            ax.set_xlabel("lead time (steps)")
            ax.set_ylabel(metric)
            ax.set_title(f"{metric} — {var}")
            ax.legend(fontsize=7)
            fig.tight_layout()
            path = os.path.join(out_dir, f"{metric}_{var}.svg")
            fig.savefig(path, format="svg", metadata={"Date": None})
            plt.close(fig)
            written.append(path)
    return written
