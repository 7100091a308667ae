"""Forecast verification: area-weighted RMSE, ensemble metrics, fair CRPS.

Array layout: deterministic forecasts are [S, T, N, V] (sample, lead time,
node, variable); ensembles add a member axis as [S, K, T, N, V].  Every
metric returns a [T, V] table computed per lead time and variable in
float64 with a fixed reduction order, so reports are bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .meshgraph import SPHERICAL, GridSpec


def area_weights(grid: GridSpec) -> np.ndarray:
    """cos-latitude weights normalized to mean 1 (spherical); all ones (planar)."""
    if grid.n_nodes == 0:
        raise ShapeError("empty grid")
    if grid.geometry == SPHERICAL:
        lat = grid.positions()[:, 0]
        w = np.cos(np.deg2rad(lat))
        return w / w.mean()
    return np.ones(grid.n_nodes)


def _check_weights(w: np.ndarray, n: int) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (n,):
        raise ShapeError(f"weights must have shape ({n},)")
    return w


def rmse(preds: np.ndarray, targets: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Weighted RMSE per (lead time, variable); sqrt after sample averaging."""
    preds = np.asarray(preds, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if preds.shape != targets.shape or preds.ndim != 4:
        raise ShapeError("rmse expects matching [S, T, N, V] arrays")
    S, T, N, V = preds.shape
    w = _check_weights(weights, N)
    sq = (preds - targets) ** 2 * w[:, None]
    return np.sqrt(sq.sum(axis=(0, 2)) / (S * N))


def ensemble_mean_rmse(members: np.ndarray, targets: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """RMSE of the member average."""
    members = np.asarray(members, dtype=np.float64)
    if members.ndim != 5 or members.shape[1] < 1:
        raise ShapeError("ensemble metrics expect [S, K, T, N, V] members")
    return rmse(members.mean(axis=1), targets, weights)


def ensemble_spread(members: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """sqrt of the weighted mean squared member deviation from the ensemble mean."""
    members = np.asarray(members, dtype=np.float64)
    S, K, T, N, V = members.shape
    w = _check_weights(weights, N)
    dev = (members - members.mean(axis=1, keepdims=True)) ** 2 * w[:, None]
    return np.sqrt(dev.sum(axis=(0, 1, 3)) / (S * K * N))


def spread_skill_ratio(members: np.ndarray, targets: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """sqrt((K+1)/K) * Spread / ensemble-mean RMSE, per (lead time, variable).

    Cells whose RMSE is exactly zero are flagged as NaN rather than
    infinity; degenerate perfect forecasts occur in toy tests.
    """
    members = np.asarray(members, dtype=np.float64)
    K = members.shape[1]
    skill = ensemble_mean_rmse(members, targets, weights)
    spread = ensemble_spread(members, weights)
    out = np.full(skill.shape, np.nan)
    np.divide(spread, skill, out=out, where=skill > 0)
    return np.sqrt((K + 1) / K) * out


def ensemble_crps(members: np.ndarray, targets: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Fair (unbiased) ensemble CRPS per (lead time, variable).

    Computed by sorting members per point: for sorted values x_(0..K-1),
    sum_{k,k'} |x_k - x_k'| = 2 * sum_j (2j - K + 1) x_(j).  Equals the
    O(K^2) double-sum definition; reduces to MAE for K = 1.
    """
    members = np.asarray(members, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if members.ndim != 5:
        raise ShapeError("ensemble metrics expect [S, K, T, N, V] members")
    S, K, T, N, V = members.shape
    if targets.shape != (S, T, N, V):
        raise ShapeError("targets must be [S, T, N, V]")
    w = _check_weights(weights, N)

    mae_term = np.abs(members - targets[:, None]).mean(axis=1)  # [S, T, N, V]
    crps = (mae_term * w[:, None]).sum(axis=(0, 2)) / (S * N)
    if K == 1:
        return crps
    srt = np.sort(members, axis=1)
    coef = (2.0 * np.arange(K) - K + 1.0)[None, :, None, None, None]
    pair_term = (coef * srt).sum(axis=1) / (K * (K - 1))  # [S, T, N, V]
    return crps - (pair_term * w[:, None]).sum(axis=(0, 2)) / (S * N)


def ensemble_crps_double_sum(members: np.ndarray, targets: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """O(K^2) reference evaluation of the fair CRPS (verification oracle)."""
    members = np.asarray(members, dtype=np.float64)
    S, K, T, N, V = members.shape
    w = _check_weights(weights, N)
    mae_term = np.abs(members - np.asarray(targets)[:, None]).mean(axis=1)
    crps = (mae_term * w[:, None]).sum(axis=(0, 2)) / (S * N)
    if K == 1:
        return crps
    acc = np.zeros((S, T, N, V))
    for k in range(K):
        for kp in range(K):
            acc += np.abs(members[:, k] - members[:, kp])
    pair = acc / (2.0 * K * (K - 1))
    return crps - (pair * w[:, None]).sum(axis=(0, 2)) / (S * N)


@dataclass
class MetricTable:
    """Metric values indexed by (metric, variable, lead time)."""

    metrics: dict[str, np.ndarray]  # name -> [T, V]
    variables: list[str]
    lead_times: list[int]
    n_samples: int
    ensemble_size: int

    def value(self, metric: str, variable: str, lead_time: int) -> float:
        t = self.lead_times.index(lead_time)
        j = self.variables.index(variable)
        return float(self.metrics[metric][t, j])

    def rows(self, model: str) -> list[list[str]]:
        out = []
        for metric in sorted(self.metrics):
            table = self.metrics[metric]
            for t, lead in enumerate(self.lead_times):
                for j, var in enumerate(self.variables):
                    val = table[t, j]
                    out.append([
                        model, var, str(lead), metric,
                        "NA" if not np.isfinite(val) else repr(float(val)),
                        str(self.n_samples), str(self.ensemble_size),
                    ])
        return out


REPORT_HEADER = ["model", "variable", "lead_time_steps", "metric", "value", "S", "K"]


def report_text(tables: dict[str, MetricTable]) -> str:
    """Comma-separated report: one row per (model, metric, variable, lead)."""
    lines = [",".join(REPORT_HEADER)]
    for model in sorted(tables):
        for row in tables[model].rows(model):
            lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def evaluate_deterministic(preds, targets, weights, variables, lead_times, model_kind="deterministic") -> MetricTable:
    """RMSE plus MAE-as-CRPS for a point forecast set."""
    members = np.asarray(preds)[:, None]
    return MetricTable(
        {
            "rmse": rmse(preds, targets, weights),
            "crps": ensemble_crps(members, targets, weights),
        },
        list(variables),
        list(lead_times),
        n_samples=len(preds),
        ensemble_size=1,
    )


def evaluate_ensemble(members, targets, weights, variables, lead_times) -> MetricTable:
    """Ensemble-mean RMSE, spread, spread-skill ratio and fair CRPS."""
    members = np.asarray(members)
    return MetricTable(
        {
            "rmse": ensemble_mean_rmse(members, targets, weights),
            "spread": ensemble_spread(members, weights),
            "spskr": spread_skill_ratio(members, targets, weights),
            "crps": ensemble_crps(members, targets, weights),
        },
        list(variables),
        list(lead_times),
        n_samples=members.shape[0],
        ensemble_size=members.shape[1],
    )
