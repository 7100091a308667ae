"""Autoregressive rollouts: deterministic trajectories and sampled ensembles."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..errors import NumericsError, ShapeError
from ..numcore import Tensor, no_grad, reparam_sample, stream
from .config import DETERMINISTIC_VARIANTS, LATENT_VARIANTS
from .forward import latent_map_mean, predictor, single_step
from .params import ModelParams
from .topology import GraphTopology


@dataclass
class RolloutInput:
    """Initial pair of states plus per-step forcing (and LAM boundary data).

    ``forcing[t-1]`` is the windowed forcing for predicting step t; when
    boundary data is present, frame cells of every prediction are
    overwritten from ``boundary[t-1]`` before being fed back.
    """

    x_prev2: np.ndarray  # [N, d_x]
    x_prev1: np.ndarray  # [N, d_x]
    forcing: np.ndarray  # [T_max, N, d_F]
    boundary: np.ndarray | None = None  # [T_max, N, d_x]
    boundary_mask: np.ndarray | None = None  # [N] bool

    def __post_init__(self):
        self.x_prev2 = np.asarray(self.x_prev2, dtype=np.float64)
        self.x_prev1 = np.asarray(self.x_prev1, dtype=np.float64)
        self.forcing = np.asarray(self.forcing, dtype=np.float64)
        if self.x_prev2.shape != self.x_prev1.shape:
            raise ShapeError("the two initial states must have identical shapes")
        if (self.boundary is None) != (self.boundary_mask is None):
            raise ShapeError("boundary series and mask must be given together")

    def check_horizon(self, T: int) -> None:
        if T > len(self.forcing):
            raise ShapeError(f"forcing covers {len(self.forcing)} steps, need {T}")
        if self.boundary is not None and T > len(self.boundary):
            raise ShapeError(f"boundary series covers {len(self.boundary)} steps, need {T}")


@dataclass
class Ensemble:
    """K member trajectories sharing initial conditions and forcing."""

    members: np.ndarray  # [K, T, N, d_x]
    base_seed: int
    member_ids: list[int]

    @property
    def size(self) -> int:
        return len(self.members)


def overwrite_boundary(x: Tensor, boundary_t: np.ndarray, mask: np.ndarray) -> Tensor:
    """Replace frame-cell rows of x with the supplied boundary values."""
    m = Tensor(mask.astype(np.float64)[:, None])
    return x * (1.0 - m) + Tensor(boundary_t) * m


def _maybe_boundary(x: Tensor, inp: RolloutInput, t: int) -> Tensor:
    if inp.boundary is None:
        return x
    return overwrite_boundary(x, inp.boundary[t - 1], inp.boundary_mask)


def rollout_deterministic(params: ModelParams, topo: GraphTopology, inp: RolloutInput, T: int) -> np.ndarray:
    """Iterate the single-step map T times, feeding predictions back."""
    if params.config.variant not in DETERMINISTIC_VARIANTS:
        raise ShapeError("rollout_deterministic requires a deterministic variant")
    inp.check_horizon(T)
    out = np.empty((T, len(inp.x_prev1), params.config.d_x))
    with no_grad():
        x2, x1 = Tensor(inp.x_prev2), Tensor(inp.x_prev1)
        for t in range(1, T + 1):
            try:
                pred, _ = single_step(params, topo, x2, x1, Tensor(inp.forcing[t - 1]))
                pred = _maybe_boundary(pred, inp, t)
            except NumericsError as exc:
                raise NumericsError(f"non-finite state at rollout step {t}: {exc}") from exc
            out[t - 1] = pred.data
            x2, x1 = x1, pred
    return out


def sample_member(
    params: ModelParams,
    topo: GraphTopology,
    inp: RolloutInput,
    T: int,
    seed: int,
    member: int = 0,
    zero_noise: bool = False,
) -> np.ndarray:
    """Roll out one ensemble member; deterministic per (seed, member)."""
    if params.config.variant not in LATENT_VARIANTS:
        raise ShapeError("sample_member requires a latent variant")
    inp.check_horizon(T)
    out = np.empty((T, len(inp.x_prev1), params.config.d_x))
    with no_grad():
        x2, x1 = Tensor(inp.x_prev2), Tensor(inp.x_prev1)
        for t in range(1, T + 1):
            try:
                f_t = Tensor(inp.forcing[t - 1])
                prior = latent_map_mean(params, topo, x2, x1, f_t)
                if zero_noise:
                    z = prior.mean
                else:
                    z = reparam_sample(prior, stream(seed, "latent", member, t))
                pred, _ = predictor(params, topo, z, x2, x1, f_t)
                pred = _maybe_boundary(pred, inp, t)
            except NumericsError as exc:
                raise NumericsError(f"non-finite state at member step {t}: {exc}") from exc
            out[t - 1] = pred.data
            x2, x1 = x1, pred
    return out


def sample_ensemble(
    params: ModelParams,
    topo: GraphTopology,
    inp: RolloutInput,
    T: int,
    K: int,
    base_seed: int,
    max_workers: int | None = None,
) -> Ensemble:
    """K independent members with streams keyed by member index.

    The result is bit-identical whether members run serially or on a
    thread pool.
    """
    if K < 1:
        raise ShapeError("ensemble size must be at least 1")
    members = np.empty((K, T, len(inp.x_prev1), params.config.d_x))

    def run(k: int) -> np.ndarray:
        return sample_member(params, topo, inp, T, base_seed, member=k)

    if max_workers is not None and max_workers > 1 and K > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            for k, traj in enumerate(pool.map(run, range(K))):
                members[k] = traj
    else:
        for k in range(K):
            members[k] = run(k)
    return Ensemble(members, base_seed, list(range(K)))
