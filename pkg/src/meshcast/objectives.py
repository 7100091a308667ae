"""Training objectives: weighted MSE, NLL, per-step variational bound,
multi-step rollout loss, two-sample CRPS loss, and their combination.

Per-step losses follow the training formulation exactly: the variational
bound sums (never averages) the KL term and the Gaussian reconstruction
term over latent elements / grid nodes / variables, while the standalone
``weighted_mse`` / ``nll_loss`` verification ops normalize by 1/(T*N).
All losses are differentiable through the autodiff tape; stochastic terms
take their noise as explicit arrays so a loss value is a pure function of
(parameters, data, noise).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericsError, ShapeError
from .models import (
    GraphTopology,
    ModelParams,
    latent_map_mean,
    latent_width,
    overwrite_boundary,
    predictor,
    variational_params,
)
from .numcore import Tensor, gaussian_kl_to_unit, stream

LOG_2PI = float(np.log(2.0 * np.pi))

STAGE_MODES = ("autoencoder", "variational", "crps_finetune", "mse", "nll")


@dataclass
class LossWeights:
    """Per-node area weights, per-variable scalings, and loss multipliers."""

    area_w: np.ndarray  # [N]
    var_inv_var: np.ndarray  # lambda_j, inverse variance of one-step differences
    level_w: np.ndarray  # omega_j, vertical-level weighting
    lambda_kl: float = 1.0
    lambda_crps: float = 0.0

    def __post_init__(self):
        self.area_w = np.asarray(self.area_w, dtype=np.float64)
        self.var_inv_var = np.asarray(self.var_inv_var, dtype=np.float64)
        self.level_w = np.asarray(self.level_w, dtype=np.float64)
        for name, arr in (("area_w", self.area_w), ("var_inv_var", self.var_inv_var),
                          ("level_w", self.level_w)):
            if np.any(arr < 0):
                raise ConfigError(f"{name} must be nonnegative")
        if self.lambda_kl < 0 or self.lambda_crps < 0:
            raise ConfigError("loss multipliers must be nonnegative")

    @property
    def var_scale(self) -> np.ndarray:
        return self.level_w * self.var_inv_var

    def fixed_sigma(self) -> np.ndarray:
        """Per-variable sigma making the NLL equal weighted MSE + constant."""
        scale = 2.0 * self.var_scale
        if np.any(scale <= 0):
            raise ConfigError("fixed sigma needs strictly positive variable weights")
        return 1.0 / np.sqrt(scale)


@dataclass
class StageConfig:
    """One stage of a training schedule."""

    epochs: int
    learning_rate: float
    unroll_T: int = 1
    lambda_kl: float = 0.0
    lambda_crps: float = 0.0
    mode: str = "variational"

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.unroll_T < 1:
            raise ConfigError("unroll_T must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning rate must be positive")
        if self.mode not in STAGE_MODES:
            raise ConfigError(f"unknown stage mode '{self.mode}'")


@dataclass
class TrainingWindow:
    """One training sample: two initial states, targets and forcing for T steps."""

    x_prev2: np.ndarray  # [N, d_x]
    x_prev1: np.ndarray
    targets: np.ndarray  # [T, N, d_x]
    forcing: np.ndarray  # [T, N, d_F]
    boundary_mask: np.ndarray | None = None  # [N] bool; targets provide boundary values

    def horizon(self) -> int:
        return len(self.targets)


def estimate_inv_var_weights(fields: np.ndarray, clamp: float = 1e6) -> np.ndarray:
    """lambda_j = 1 / Var(one-step differences), clamped for degenerate variables."""
    diffs = np.diff(fields, axis=0)
    var = diffs.reshape(-1, fields.shape[-1]).var(axis=0)
    with np.errstate(divide="ignore"):
        lam = np.where(var > 0, 1.0 / np.maximum(var, 1.0 / clamp), clamp)
    return np.minimum(lam, clamp)


def _as_steps(x) -> list[Tensor]:
    if isinstance(x, (list, tuple)):
        return [v if isinstance(v, Tensor) else Tensor(v) for v in x]
    t = x if isinstance(x, Tensor) else Tensor(x)
    if t.ndim == 2:
        return [t]
    raise ShapeError("expected a [N, d_x] step or a list of them")


def weighted_mse(preds, targets, weights: LossWeights) -> Tensor:
    """(1/(T N)) sum_t,a,j w_a omega_j lambda_j (pred - target)^2."""
    preds, targets = _as_steps(preds), _as_steps(targets)
    if len(preds) != len(targets):
        raise ShapeError("prediction/target step counts differ")
    T = len(preds)
    n = preds[0].shape[0]
    w = Tensor(weights.area_w[:, None])
    scale = Tensor(weights.var_scale)
    total = None
    for p, y in zip(preds, targets):
        if p.shape != y.shape:
            raise ShapeError("prediction/target shapes differ")
        term = ((p - y).square() * scale * w).sum()
        total = term if total is None else total + term
    return total * (1.0 / (T * n))


def nll_loss(preds, sigmas, targets, area_w: np.ndarray) -> Tensor:
    """Gaussian negative log likelihood, averaged over steps and nodes.

    ``sigmas`` entries may be [N, d_x] tensors (learned) or per-variable
    arrays (fixed); all must be strictly positive.
    """
    preds, targets = _as_steps(preds), _as_steps(targets)
    sig_list = sigmas if isinstance(sigmas, (list, tuple)) else [sigmas] * len(preds)
    if len(sig_list) != len(preds):
        raise ShapeError("sigma/step counts differ")
    T = len(preds)
    n = preds[0].shape[0]
    w = Tensor(area_w[:, None])
    total = None
    for p, y, s in zip(preds, targets, sig_list):
        s = s if isinstance(s, Tensor) else Tensor(np.broadcast_to(np.asarray(s, float), p.shape).copy())
        if np.any(s.data <= 0):
            raise NumericsError("nll_loss requires strictly positive sigma")
        if s.shape != p.shape:
            raise ShapeError("sigma shape must match predictions")
        quad = (p - y).square() / (s.square() * 2.0)
        term = ((quad + s.log() + 0.5 * LOG_2PI) * w).sum()
        total = term if total is None else total + term
    return total * (1.0 / (T * n))


def _recon_term(pred: Tensor, sigma, target, area_w: np.ndarray) -> Tensor:
    """Unnormalized Gaussian NLL: sum_a,j w_a -log N(x | pred, sigma^2)."""
    y = target if isinstance(target, Tensor) else Tensor(target)
    s = sigma if isinstance(sigma, Tensor) else Tensor(np.broadcast_to(np.asarray(sigma, float), pred.shape).copy())
    w = Tensor(area_w[:, None])
    quad = (pred - y).square() / (s.square() * 2.0)
    return ((quad + s.log() + 0.5 * LOG_2PI) * w).sum()


def _predictor_sigma(params: ModelParams, sigma_out, weights: LossWeights, shape) -> Tensor | np.ndarray:
    if params.config.learn_sigma:
        return sigma_out
    return np.broadcast_to(weights.fixed_sigma(), shape).copy()


def _elbo_parts(params, topo, x2, x1, x_t, f_t, weights: LossWeights, noise: np.ndarray):
    q = variational_params(params, topo, x2, x1, x_t, f_t)
    z = q.mean + q.std * Tensor(noise)
    prior = latent_map_mean(params, topo, x2, x1, f_t)
    kl = gaussian_kl_to_unit(q, prior.mean)
    pred, sigma_out = predictor(params, topo, z, x2, x1, f_t)
    sigma = _predictor_sigma(params, sigma_out, weights, pred.shape)
    recon = _recon_term(pred, sigma, x_t, weights.area_w)
    loss = kl * weights.lambda_kl + recon
    return loss, pred


def elbo_step_loss(
    params: ModelParams,
    topo: GraphTopology,
    x_prev2,
    x_prev1,
    x_t,
    f_t,
    weights: LossWeights,
    noise: np.ndarray,
) -> Tensor:
    """lambda_KL * KL(q || prior) + single-sample Gaussian reconstruction."""
    if not params.config.is_latent:
        raise ConfigError("the variational bound needs a latent variant")
    loss, _ = _elbo_parts(params, topo, x_prev2, x_prev1, x_t, f_t, weights, noise)
    return loss


def _feed_back(pred: Tensor, window: TrainingWindow, t: int) -> Tensor:
    if window.boundary_mask is None:
        return pred
    return overwrite_boundary(pred, window.targets[t], window.boundary_mask)


def multi_step_loss(
    params: ModelParams,
    topo: GraphTopology,
    window: TrainingWindow,
    T: int,
    weights: LossWeights,
    noise_seq: np.ndarray,
) -> Tensor:
    """Sum of per-step bounds along a rollout driven by posterior samples.

    Ground-truth targets enter every step's loss; the sampled prediction is
    fed back (with boundary cells overwritten from the targets when a
    boundary mask is present).
    """
    if T < 1 or T > window.horizon():
        raise ShapeError(f"window supplies {window.horizon()} steps, requested {T}")
    if len(noise_seq) < T:
        raise ShapeError("need one noise draw per step")
    x2, x1 = Tensor(window.x_prev2), Tensor(window.x_prev1)
    total = None
    for t in range(T):
        loss_t, pred = _elbo_parts(
            params, topo, x2, x1, window.targets[t], window.forcing[t], weights, noise_seq[t]
        )
        total = loss_t if total is None else total + loss_t
        x2, x1 = x1, _feed_back(pred, window, t)
    return total


def crps_train_loss(member_a, member_b, target, area_w: np.ndarray) -> Tensor:
    """Unbiased two-sample CRPS estimator, summed over steps, nodes, variables."""
    a_steps, b_steps, y_steps = _as_steps(member_a), _as_steps(member_b), _as_steps(target)
    if not (len(a_steps) == len(b_steps) == len(y_steps)):
        raise ShapeError("member/target step counts differ")
    w = Tensor(area_w[:, None])
    total = None
    for a, b, y in zip(a_steps, b_steps, y_steps):
        term = (((a - y).abs() + (b - y).abs() - (a - b).abs()) * w).sum() * 0.5
        total = term if total is None else total + term
    return total


def _latent_rollout_steps(
    params, topo, window: TrainingWindow, T: int, noise_seq: np.ndarray
) -> list[Tensor]:
    """Predictions of one member driven by latent-map samples (graph kept)."""
    x2, x1 = Tensor(window.x_prev2), Tensor(window.x_prev1)
    steps = []
    for t in range(T):
        f_t = window.forcing[t]
        prior = latent_map_mean(params, topo, x2, x1, f_t)
        z = prior.mean + prior.std * Tensor(noise_seq[t])
        pred, _ = predictor(params, topo, z, x2, x1, f_t)
        fed = _feed_back(pred, window, t)
        steps.append(fed)
        x2, x1 = x1, fed
    return steps


def draw_training_noise(
    params: ModelParams, topo: GraphTopology, seed: int, sample_index: int, T: int
) -> dict[str, np.ndarray]:
    """Deterministic noise bundle for one training sample.

    Streams are keyed by purpose / sample / step, so the posterior rollout
    and the two latent-map rollouts never share draws.
    """
    n, dz = latent_width(params, topo), params.config.d_z
    out = {}
    for purpose in ("elbo-q", "crps-a", "crps-b"):
        out[purpose] = np.stack(
            [stream(seed, purpose, sample_index, t).standard_normal((n, dz)) for t in range(1, T + 1)]
        )
    return out


def combined_loss(
    params: ModelParams,
    topo: GraphTopology,
    window: TrainingWindow,
    T: int,
    weights: LossWeights,
    noise: dict[str, np.ndarray],
) -> Tensor:
    """Variational rollout loss plus weighted two-sample CRPS term.

    Three rollouts in total: one driven by posterior samples for the
    variational part, two driven by latent-map samples for the CRPS part.
    """
    loss = multi_step_loss(params, topo, window, T, weights, noise["elbo-q"])
    if weights.lambda_crps > 0:
        a = _latent_rollout_steps(params, topo, window, T, noise["crps-a"])
        b = _latent_rollout_steps(params, topo, window, T, noise["crps-b"])
        targets = [window.targets[t] for t in range(T)]
        loss = loss + crps_train_loss(a, b, targets, weights.area_w) * weights.lambda_crps
    return loss
