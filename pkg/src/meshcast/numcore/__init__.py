"""Numeric substrate: tensors with reverse-mode autodiff, MLPs, AdamW, Gaussians."""

from .gauss import DiagGaussian, gaussian_kl_to_unit, reparam_sample
from .nn import LAYER_NORM_EPS, MlpParams, layer_norm, mlp_forward, mlp_init, mlp_zero, swish
from .optim import AdamWState, adamw_step
from .rng import stream
from .tensor import Tensor, backward, concat, maximum, no_grad, segment_sum, take_rows

__all__ = [
    "DiagGaussian",
    "gaussian_kl_to_unit",
    "reparam_sample",
    "LAYER_NORM_EPS",
    "MlpParams",
    "layer_norm",
    "mlp_forward",
    "mlp_init",
    "mlp_zero",
    "swish",
    "AdamWState",
    "adamw_step",
    "stream",
    "Tensor",
    "backward",
    "concat",
    "maximum",
    "no_grad",
    "segment_sum",
    "take_rows",
]
