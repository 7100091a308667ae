"""Diagonal Gaussians: KL to a unit-variance prior and reparametrized sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NumericsError, ShapeError
from .tensor import Tensor


@dataclass
class DiagGaussian:
    """Elementwise-independent Gaussian with matching mean/std shapes.

    ``std`` must be strictly positive wherever the distribution is used as a
    distribution; a zero std is tolerated only so tests can check the
    degenerate reparametrization case.
    """

    mean: Tensor
    std: Tensor

    def __post_init__(self):
        if self.mean.shape != self.std.shape:
            raise ShapeError(f"mean shape {self.mean.shape} != std shape {self.std.shape}")
        if np.any(self.std.data < 0):
            raise NumericsError("negative std")


def gaussian_kl_to_unit(q: DiagGaussian, prior_mean: Tensor) -> Tensor:
    """KL(q || N(prior_mean, I)), summed over all elements.

    Closed form per element: 1/2 (sigma^2 + (mu_q - mu_p)^2 - 1 - 2 log sigma).
    Nonnegative; zero iff q equals the prior elementwise.
    """
    if prior_mean.shape != q.mean.shape:
        raise ShapeError("prior mean shape mismatch")
    if np.any(q.std.data <= 0):
        raise NumericsError("KL requires strictly positive std")
    var = q.std.square()
    delta = q.mean - prior_mean
    per_elem = var + delta.square() - 1.0 - q.std.log() * 2.0
    return per_elem.sum() * 0.5


def reparam_sample(q: DiagGaussian, rng: np.random.Generator) -> Tensor:
    """z = mu + sigma * eps with eps ~ N(0, I) drawn from ``rng``.

    Gradients flow to mean and std; the draw is deterministic per rng stream.
    """
    eps = Tensor(rng.standard_normal(q.mean.shape))
    return q.mean + q.std * eps
