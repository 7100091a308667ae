"""Model variant tags and architecture configuration."""

from __future__ import annotations

from dataclasses import asdict, dataclass

from ..errors import ConfigError

MS_DET = "multiscale_deterministic"
HIER_DET = "hierarchical_deterministic"
HIER_LATENT = "hierarchical_latent"
MS_LATENT = "multiscale_latent"

VARIANTS = (MS_DET, HIER_DET, HIER_LATENT, MS_LATENT)
LATENT_VARIANTS = (HIER_LATENT, MS_LATENT)
DETERMINISTIC_VARIANTS = (MS_DET, HIER_DET)


@dataclass(frozen=True)
class ModelConfig:
    """Architecture knobs for one model variant.

    ``processor_steps`` drives the multiscale processors; hierarchical
    deterministic models instead run ``sweeps`` down-and-up sweeps (two
    processing steps each).  The multiscale latent variant splits its
    processor depth between latent map / predictor / posterior.
    """

    variant: str
    d_x: int
    d_forcing: int
    d_z: int = 16
    processor_steps: int = 4
    sweeps: int = 2
    predictor_sweeps: int = 1
    latent_steps: int = 2
    predictor_steps: int = 4
    posterior_steps: int = 4
    learn_sigma: bool = False
    static_prior: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant '{self.variant}'")
        if self.d_x < 1 or self.d_forcing < 0 or self.d_z < 1:
            raise ConfigError("invalid model dimensions")
        if self.processor_steps < 1 or self.sweeps < 1:
            raise ConfigError("processor depth must be positive")

    @property
    def is_latent(self) -> bool:
        return self.variant in LATENT_VARIANTS

    @property
    def head_width(self) -> int:
        return 2 * self.d_x if self.learn_sigma else self.d_x

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(doc: dict) -> "ModelConfig":
        try:
            return ModelConfig(**doc)
        except TypeError as exc:
            raise ConfigError(f"bad model config: {exc}") from exc
