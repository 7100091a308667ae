"""Run configuration: model knobs, training schedule, seeds, ensemble size."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..errors import ConfigError
from ..models import DETERMINISTIC_VARIANTS, LATENT_VARIANTS, VARIANTS, ModelConfig
from ..objectives import StageConfig

_LATENT_MODES = {"autoencoder", "variational", "crps_finetune"}
_DET_MODES = {"mse", "nll"}


@dataclass
class RunConfig:
    variant: str
    schedule: list[StageConfig] = field(default_factory=list)
    d_z: int = 16
    processor_steps: int = 4
    sweeps: int = 2
    predictor_sweeps: int = 1
    latent_steps: int = 2
    predictor_steps: int = 4
    posterior_steps: int = 4
    learn_sigma: bool = False
    static_prior: bool = False
    seed: int = 0
    ensemble_size: int = 20
    batch_size: int = 1
    window_stride: int = 1
    eval_stride: int = 1

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant '{self.variant}'")
        if self.ensemble_size < 1 or self.batch_size < 1:
            raise ConfigError("ensemble_size and batch_size must be positive")
        latent = self.variant in LATENT_VARIANTS
        for i, stage in enumerate(self.schedule):
            if latent and stage.mode not in _LATENT_MODES:
                raise ConfigError(f"stage {i}: mode '{stage.mode}' needs a deterministic variant")
            if not latent and stage.mode not in _DET_MODES:
                raise ConfigError(f"stage {i}: mode '{stage.mode}' needs a probabilistic variant")
            if stage.mode == "crps_finetune" and stage.lambda_crps <= 0:
                raise ConfigError(f"stage {i}: crps_finetune needs lambda_crps > 0")
            if stage.mode == "nll" and not self.learn_sigma:
                raise ConfigError(f"stage {i}: nll mode requires learn_sigma")

    def model_config(self, d_x: int, d_forcing: int) -> ModelConfig:
        return ModelConfig(
            variant=self.variant,
            d_x=d_x,
            d_forcing=d_forcing,
            d_z=self.d_z,
            processor_steps=self.processor_steps,
            sweeps=self.sweeps,
            predictor_sweeps=self.predictor_sweeps,
            latent_steps=self.latent_steps,
            predictor_steps=self.predictor_steps,
            posterior_steps=self.posterior_steps,
            learn_sigma=self.learn_sigma,
            static_prior=self.static_prior,
        )

    @property
    def is_latent(self) -> bool:
        return self.variant in LATENT_VARIANTS

    def to_dict(self) -> dict:
        doc = {k: v for k, v in self.__dict__.items() if k != "schedule"}
        doc["schedule"] = [s.__dict__ for s in self.schedule]
        return doc

    @staticmethod
    def from_dict(doc: dict) -> "RunConfig":
        doc = dict(doc)
        stages = doc.pop("schedule", [])
        try:
            schedule = [StageConfig(**s) for s in stages]
            return RunConfig(schedule=schedule, **doc)
        except TypeError as exc:
            raise ConfigError(f"bad run config: {exc}") from exc


def load_run_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return RunConfig.from_dict(doc)


def save_run_config(config: RunConfig, path: str) -> None:
    from ..meshgraph.io import atomic_write_text

    atomic_write_text(path, json.dumps(config.to_dict(), indent=1))
