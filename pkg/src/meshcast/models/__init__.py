"""Model variants, single steps, rollouts, ensembles, snapshots, checkpoints."""

from .checkpoint import load_checkpoint, save_checkpoint
from .config import (
    DETERMINISTIC_VARIANTS,
    HIER_DET,
    HIER_LATENT,
    LATENT_VARIANTS,
    MS_DET,
    MS_LATENT,
    VARIANTS,
    ModelConfig,
)
from .forward import (
    latent_map_mean,
    latent_width,
    predictor,
    single_step,
    step_graphfm,
    step_multiscale,
    variational_params,
)
from .params import ModelParams, init_model_params, randomize_outputs
from .rollout import (
    Ensemble,
    RolloutInput,
    overwrite_boundary,
    rollout_deterministic,
    sample_ensemble,
    sample_member,
)
from .swag import swag_snapshot_ensemble
from .topology import GRID, GraphTopology, build_topology, graph_fingerprint

__all__ = [
    "load_checkpoint",
    "save_checkpoint",
    "DETERMINISTIC_VARIANTS",
    "HIER_DET",
    "HIER_LATENT",
    "LATENT_VARIANTS",
    "MS_DET",
    "MS_LATENT",
    "VARIANTS",
    "ModelConfig",
    "latent_map_mean",
    "latent_width",
    "predictor",
    "single_step",
    "step_graphfm",
    "step_multiscale",
    "variational_params",
    "ModelParams",
    "init_model_params",
    "randomize_outputs",
    "Ensemble",
    "RolloutInput",
    "overwrite_boundary",
    "rollout_deterministic",
    "sample_ensemble",
    "sample_member",
    "swag_snapshot_ensemble",
    "GRID",
    "GraphTopology",
    "build_topology",
    "graph_fingerprint",
]
