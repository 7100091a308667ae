"""End-to-end glue: synthetic data, training schedules, evaluation, CLI."""

from .builders import (
    build_global_graph,
    build_lam_graph,
    toy_global_graph,
    toy_global_grid,
    toy_lam_graph,
    toy_lam_grid,
)
from .config import RunConfig, load_run_config, save_run_config
from .data import (
    Dataset,
    apply_boundary,
    build_boundary_mask,
    load_dataset,
    save_dataset,
)
from .evaluation import (
    EvalSettings,
    collect_deterministic,
    collect_ensembles,
    evaluate,
    write_plots,
    write_report,
)
from .synth import synth_data
from .training import TrainResult, make_loss_weights, snapshot_ensemble_from, train

__all__ = [
    "build_global_graph",
    "build_lam_graph",
    "toy_global_graph",
    "toy_global_grid",
    "toy_lam_graph",
    "toy_lam_grid",
    "RunConfig",
    "load_run_config",
    "save_run_config",
    "Dataset",
    "apply_boundary",
    "build_boundary_mask",
    "load_dataset",
    "save_dataset",
    "EvalSettings",
    "collect_deterministic",
    "collect_ensembles",
    "evaluate",
    "write_plots",
    "write_report",
    "synth_data",
    "TrainResult",
    "make_loss_weights",
    "snapshot_ensemble_from",
    "train",
]
