"""Pipeline tests: synthetic data, windowing, boundary, training, evaluation, CLI."""

import json
import os

import numpy as np
import pytest

from meshcast.errors import ConfigError
from meshcast.meshgraph import PLANAR, SPHERICAL, GridSpec, planar_grid
from meshcast.models import build_topology, load_checkpoint
from meshcast.objectives import StageConfig
from meshcast.pipeline import (
    Dataset,
    EvalSettings,
    RunConfig,
    apply_boundary,
    build_boundary_mask,
    evaluate,
    load_dataset,
    save_dataset,
    snapshot_ensemble_from,
    synth_data,
    toy_global_graph,
    toy_global_grid,
    toy_lam_graph,
    toy_lam_grid,
    train,
)
from meshcast.pipeline.cli import main as cli_main


@pytest.fixture(scope="module")
def toy_ds():
    return synth_data(toy_global_grid(), 40, seed=0)


@pytest.fixture(scope="module")
def toy_graph():
    return toy_global_graph()


# ---------------------------------------------------------------------------
# synthetic data
# ---------------------------------------------------------------------------


def test_synth_bit_identical_per_seed():
    a = synth_data(toy_global_grid(), 12, seed=7)
    b = synth_data(toy_global_grid(), 12, seed=7)
    assert a.fields.tobytes() == b.fields.tobytes()
    assert a.forcing.tobytes() == b.forcing.tobytes()
    assert a.static.tobytes() == b.static.tobytes()
    c = synth_data(toy_global_grid(), 12, seed=8)
    assert a.fields.tobytes() != c.fields.tobytes()


def test_synth_shape_contract():
    ds = synth_data(GridSpec(PLANAR, 10, 12), 9, seed=1, boundary_width=2)
    assert ds.fields.shape == (9, 120, 2)
    assert ds.forcing.shape == (9, 120, 2)
    assert ds.static.shape[0] == 120
    assert "boundary" in ds.static_names


def test_diffusion_only_variance_nonincreasing():
    ds = synth_data(GridSpec(PLANAR, 16, 16), 20, seed=3, advection=0.0, noise=0.0)
    var = ds.fields.var(axis=1)  # spatial variance per step and variable
    assert np.all(np.diff(var, axis=0) <= 1e-12)


def test_synth_rejects_degenerate_grid():
    with pytest.raises(ConfigError):
        synth_data(GridSpec(PLANAR, 4, 20), 10, seed=0)


# ---------------------------------------------------------------------------
# normalization and windowing
# ---------------------------------------------------------------------------


def test_normalization_round_trip(toy_ds):
    rng = np.random.default_rng(0)
    x = rng.normal(size=(5, toy_ds.grid.n_nodes, toy_ds.d_x)) * 7 + 3
    back = toy_ds.denormalize(toy_ds.normalize(x))
    assert np.abs(back - x).max() < 1e-12


def test_train_split_is_standardized(toy_ds):
    lo, hi = toy_ds.splits["train"]
    flat = toy_ds.normalized_fields[lo:hi].reshape(-1, toy_ds.d_x)
    assert np.abs(flat.mean(axis=0)).max() < 1e-6
    assert np.abs(flat.std(axis=0) - 1).max() < 1e-6


def test_window_forcing_constant_forcing_triples():
    ds = synth_data(GridSpec(PLANAR, 8, 8), 10, seed=2)
    ds.forcing[:] = 1.5
    ds.fit_normalization()
    w = ds.window_forcing(4)
    d = ds.forcing.shape[-1]
    np.testing.assert_array_equal(w[:, :d], w[:, d: 2 * d])
    np.testing.assert_array_equal(w[:, :d], w[:, 2 * d: 3 * d])


def test_window_forcing_width_and_slices(toy_ds):
    w = toy_ds.window_forcing(5)
    d = toy_ds.forcing.shape[-1]
    assert w.shape[1] == 3 * d + toy_ds.static.shape[-1] == toy_ds.forcing_window_width
    nf = toy_ds.normalized_forcing
    np.testing.assert_array_equal(w[:, :d], nf[4])
    np.testing.assert_array_equal(w[:, d: 2 * d], nf[5])
    np.testing.assert_array_equal(w[:, 2 * d: 3 * d], nf[6])
    np.testing.assert_array_equal(w[:, 3 * d:], toy_ds.normalized_static)


def test_window_forcing_out_of_range(toy_ds):
    from meshcast.errors import ShapeError

    with pytest.raises(ShapeError):
        toy_ds.window_forcing(0)
    with pytest.raises(ShapeError):
        toy_ds.window_forcing(toy_ds.n_steps - 1)


# ---------------------------------------------------------------------------
# boundary handling
# ---------------------------------------------------------------------------


def test_boundary_mask_is_exact_frame():
    mask = build_boundary_mask(planar_grid(10, 12), 3).reshape(10, 12)
    assert mask[:3].all() and mask[-3:].all()
    assert mask[:, :3].all() and mask[:, -3:].all()
    assert not mask[3:-3, 3:-3].any()
    assert mask.sum() == 10 * 12 - 4 * 6


def test_apply_boundary_zero_width_is_identity():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(20, 2))
    mask = build_boundary_mask(planar_grid(4, 5), 0)
    np.testing.assert_array_equal(apply_boundary(x, rng.normal(size=(20, 2)), mask), x)


def test_apply_boundary_fixed_point_and_idempotence():
    rng = np.random.default_rng(2)
    grid = planar_grid(8, 9)
    mask = build_boundary_mask(grid, 2)
    x = rng.normal(size=(grid.n_nodes, 2))
    b = rng.normal(size=(grid.n_nodes, 2))
    np.testing.assert_array_equal(apply_boundary(b.copy(), b, mask), b)
    once = apply_boundary(x, b, mask)
    twice = apply_boundary(once, b, mask)
    np.testing.assert_array_equal(once, twice)
    np.testing.assert_array_equal(once[mask], b[mask])
    np.testing.assert_array_equal(once[~mask], x[~mask])


def test_boundary_width_must_fit():
    with pytest.raises(ConfigError):
        build_boundary_mask(planar_grid(8, 8), 4)


# ---------------------------------------------------------------------------
# dataset files
# ---------------------------------------------------------------------------


def test_dataset_round_trip(tmp_path, toy_ds):
    base = str(tmp_path / "toy")
    save_dataset(toy_ds, base)
    back = load_dataset(base)
    assert back.fields.tobytes() == toy_ds.fields.tobytes()
    assert back.forcing.tobytes() == toy_ds.forcing.tobytes()
    assert back.static.tobytes() == toy_ds.static.tobytes()
    assert back.variables == toy_ds.variables
    assert back.splits == toy_ds.splits
    np.testing.assert_array_equal(back.norm_mean, toy_ds.norm_mean)
    np.testing.assert_array_equal(back.norm_std, toy_ds.norm_std)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


def _det_config(epochs=1, stride=6, **kw):
    return RunConfig(
        variant="hierarchical_deterministic", d_z=8, sweeps=1, seed=0, window_stride=stride,
        schedule=[StageConfig(epochs=epochs, learning_rate=1e-3, unroll_T=1, mode="mse")], **kw
    )


def test_zero_epoch_schedule_keeps_initialization(tmp_path, toy_ds, toy_graph):
    cfg = _det_config(epochs=0)
    res = train(cfg, toy_ds, toy_graph, out_dir=str(tmp_path))
    loaded, _ = load_checkpoint(str(tmp_path / "final.npz"))
    from meshcast.models import init_model_params
    from meshcast.numcore import stream

    topo = build_topology(toy_graph)
    fresh = init_model_params(stream(0, "init"), cfg.model_config(toy_ds.d_x, toy_ds.forcing_window_width), topo)
    a, b = fresh.tensors(), loaded.tensors()
    assert all(a[k].data.tobytes() == b[k].data.tobytes() for k in a)


def test_training_is_seed_deterministic(tmp_path, toy_ds, toy_graph):
    out1, out2 = str(tmp_path / "r1"), str(tmp_path / "r2")
    r1 = train(_det_config(epochs=2), toy_ds, toy_graph, out_dir=out1)
    r2 = train(_det_config(epochs=2), toy_ds, toy_graph, out_dir=out2)
    assert r1.log == r2.log
    b1 = open(os.path.join(out1, "final.npz"), "rb").read()
    b2 = open(os.path.join(out2, "final.npz"), "rb").read()
    assert b1 == b2


def test_training_loss_decreases(toy_ds, toy_graph):
    res = train(_det_config(epochs=8), toy_ds, toy_graph)
    assert res.log[-1]["loss"] < res.log[0]["loss"]
    assert all(np.isfinite(e["loss"]) for e in res.log)


def test_crps_stage_requires_latent_variant():
    with pytest.raises(ConfigError):
        RunConfig(
            variant="hierarchical_deterministic",
            schedule=[StageConfig(epochs=1, learning_rate=1e-3, mode="crps_finetune", lambda_crps=1.0)],
        )


def test_nll_stage_requires_learned_sigma():
    with pytest.raises(ConfigError):
        RunConfig(
            variant="multiscale_deterministic", learn_sigma=False,
            schedule=[StageConfig(epochs=1, learning_rate=1e-3, mode="nll")],
        )


def test_nll_training_runs_on_lam(toy_ds):
    grid = toy_lam_grid()
    ds = synth_data(grid, 24, seed=1, boundary_width=4)
    graph = toy_lam_graph()
    cfg = RunConfig(
        variant="hierarchical_deterministic", d_z=8, sweeps=1, seed=0, learn_sigma=True,
        window_stride=8,
        schedule=[StageConfig(epochs=1, learning_rate=1e-3, unroll_T=1, mode="nll")],
    )
    res = train(cfg, ds, graph)
    assert np.isfinite(res.log[-1]["loss"])


def test_snapshot_ensemble_runs(toy_ds, toy_graph):
    cfg = _det_config(epochs=1)
    res = train(cfg, toy_ds, toy_graph)
    snaps = snapshot_ensemble_from(
        res.params, cfg, toy_ds, res.topology, steps=6, save_every=3, learning_rate=1e-3
    )
    assert len(snaps) == 2


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def test_perfect_oracle_scores_zero(toy_ds, toy_graph):
    cfg = _det_config(epochs=0)
    res = train(cfg, toy_ds, toy_graph)
    settings = EvalSettings(horizon=3, stride=1)

    def oracle(inp, i0, T):
        return toy_ds.normalized_fields[i0 + 1: i0 + 1 + T]

    tables = evaluate(res.params, res.topology, toy_ds, settings, forecast_fn=oracle)
    table = tables["model"]
    assert np.abs(table.metrics["rmse"]).max() < 1e-12
    assert np.abs(table.metrics["crps"]).max() < 1e-12


def test_k1_probabilistic_crps_equals_mae(toy_ds, toy_graph):
    from meshcast.models import randomize_outputs

    cfg = RunConfig(variant="hierarchical_latent", d_z=8, seed=0, schedule=[])
    res = train(cfg, toy_ds, toy_graph)
    params = randomize_outputs(res.params, np.random.default_rng(1), scale=0.02)
    settings = EvalSettings(horizon=2, stride=3, ensemble_size=1)
    tables = evaluate(params, res.topology, toy_ds, settings)
    table = tables["model"]
    from meshcast.pipeline.evaluation import collect_ensembles

    members, targets = collect_ensembles(params, res.topology, toy_ds, settings, 1)
    mae = (np.abs(members[:, 0] - targets) * 1.0).mean(axis=(0, 2))  # weights handled below
    # recompute with the area weights actually used
    from meshcast.metrics import area_weights, ensemble_crps

    w = area_weights(toy_ds.grid)
    want = ensemble_crps(members, targets, w)
    got = np.stack([[table.value("crps", v, t) for v in table.variables] for t in table.lead_times])
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_evaluation_rejects_mismatched_graph(toy_ds, toy_graph):
    cfg = _det_config(epochs=0)
    res = train(cfg, toy_ds, toy_graph)
    settings = EvalSettings(horizon=2)
    with pytest.raises(ConfigError):
        evaluate(res.params, res.topology, toy_ds, settings, checkpoint_graph_hash="bogus")


def test_sweep_modes(toy_ds, toy_graph):
    from meshcast.models import randomize_outputs

    cfg = RunConfig(variant="hierarchical_latent", d_z=8, seed=0, schedule=[])
    res = train(cfg, toy_ds, toy_graph)
    params = randomize_outputs(res.params, np.random.default_rng(1), scale=0.02)
    settings = EvalSettings(horizon=2, stride=4, ensemble_size=4, ensemble_sizes=(2, 4),
                            sweep_reuse_members=True)
    tables = evaluate(params, res.topology, toy_ds, settings)
    assert {"model", "model@K2", "model@K4"} <= set(tables)
    # prefix mode: K4 sweep table equals the main table (same members)
    np.testing.assert_array_equal(tables["model@K4"].metrics["crps"], tables["model"].metrics["crps"])

    settings2 = EvalSettings(horizon=2, stride=4, ensemble_size=4, ensemble_sizes=(2,))
    tables2 = evaluate(params, res.topology, toy_ds, settings2)
    assert "model@K2" in tables2


# ---------------------------------------------------------------------------
# CLI round trip
# ---------------------------------------------------------------------------


def test_cli_round_trip(tmp_path, capsys):
    root = str(tmp_path)
    graph_path = os.path.join(root, "g.json")
    data_base = os.path.join(root, "toy")
    out_dir = os.path.join(root, "run")
    report = os.path.join(root, "report.csv")

    assert cli_main(["graph", "build", "--kind", "hier", "--geometry", "global",
                     "--refinements", "1", "--grid", "12x24", "--levels", "2",
                     "--out", graph_path]) == 0
    assert cli_main(["graph", "stats", "--graph", graph_path]) == 0
    assert cli_main(["graph", "check", "--graph", graph_path]) == 0
    assert cli_main(["data", "synth", "--grid", "12x24", "--geometry", "global",
                     "--steps", "30", "--seed", "3", "--out", data_base]) == 0

    config = {
        "variant": "hierarchical_deterministic",
        "d_z": 8,
        "sweeps": 1,
        "seed": 1,
        "window_stride": 6,
        "schedule": [
            {"epochs": 1, "learning_rate": 1e-3, "unroll_T": 1, "mode": "mse"},
        ],
    }
    cfg_path = os.path.join(root, "cfg.json")
    with open(cfg_path, "w") as fh:
        json.dump(config, fh)
    assert cli_main(["train", "--config", cfg_path, "--data", data_base,
                     "--graph", graph_path, "--out", out_dir]) == 0
    ckpt = os.path.join(out_dir, "final.npz")
    assert os.path.exists(ckpt)

    assert cli_main(["forecast", "--checkpoint", ckpt, "--data", data_base,
                     "--graph", graph_path, "--init-time", "25", "--T", "3",
                     "--out", os.path.join(root, "fc.npz")]) == 0
    assert cli_main(["evaluate", "--checkpoint", ckpt, "--data", data_base,
                     "--graph", graph_path, "--T", "2", "--report", report]) == 0
    capsys.readouterr()
    text = open(report).read()
    assert text.startswith("model,variable,lead_time_steps,metric,value,S,K")


def test_cli_config_error_exit_code(tmp_path, capsys):
    bad = str(tmp_path / "nope.json")
    assert cli_main(["train", "--config", bad, "--data", bad, "--graph", bad,
                     "--out", str(tmp_path)]) == 2
    capsys.readouterr()
