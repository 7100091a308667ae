"""Command-line interface.

Subcommands: ``graph build|stats|check``, ``data synth``, ``train``,
``forecast``, ``evaluate``.  Exit codes: 0 ok, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from ..errors import ConfigError, GraphBuildError, MeshcastError, NumericsError
from ..meshgraph import HIERARCHICAL, MULTISCALE, PLANAR, SPHERICAL, check_graph, graph_stats, load_graph, save_graph
from ..models import build_topology, load_checkpoint, rollout_deterministic, sample_ensemble
from .builders import build_global_graph, build_lam_graph
from .config import load_run_config
from .data import load_dataset, save_dataset
from .evaluation import EvalSettings, evaluate, write_plots, write_report
from .synth import synth_data
from .training import train

_KINDS = {"multiscale": MULTISCALE, "hier": HIERARCHICAL}


def _parse_grid(text: str) -> tuple[int, int]:
    try:
        rows, cols = (int(p) for p in text.lower().split("x"))
        return rows, cols
    except ValueError as exc:
        raise ConfigError(f"--grid expects ROWSxCOLS, got '{text}'") from exc


def _cmd_graph(args) -> int:
    if args.action == "build":
        kind = _KINDS[args.kind]
        if args.geometry == "global":
            rows, cols = (121, 240) if args.grid is None else _parse_grid(args.grid)
            g = build_global_graph(kind, rows, cols, args.refinements, args.levels)
        else:
            rows, cols = (238, 268) if args.grid is None else _parse_grid(args.grid)
            levels = args.levels if args.levels is not None else 3
            g = build_lam_graph(kind, rows, cols, levels, mesh_side=args.mesh_side)
        save_graph(g, args.out)
        print(json.dumps(graph_stats(g), indent=1))
        return 0
    g = load_graph(args.graph)
    if args.action == "stats":
        print(json.dumps(graph_stats(g), indent=1))
        return 0
    problems = check_graph(g)
    if problems:
        for p in problems:
            print(f"violation: {p}", file=sys.stderr)
        raise GraphBuildError(f"{len(problems)} invariant violations")
    print("ok")
    return 0


def _cmd_data_synth(args) -> int:
    rows, cols = _parse_grid(args.grid)
    geometry = SPHERICAL if args.geometry == "global" else PLANAR
    from ..meshgraph import GridSpec

    ds = synth_data(
        GridSpec(geometry, rows, cols),
        args.steps,
        args.seed,
        boundary_width=args.boundary_width,
    )
    save_dataset(ds, args.out)
    print(f"wrote {args.out}.bin / {args.out}.json "
          f"({ds.n_steps} steps, {ds.grid.n_nodes} nodes, {ds.d_x} variables)")
    return 0


def _cmd_train(args) -> int:
    config = load_run_config(args.config)
    dataset = load_dataset(args.data)
    graph = load_graph(args.graph)
    result = train(config, dataset, graph, out_dir=args.out)
    for entry in result.log:
        print(f"stage {entry['stage']} ({entry['mode']}) epoch {entry['epoch']}: "
              f"loss {entry['loss']:.6f}")
    print(f"checkpoints: {', '.join(result.checkpoint_paths)}")
    return 0


def _load_model(checkpoint: str, graph_path: str):
    params, meta = load_checkpoint(checkpoint)
    graph = load_graph(graph_path)
    topo = build_topology(graph)
    if meta["graph_hash"] != topo.graph_hash:
        raise ConfigError("checkpoint was trained on a different graph (hash mismatch)")
    return params, topo, meta


def _cmd_forecast(args) -> int:
    params, topo, _ = _load_model(args.checkpoint, args.graph)
    dataset = load_dataset(args.data)
    inp = dataset.rollout_input(args.init_time, args.T)
    if args.ensemble > 1 or params.config.is_latent:
        ens = sample_ensemble(params, topo, inp, args.T, args.ensemble, args.seed,
                              max_workers=args.workers)
        members = dataset.denormalize(ens.members)
    else:
        members = dataset.denormalize(rollout_deterministic(params, topo, inp, args.T))[None]
    meta = {
        "init_time": args.init_time,
        "T": args.T,
        "ensemble": int(members.shape[0]),
        "seed": args.seed,
        "variables": dataset.variables,
    }
    with open(args.out, "wb") as fh:
        np.savez(fh, members=members,
                 __meta__=np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8))
    print(f"wrote {args.out}: members {members.shape}")
    return 0


def _cmd_evaluate(args) -> int:
    params, topo, _ = _load_model(args.checkpoint, args.graph)
    dataset = load_dataset(args.data)
    sizes = tuple(int(s) for s in args.sweep_sizes.split(",") if s) if args.sweep_sizes else ()
    settings = EvalSettings(
        horizon=args.T,
        ensemble_size=args.ensemble,
        split=args.split,
        stride=args.stride,
        base_seed=args.seed,
        ensemble_sizes=sizes,
        sweep_reuse_members=args.sweep_reuse_members,
        max_workers=args.workers,
        model_name=args.model_name,
    )
    tables = evaluate(params, topo, dataset, settings, checkpoint_graph_hash=topo.graph_hash)
    if args.report:
        write_report(tables, args.report)
        print(f"wrote report {args.report}")
    if args.plots:
        files = write_plots(tables, args.plots)
        print(f"wrote {len(files)} plots to {args.plots}")
    main = tables[args.model_name]
    for metric in sorted(main.metrics):
        last = main.metrics[metric][-1]
        print(f"{metric} @ lead {main.lead_times[-1]}: "
              + ", ".join(f"{v}={x:.4g}" for v, x in zip(main.variables, last)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="meshcast",
                                     description="Graph-based toy weather forecasting")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("graph", help="build, inspect or validate mesh graphs")
    ga = g.add_subparsers(dest="action", required=True)
    gb = ga.add_parser("build")
    gb.add_argument("--kind", choices=list(_KINDS), required=True)
    gb.add_argument("--geometry", choices=["global", "lam"], required=True)
    gb.add_argument("--refinements", type=int, default=4, help="icosphere splits (global)")
    gb.add_argument("--grid", help="data grid ROWSxCOLS (defaults to the published domains)")
    gb.add_argument("--levels", type=int, default=None, help="hierarchy / merge level count")
    gb.add_argument("--mesh-side", type=int, default=None, help="finest LAM mesh side override")
    gb.add_argument("--out", required=True)
    for action in ("stats", "check"):
        gx = ga.add_parser(action)
        gx.add_argument("--graph", required=True)

    d = sub.add_parser("data", help="synthetic datasets")
    da = d.add_subparsers(dest="action", required=True)
    ds = da.add_parser("synth")
    ds.add_argument("--grid", required=True, help="ROWSxCOLS")
    ds.add_argument("--geometry", choices=["global", "lam"], default="global")
    ds.add_argument("--steps", type=int, required=True)
    ds.add_argument("--seed", type=int, default=0)
    ds.add_argument("--boundary-width", type=int, default=0)
    ds.add_argument("--out", required=True)

    t = sub.add_parser("train", help="run a staged training schedule")
    t.add_argument("--config", required=True)
    t.add_argument("--data", required=True)
    t.add_argument("--graph", required=True)
    t.add_argument("--out", required=True)

    f = sub.add_parser("forecast", help="roll out a forecast from a checkpoint")
    f.add_argument("--checkpoint", required=True)
    f.add_argument("--data", required=True)
    f.add_argument("--graph", required=True)
    f.add_argument("--init-time", type=int, required=True)
    f.add_argument("--T", type=int, required=True)
    f.add_argument("--ensemble", type=int, default=1)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--workers", type=int, default=None)
    f.add_argument("--out", required=True)

    e = sub.add_parser("evaluate", help="score a checkpoint on a dataset split")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--graph", required=True)
    e.add_argument("--T", type=int, required=True)
    e.add_argument("--ensemble", type=int, default=1)
    e.add_argument("--split", default="test")
    e.add_argument("--stride", type=int, default=1)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--sweep-sizes", default="", help="comma-separated ensemble sizes")
    e.add_argument("--sweep-reuse-members", action="store_true")
    e.add_argument("--workers", type=int, default=None)
    e.add_argument("--model-name", default="model")
    e.add_argument("--report", default=None)
    e.add_argument("--plots", default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "graph":
            return _cmd_graph(args)
        if args.command == "data":
            return _cmd_data_synth(args)
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "forecast":
            return _cmd_forecast(args)
        if args.command == "evaluate":
            return _cmd_evaluate(args)
        raise ConfigError(f"unknown command {args.command}")
    except (ConfigError, GraphBuildError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericsError,) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except MeshcastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
