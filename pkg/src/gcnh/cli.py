"""Command-line entry point for the experiment suite.

Subcommands: train, grid, synth-sweep, ablation, agg-compare, oversmoothing,
bench, beta-report, homophily, gen-synth. All outputs are JSON/CSV with a
schema_version field; plotting is left to external tooling. Exit codes:
0 on success, 1 on runtime failure (including non-finite losses), 2 on bad
inputs such as a missing dataset directory.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import experiments
from .data import DatasetFormatError, load_dataset
from .models import ModelConfig
from .training import FULL_BATCH, HyperGrid, NonFiniteLossError, TrainConfig

__all__ = ["main", "entrypoint", "parse_grid_file", "parse_config_file"]


def _parse_batch(value):
    if isinstance(value, str) and value.lower() in (FULL_BATCH, "|v|"):
        return FULL_BATCH
    return int(value)


def parse_config_file(path) -> tuple[ModelConfig, TrainConfig]:
    """Read a JSON file with "model" and "train" sections into config objects."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    model_part = dict(payload.get("model", {}))
    train_part = dict(payload.get("train", {}))
    if "batch_size" in train_part:
        train_part["batch_size"] = _parse_batch(train_part["batch_size"])
    return ModelConfig(**model_part), TrainConfig(**train_part)


def parse_grid_file(path) -> HyperGrid:
    """Read a JSON grid file: scalar fields are fixed, list fields become axes."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    model_fixed, model_axes = {}, {}
    for key, value in payload.get("model", {}).items():
        (model_axes if isinstance(value, list) else model_fixed)[key] = value
    train_fixed, train_axes = {}, {}
    for key, value in payload.get("train", {}).items():
        if isinstance(value, list):
            train_axes[key] = [_parse_batch(v) for v in value] if key == "batch_size" else value
        else:
            train_fixed[key] = _parse_batch(value) if key == "batch_size" else value
    return HyperGrid(
        base_model=ModelConfig(**{k: v[0] for k, v in model_axes.items()} | model_fixed),
        base_train=TrainConfig(**{k: v[0] for k, v in train_axes.items()} | train_fixed),
        model_axes=model_axes,
        train_axes=train_axes,
    )


def _add_common(parser, data_help: str, needs_out: bool = True):
    parser.add_argument("--data", required=True, help=data_help)
    if needs_out:
        parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--workers", type=int, default=1, help="parallel workers (1 = bit-reproducible)")


def _add_synth_options(parser):
    parser.add_argument("--nodes", type=int, default=1490, help="nodes per synthetic graph")
    parser.add_argument("--attach-edges", type=int, default=2, help="edges attached per new node")
    parser.add_argument("--replicates", type=int, default=3, help="graphs per homophily level")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gcnh", description="GCNH experiment suite")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one model on one split")
    _add_common(p, "dataset directory")
    p.add_argument("--config-file", required=True, help="JSON with model/train sections")
    p.add_argument("--split", type=int, default=0, help="index of the stored split to use")

    p = sub.add_parser("grid", help="hyperparameter grid search over all splits")
    _add_common(p, "dataset directory")
    p.add_argument("--grid-file", required=True, help="JSON grid; list-valued fields are axes")

    p = sub.add_parser("synth-sweep", help="MLP/GCN/GCNH accuracy across the homophily sweep")
    _add_common(p, "feature-pool dataset directory")
    _add_synth_options(p)
    p.add_argument("--grid-mode", choices=["desk", "paper"], default="desk")

    p = sub.add_parser("ablation", help="GCN vs fixed-beta GCNH vs full GCNH")
    _add_common(p, "dataset directory")
    p.add_argument("--num-seeds", type=int, default=5)

    p = sub.add_parser("agg-compare", help="GCNH with sum/mean/max aggregation")
    _add_common(p, "dataset directory")
    p.add_argument("--num-seeds", type=int, default=3)

    p = sub.add_parser("oversmoothing", help="accuracy vs depth for GCN and GCNH")
    _add_common(p, "homophilous dataset directory")
    p.add_argument("--grid-mode", choices=["desk", "paper"], default="desk")
    p.add_argument("--num-seeds", type=int, default=3)

    p = sub.add_parser("bench", help="training time for 200 epochs x 10 splits")
    _add_common(p, "dataset directory")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--splits", type=int, default=10)

    p = sub.add_parser("beta-report", help="learned beta across the homophily sweep")
    _add_common(p, "feature-pool dataset directory")
    _add_synth_options(p)

    p = sub.add_parser("homophily", help="edge homophily report for a dataset")
    _add_common(p, "dataset directory")

    p = sub.add_parser("gen-synth", help="write the synthetic sweep as dataset directories")
    _add_common(p, "feature-pool dataset directory")
    _add_synth_options(p)
    return parser


def _load(path):
    return load_dataset(path)


def _pool_from(path):
    dataset = load_dataset(path)
    return dataset.features, dataset.labels.labels


def _dispatch(args) -> int:
    out = Path(args.out) if hasattr(args, "out") else None
    if args.command == "train":
        model_config, train_config = parse_config_file(args.config_file)
        if args.seed:
            train_config = TrainConfig(**{**train_config.to_dict(), "seed": args.seed})
        experiments.run_single_training(_load(args.data), model_config, train_config, args.split, out)
    elif args.command == "grid":
        experiments.run_grid(_load(args.data), parse_grid_file(args.grid_file), out, workers=args.workers)
    elif args.command == "synth-sweep":
        experiments.run_synth_sweep(
            _pool_from(args.data), out, seed=args.seed, num_nodes=args.nodes,
            edges_per_new_node=args.attach_edges, replicates=args.replicates,
            grid_mode=args.grid_mode, workers=args.workers,
        )
    elif args.command == "ablation":
        experiments.run_ablation(_load(args.data), out, seed=args.seed, num_seeds=args.num_seeds)
    elif args.command == "agg-compare":
        experiments.run_agg_compare(_load(args.data), out, seed=args.seed, num_seeds=args.num_seeds)
    elif args.command == "oversmoothing":
        experiments.run_oversmoothing(
            _load(args.data), out, seed=args.seed, grid_mode=args.grid_mode,
            num_seeds=args.num_seeds, workers=args.workers,
        )
    elif args.command == "bench":
        experiments.run_bench(_load(args.data), out, seed=args.seed, epochs=args.epochs, num_splits=args.splits)
    elif args.command == "beta-report":
        experiments.run_beta_report(
            _pool_from(args.data), out, seed=args.seed, num_nodes=args.nodes,
            edges_per_new_node=args.attach_edges, replicates=args.replicates,
        )
    elif args.command == "homophily":
        experiments.homophily_report(_load(args.data), out / "homophily.json")
    elif args.command == "gen-synth":
        experiments.generate_sweep_directories(
            _pool_from(args.data), out, seed=args.seed, num_nodes=args.nodes,
            edges_per_new_node=args.attach_edges, replicates=args.replicates,
        )
    else:  # pragma: no cover - argparse enforces the choices
        raise ValueError(f"unknown command {args.command}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except (DatasetFormatError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NonFiniteLossError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:  # pragma: no cover - console-script shim
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
