"""Experiment drivers behind the CLI: sweeps, ablations, benchmarks, reports.

Every driver returns plain dicts/lists and (optionally) writes them as JSON
or CSV with a ``schema_version`` field, so outputs are machine-readable and
byte-stable across reruns apart from wall-clock timing fields.

Most drivers accept ``grid_mode``:

``"desk"``
    one sensible fixed configuration per model; minutes-scale runtimes.
``"paper"``
    the published hyperparameter grids (baselines: 100 epochs, 1-3 layers,
    hidden 16/32; GCNH: 1-3 layers, batch 300/full, 300 epochs, hidden
    16/32, dropout 0/0.25/0.5), selected by mean validation accuracy.
"""
from __future__ import annotations

import csv
import json
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
from scipy.stats import spearmanr

from .data import (
    DEFAULT_SWEEP_H_VALUES,
    Dataset,
    SynthConfig,
    generate_splits,
    generate_synthetic,
    grow_preferential_graph,
    homophily_sweep_generate,
    save_dataset,
)
from .graph import class_edge_matrix, edge_homophily
from .models import ModelConfig, count_params, init_model, save_checkpoint
from .training import (
    FULL_BATCH,
    HyperGrid,
    TrainConfig,
    evaluate,
    grid_search,
    run_protocol,
    train,
)

__all__ = [
    "SCHEMA_VERSION",
    "write_json",
    "write_csv",
    "desk_configs",
    "paper_grids",
    "run_single_training",
    "run_grid",
    "run_synth_sweep",
    "run_ablation",
    "run_agg_compare",
    "run_oversmoothing",
    "run_bench",
    "run_beta_report",
    "homophily_report",
    "generate_sweep_directories",
    "mean_epoch_seconds",
]

SCHEMA_VERSION = 1


def write_json(path, payload: dict) -> None:
    payload = {"schema_version": SCHEMA_VERSION, **payload}
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_csv(path, rows: list[dict]) -> None:
    if not rows:
        raise ValueError("refusing to write an empty table")
    fieldnames = ["schema_version"] + list(rows[0])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({"schema_version": SCHEMA_VERSION, **row})


def desk_configs() -> dict[str, tuple[ModelConfig, TrainConfig]]:
    """Fixed per-model configurations used when no grid search is requested."""
    return {
        "mlp": (ModelConfig("mlp", num_layers=1, hidden_size=32), TrainConfig(epochs=150)),
        "gcn": (ModelConfig("gcn", num_layers=2, hidden_size=32), TrainConfig(epochs=150)),
        "gcnh": (
            ModelConfig("gcnh", num_layers=1, hidden_size=32),
            TrainConfig(epochs=300, batch_size=300),
        ),
    }


def paper_grids(num_nodes: int) -> dict[str, HyperGrid]:
    """Published hyperparameter grids for the synthetic benchmark."""
    baseline_axes = {"num_layers": [1, 2, 3], "hidden_size": [16, 32]}
    return {
        "mlp": HyperGrid(
            base_model=ModelConfig("mlp"),
            base_train=TrainConfig(epochs=100),
            model_axes=dict(baseline_axes),
        ),
        "gcn": HyperGrid(
            base_model=ModelConfig("gcn"),
            base_train=TrainConfig(epochs=100),
            model_axes=dict(baseline_axes),
        ),
        "gcnh": HyperGrid(
            base_model=ModelConfig("gcnh"),
            base_train=TrainConfig(epochs=300),
            model_axes={
                "num_layers": [1, 2, 3],
                "hidden_size": [16, 32],
                "dropout_rate": [0.0, 0.25, 0.5],
            },
            train_axes={"batch_size": [300, FULL_BATCH]},
        ),
    }


def run_single_training(dataset: Dataset, model_config, train_config, split_index: int = 0, out_dir=None) -> dict:
    """Train one model on one stored split; optionally write run.json + checkpoint."""
    result = train(dataset, dataset.splits[split_index], model_config, train_config)
    payload = {
        "dataset": dataset.name,
        "split_index": split_index,
        "model_config": model_config.to_dict(),
        "train_config": train_config.to_dict(),
        **result.to_dict(),
    }
    if out_dir is not None:
        out_dir = Path(out_dir)
        write_json(out_dir / "run.json", payload)
        save_checkpoint(result.model, out_dir / "checkpoint.npz", seed=train_config.seed)
    return payload


def run_grid(dataset: Dataset, grid: HyperGrid, out_dir=None, workers: int = 1) -> dict:
    """Grid search under the split protocol; writes results.csv + best_config.json."""
    outcome = grid_search(dataset, grid, workers=workers)
    best = {
        "dataset": dataset.name,
        "best_model_config": outcome.best_model_config.to_dict(),
        "best_train_config": outcome.best_train_config.to_dict(),
        "best_mean_val_accuracy": outcome.best_mean_val_accuracy,
        "test_mean": outcome.test_mean,
        "test_std": outcome.test_std,
    }
    if out_dir is not None:
        out_dir = Path(out_dir)
        write_csv(out_dir / "results.csv", outcome.table)
        write_json(out_dir / "best_config.json", best)
    return {**best, "table": outcome.table}


def _sweep_datasets(pool, num_nodes, edges_per_new_node, num_classes, seed, replicates, h_values):
    base = SynthConfig(
        num_nodes=num_nodes,
        edges_per_new_node=edges_per_new_node,
        target_homophily=0.5,
        num_classes=num_classes,
        seed=seed,
        feature_pool=pool,
    )
    return homophily_sweep_generate(base, h_values=h_values, graphs_per_h=replicates, seed=seed)


def _best_for(dataset, name, grid_mode, workers):
    if grid_mode == "paper":
        grid = paper_grids(dataset.num_nodes)[name]
        outcome = grid_search(dataset, grid, workers=workers)
        return outcome.test_mean, None
    model_config, train_config = desk_configs()[name]
    protocol = run_protocol(dataset, model_config, train_config, workers=workers)
    betas = protocol.runs[0].betas
    return protocol.mean_test_accuracy, betas


def run_synth_sweep(
    pool,
    out_dir=None,
    seed: int = 0,
    num_nodes: int = 1490,
    edges_per_new_node: int = 2,
    num_classes: int = 5,
    replicates: int = 3,
    h_values=DEFAULT_SWEEP_H_VALUES,
    grid_mode: str = "desk",
    models=("mlp", "gcn", "gcnh"),
    workers: int = 1,
) -> list[dict]:
    """Accuracy of each model across the homophily sweep.

    Returns one row per (model, h, replicate) plus aggregated per-(model, h)
    means in the written summary.
    """
    datasets = _sweep_datasets(pool, num_nodes, edges_per_new_node, num_classes, seed, replicates, h_values)
    rows = []
    for dataset, (h, rep) in zip(datasets, [(h, r) for h in h_values for r in range(replicates)]):
        achieved = edge_homophily(dataset.graph, dataset.labels).edge_homophily
        for name in models:
            accuracy, betas = _best_for(dataset, name, grid_mode, workers)
            rows.append(
                {
                    "model": name,
                    "target_h": h,
                    "replicate": rep,
                    "achieved_h": achieved,
                    "test_accuracy": accuracy,
                    "beta0": float(betas[0]) if betas is not None and len(betas) else "",
                }
            )
    if out_dir is not None:
        out_dir = Path(out_dir)
        write_csv(out_dir / "synth_sweep.csv", rows)
        write_json(out_dir / "synth_sweep_summary.json", {"summary": summarize_sweep(rows)})
    return rows


def summarize_sweep(rows: list[dict]) -> list[dict]:
    """Mean accuracy per (model, target_h), in sweep order."""
    keys = []
    grouped: dict[tuple, list[float]] = {}
    for row in rows:
        key = (row["model"], row["target_h"])
        if key not in grouped:
            grouped[key] = []
            keys.append(key)
        grouped[key].append(row["test_accuracy"])
    return [
        {"model": model, "target_h": h, "mean_test_accuracy": float(np.mean(grouped[(model, h)]))}
        for model, h in keys
    ]


def run_ablation(dataset: Dataset, out_dir=None, seed: int = 0, num_seeds: int = 5, workers: int = 1) -> list[dict]:
    """GCN vs GCNH with fixed beta=0.5 vs full GCNH, averaged over seeds."""
    desk = desk_configs()
    variants = [
        ("gcn", desk["gcn"][0], desk["gcn"][1]),
        (
            "gcnh_fixed_beta",
            replace(desk["gcnh"][0], beta_trainable=False, beta_fixed_value=0.5),
            desk["gcnh"][1],
        ),
        ("gcnh_full", desk["gcnh"][0], desk["gcnh"][1]),
    ]
    rows = []
    for name, mc, tc in variants:
        accs = [
            train(dataset, dataset.splits[0], mc, replace(tc, seed=seed + s)).test_accuracy
            for s in range(num_seeds)
        ]
        rows.append(
            {
                "variant": name,
                "dataset": dataset.name,
                "mean_test_accuracy": float(np.mean(accs)),
                "std_test_accuracy": float(np.std(accs, ddof=1)) if num_seeds > 1 else 0.0,
                "num_seeds": num_seeds,
            }
        )
    if out_dir is not None:
        write_csv(Path(out_dir) / "ablation.csv", rows)
    return rows


def run_agg_compare(dataset: Dataset, out_dir=None, seed: int = 0, num_seeds: int = 3, workers: int = 1) -> list[dict]:
    """GCNH accuracy under sum/mean/max aggregation."""
    base_mc, base_tc = desk_configs()["gcnh"]
    rows = []
    for mode in ("sum", "mean", "max"):
        mc = replace(base_mc, aggregation=mode)
        accs = [
            train(dataset, dataset.splits[0], mc, replace(base_tc, seed=seed + s)).test_accuracy
            for s in range(num_seeds)
        ]
        rows.append(
            {
                "aggregation": mode,
                "dataset": dataset.name,
                "mean_test_accuracy": float(np.mean(accs)),
                "std_test_accuracy": float(np.std(accs, ddof=1)) if num_seeds > 1 else 0.0,
                "num_seeds": num_seeds,
            }
        )
    if out_dir is not None:
        write_csv(Path(out_dir) / "agg_compare.csv", rows)
    return rows


OVERSMOOTHING_DEPTHS = (1, 2, 4, 8)


def oversmoothing_grid(architecture: str, num_layers: int) -> HyperGrid:
    """Depth-experiment grid: batch 300, epochs 300/500, hidden 16/32/64, dropout 0/0.5."""
    return HyperGrid(
        base_model=ModelConfig(architecture, num_layers=num_layers),
        base_train=TrainConfig(batch_size=300, epochs=300),
        model_axes={"hidden_size": [16, 32, 64], "dropout_rate": [0.0, 0.5]},
        train_axes={"epochs": [300, 500]},
    )


def run_oversmoothing(
    dataset: Dataset,
    out_dir=None,
    seed: int = 0,
    depths=OVERSMOOTHING_DEPTHS,
    grid_mode: str = "desk",
    num_seeds: int = 3,
    workers: int = 1,
) -> list[dict]:
    """GCN and GCNH accuracy as depth grows on a homophilous dataset."""
    rows = []
    for architecture in ("gcn", "gcnh"):
        for depth in depths:
            if grid_mode == "paper":
                outcome = grid_search(dataset, oversmoothing_grid(architecture, depth), workers=workers)
                mean, std = outcome.test_mean, outcome.test_std
            else:
                mc = ModelConfig(architecture, num_layers=depth, hidden_size=32)
                tc = TrainConfig(epochs=300, batch_size=300)
                accs = [
                    train(dataset, dataset.splits[0], mc, replace(tc, seed=seed + s)).test_accuracy
                    for s in range(num_seeds)
                ]
                mean = float(np.mean(accs))
                std = float(np.std(accs, ddof=1)) if num_seeds > 1 else 0.0
            rows.append(
                {
                    "model": architecture,
                    "num_layers": depth,
                    "dataset": dataset.name,
                    "mean_test_accuracy": mean,
                    "std_test_accuracy": std,
                }
            )
    if out_dir is not None:
        write_csv(Path(out_dir) / "oversmoothing.csv", rows)
    return rows


def run_bench(dataset: Dataset, out_dir=None, seed: int = 0, epochs: int = 200, num_splits: int = 10) -> list[dict]:
    """Wall-clock training cost: ``epochs`` x ``num_splits``, 1 layer, hidden 16.

    Timed for sum and max aggregation; dataset loading is excluded,
    optimizer steps are included.
    """
    splits = dataset.splits
    if len(splits) < num_splits:
        splits = generate_splits(dataset.num_nodes, count=num_splits, seed=seed)
    results = []
    for mode in ("sum", "max"):
        mc = ModelConfig("gcnh", num_layers=1, hidden_size=16, aggregation=mode)
        tc = TrainConfig(epochs=epochs, seed=seed)
        started = time.perf_counter()
        param_count = None
        for split_index in range(num_splits):
            run = train(dataset, splits[split_index], mc, replace(tc, seed=seed + split_index))
            param_count = run.param_count
        results.append(
            {
                "dataset": dataset.name,
                "aggregation": mode,
                "total_train_seconds": time.perf_counter() - started,
                "epochs": epochs,
                "num_splits": num_splits,
                "param_count": param_count,
            }
        )
    if out_dir is not None:
        write_json(Path(out_dir) / "bench.json", {"results": results})
    return results


def mean_epoch_seconds(dataset: Dataset, model_config: ModelConfig, epochs: int = 20, seed: int = 0) -> float:
    """Mean per-epoch wall-clock seconds after a short warmup run."""
    tc = TrainConfig(epochs=epochs, seed=seed)
    train(dataset, dataset.splits[0], model_config, TrainConfig(epochs=2, seed=seed))
    run = train(dataset, dataset.splits[0], model_config, tc)
    return float(np.mean(run.epoch_times_ms)) / 1e3


def run_beta_report(
    pool,
    out_dir=None,
    seed: int = 0,
    num_nodes: int = 1490,
    edges_per_new_node: int = 2,
    num_classes: int = 5,
    replicates: int = 3,
    h_values=DEFAULT_SWEEP_H_VALUES,
    extra_datasets: list[Dataset] | None = None,
    workers: int = 1,
) -> dict:
    """Learned beta of a 1-layer GCNH across the homophily sweep.

    Reports per-(h, replicate) betas plus the Spearman correlation between
    the per-h mean beta and (1 - h); optionally appends rows for extra real
    datasets.
    """
    mc, tc = desk_configs()["gcnh"]
    datasets = _sweep_datasets(pool, num_nodes, edges_per_new_node, num_classes, seed, replicates, h_values)
    rows = []
    for dataset, (h, rep) in zip(datasets, [(h, r) for h in h_values for r in range(replicates)]):
        run = train(dataset, dataset.splits[0], mc, replace(tc, seed=seed + rep))
        rows.append(
            {
                "dataset": dataset.name,
                "target_h": h,
                "replicate": rep,
                "achieved_h": edge_homophily(dataset.graph, dataset.labels).edge_homophily,
                "betas": [float(b) for b in run.betas],
            }
        )
    per_h_beta = [
        float(np.mean([r["betas"][0] for r in rows if r["target_h"] == h])) for h in h_values
    ]
    correlation = float(spearmanr(per_h_beta, [1.0 - h for h in h_values]).statistic)
    for dataset in extra_datasets or []:
        run = train(dataset, dataset.splits[0], mc, tc)
        rows.append(
            {
                "dataset": dataset.name,
                "target_h": "",
                "replicate": 0,
                "achieved_h": edge_homophily(dataset.graph, dataset.labels).edge_homophily,
                "betas": [float(b) for b in run.betas],
            }
        )
    payload = {"rows": rows, "spearman_beta_vs_one_minus_h": correlation}
    if out_dir is not None:
        write_json(Path(out_dir) / "beta_report.json", payload)
    return payload


def homophily_report(dataset: Dataset, out_path=None) -> dict:
    """Edge homophily ratio plus the per-class edge count matrix."""
    report = edge_homophily(dataset.graph, dataset.labels)
    payload = {
        "dataset": dataset.name,
        "edge_homophily": report.edge_homophily,
        "same_label_edges": report.same_label_edges,
        "total_edges": report.total_edges,
        "class_edge_matrix": class_edge_matrix(dataset.graph, dataset.labels).tolist(),
    }
    if out_path is not None:
        write_json(out_path, payload)
    return payload


def generate_sweep_directories(
    pool,
    out_dir,
    seed: int = 0,
    num_nodes: int = 1490,
    edges_per_new_node: int = 2,
    num_classes: int = 5,
    replicates: int = 3,
    h_values=DEFAULT_SWEEP_H_VALUES,
) -> dict:
    """Write one canonical dataset directory per sweep graph; returns a manifest."""
    out_dir = Path(out_dir)
    datasets = _sweep_datasets(pool, num_nodes, edges_per_new_node, num_classes, seed, replicates, h_values)
    entries = []
    for dataset, (h, rep) in zip(datasets, [(h, r) for h in h_values for r in range(replicates)]):
        save_dataset(dataset, out_dir / dataset.name)
        report = edge_homophily(dataset.graph, dataset.labels)
        entries.append(
            {
                "name": dataset.name,
                "target_h": h,
                "replicate": rep,
                "achieved_h": report.edge_homophily,
                "num_nodes": dataset.num_nodes,
                "num_edges": dataset.graph.num_edges,
            }
        )
    manifest = {"datasets": entries}
    write_json(out_dir / "manifest.json", manifest)
    return manifest
