"""Transductive training loop, split protocol, and hyperparameter search.

Training forwards the complete graph for every batch and masks the loss to
the batch's nodes. Model selection within a run keeps the parameters from
the epoch with the best validation accuracy (earliest epoch on ties). All
randomness derives from the run seed through separate streams for
initialization, batch shuffling, and dropout masks, so results are
bit-reproducible and structurally aligned across architectures.
"""
from __future__ import annotations

import itertools
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset, SplitMask
from .models import Model, ModelConfig, count_params, extract_betas, forward, init_model, predict
from .optim import Adam
from .tensor import Tape, softmax_nll

__all__ = [
    "FULL_BATCH",
    "NonFiniteLossError",
    "TrainConfig",
    "RunResult",
    "ProtocolResult",
    "HyperGrid",
    "GridSearchResult",
    "train",
    "evaluate",
    "run_protocol",
    "grid_search",
]

FULL_BATCH = "full"

# sub-stream tags hung off the run seed
_INIT_STREAM, _SHUFFLE_STREAM, _DROPOUT_STREAM = 0, 1, 2


class NonFiniteLossError(RuntimeError):
    """Raised when a training loss leaves the finite range."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 5e-3
    weight_decay: float = 5e-3
    epochs: int = 100
    batch_size: int | str = FULL_BATCH
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size != FULL_BATCH and (not isinstance(self.batch_size, int) or self.batch_size < 1):
            raise ValueError(f"batch_size must be a positive int or {FULL_BATCH!r}")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "weight_decay": self.weight_decay,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "seed": self.seed,
        }


@dataclass
class RunResult:
    """Outcome of one training run on one split."""

    test_accuracy: float
    best_val_accuracy: float
    betas: np.ndarray
    epoch_times_ms: np.ndarray
    param_count: int
    history: list[tuple[float, float]]
    model: Model

    def to_dict(self) -> dict:
        """JSON payload; the live model is carried separately as a checkpoint."""
        return {
            "test_accuracy": self.test_accuracy,
            "best_val_accuracy": self.best_val_accuracy,
            "betas": [float(b) for b in self.betas],
            "epoch_times_ms": [float(t) for t in self.epoch_times_ms],
            "param_count": self.param_count,
            "history": [{"train_loss": l, "val_accuracy": a} for l, a in self.history],
        }


def _stream(seed: int, tag: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, tag)))


def _batches(indices: np.ndarray, batch_size) -> list[np.ndarray]:
    if batch_size == FULL_BATCH or batch_size >= len(indices):
        return [indices]
    return [indices[i : i + batch_size] for i in range(0, len(indices), batch_size)]


def train(
    dataset: Dataset,
    split: SplitMask,
    model_config: ModelConfig,
    train_config: TrainConfig,
    model: Model | None = None,
) -> RunResult:
    """Train on one split; returns the best-validation-epoch model and metrics.

    An explicit ``model`` skips initialization (used by tests that share
    parameters across architectures); otherwise weights are drawn from the
    run seed's init stream.
    """
    seed = train_config.seed
    if model is None:
        model = init_model(
            model_config, dataset.feature_dim, dataset.labels.num_classes, _stream(seed, _INIT_STREAM)
        )
    shuffle_rng = _stream(seed, _SHUFFLE_STREAM)
    optimizer = Adam(model.parameters(), train_config.learning_rate, train_config.weight_decay)

    best_val = -1.0
    best_snapshot = model.snapshot()
    history: list[tuple[float, float]] = []
    epoch_times: list[float] = []

    for epoch in range(train_config.epochs):
        started = time.perf_counter()
        order = shuffle_rng.permutation(len(split.train))
        loss_total = 0.0
        for batch_index, batch in enumerate(_batches(split.train[order], train_config.batch_size)):
            tape = Tape()
            mask_key = (seed, _DROPOUT_STREAM, epoch, batch_index)
            logits = forward(model, dataset, training=True, tape=tape, mask_key=mask_key)
            loss = softmax_nll(tape, logits, dataset.labels, batch)
            loss_value = loss.item()
            if not np.isfinite(loss_value):
                raise NonFiniteLossError(
                    f"non-finite loss {loss_value} at epoch {epoch}, batch {batch_index}"
                )
            tape.backward(loss)
            optimizer.step()
            loss_total += loss_value * len(batch)
        epoch_loss = loss_total / len(split.train)
        val_accuracy = evaluate(model, dataset, split.val)
        history.append((epoch_loss, val_accuracy))
        epoch_times.append((time.perf_counter() - started) * 1e3)
        if val_accuracy > best_val:
            best_val = val_accuracy
            best_snapshot = model.snapshot()

    model.restore(best_snapshot)
    betas = extract_betas(model) if model_config.architecture == "gcnh" else np.empty(0)
    return RunResult(
        test_accuracy=evaluate(model, dataset, split.test),
        best_val_accuracy=best_val,
        betas=betas,
        epoch_times_ms=np.array(epoch_times),
        param_count=count_params(model),
        history=history,
        model=model,
    )


def evaluate(model: Model, dataset: Dataset, mask) -> float:
    """Fraction of ``mask`` nodes assigned their true class (evaluation mode)."""
    mask = np.asarray(mask, dtype=np.int64)
    if mask.size == 0:
        raise ValueError("evaluate requires a nonempty mask")
    logits = forward(model, dataset, training=False)
    predicted = predict(logits).predicted
    return float(np.mean(predicted[mask] == dataset.labels.labels[mask]))


@dataclass
class ProtocolResult:
    mean_test_accuracy: float
    std_test_accuracy: float
    runs: list[RunResult]

    @property
    def mean_val_accuracy(self) -> float:
        return float(np.mean([r.best_val_accuracy for r in self.runs]))


def _protocol_task(args):
    dataset, model_config, train_config, split_index = args
    split_config = replace(train_config, seed=train_config.seed + split_index)
    return train(dataset, dataset.splits[split_index], model_config, split_config)


def run_protocol(
    dataset: Dataset,
    model_config: ModelConfig,
    train_config: TrainConfig,
    workers: int = 1,
) -> ProtocolResult:
    """Train once per stored split (seed + split_index each) and aggregate."""
    tasks = [(dataset, model_config, train_config, i) for i in range(len(dataset.splits))]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_protocol_task, tasks))
    else:
        runs = [_protocol_task(t) for t in tasks]
    accuracies = np.array([r.test_accuracy for r in runs])
    std = float(np.std(accuracies, ddof=1)) if len(runs) > 1 else 0.0
    return ProtocolResult(
        mean_test_accuracy=float(accuracies.mean()),
        std_test_accuracy=std,
        runs=runs,
    )


@dataclass
class HyperGrid:
    """Base configs plus per-field candidate lists forming a Cartesian product."""

    base_model: ModelConfig
    base_train: TrainConfig
    model_axes: dict[str, list] = field(default_factory=dict)
    train_axes: dict[str, list] = field(default_factory=dict)

    def __post_init__(self):
        for axes in (self.model_axes, self.train_axes):
            for name, values in axes.items():
                if not values:
                    raise ValueError(f"empty candidate list for {name!r}")

    def expand(self) -> list[tuple[ModelConfig, TrainConfig]]:
        """All configurations in deterministic grid order."""
        model_fields = list(self.model_axes)
        train_fields = list(self.train_axes)
        combos = itertools.product(
            *(self.model_axes[f] for f in model_fields),
            *(self.train_axes[f] for f in train_fields),
        )
        out = []
        for values in combos:
            model_over = dict(zip(model_fields, values[: len(model_fields)]))
            train_over = dict(zip(train_fields, values[len(model_fields) :]))
            out.append((replace(self.base_model, **model_over), replace(self.base_train, **train_over)))
        return out


@dataclass
class GridSearchResult:
    best_model_config: ModelConfig
    best_train_config: TrainConfig
    best_mean_val_accuracy: float
    test_mean: float
    test_std: float
    table: list[dict]


def grid_search(dataset: Dataset, grid: HyperGrid, workers: int = 1) -> GridSearchResult:
    """Evaluate every grid configuration under the split protocol.

    Selection: highest mean validation accuracy, ties broken by fewer
    trainable parameters, then by grid order. The reported test mean/std
    come from the selected configuration's runs.
    """
    configs = grid.expand()
    if not configs:
        raise ValueError("empty hyperparameter grid")
    table: list[dict] = []
    scored: list[tuple[float, int, int, ProtocolResult]] = []
    for order, (mc, tc) in enumerate(configs):
        protocol = run_protocol(dataset, mc, tc, workers=workers)
        params = protocol.runs[0].param_count
        scored.append((protocol.mean_val_accuracy, params, order, protocol))
        for split_index, run in enumerate(protocol.runs):
            table.append(
                {
                    "config_index": order,
                    "split_index": split_index,
                    **{f"model.{k}": v for k, v in mc.to_dict().items()},
                    **{f"train.{k}": v for k, v in tc.to_dict().items()},
                    "val_accuracy": run.best_val_accuracy,
                    "test_accuracy": run.test_accuracy,
                    "param_count": run.param_count,
                }
            )
    best = max(scored, key=lambda s: (s[0], -s[1], -s[2]))
    best_mc, best_tc = configs[best[2]]
    return GridSearchResult(
        best_model_config=best_mc,
        best_train_config=best_tc,
        best_mean_val_accuracy=best[0],
        test_mean=best[3].mean_test_accuracy,
        test_std=best[3].std_test_accuracy,
        table=table,
    )
