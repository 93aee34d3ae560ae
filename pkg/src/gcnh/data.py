"""Dataset container, canonical on-disk format, splits, and synthetic graphs.

Canonical dataset directory layout (UTF-8, LF line endings):

``nodes.tsv``
    one line per node: ``node_id<TAB>label<TAB>v1,v2,...,vf``; feature values
    are 64-bit floats written as their shortest round-trip decimal. Line
    order defines the dense node index.
``edges.tsv``
    one line per edge: ``src<TAB>dst`` using the raw node ids.
``splits.json``
    array of ``{"train": [...], "val": [...], "test": [...]}`` objects whose
    indices refer to the dense (post-remap) node order.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path

import numpy as np

from .graph import Graph, LabelVector, build_graph, normalized_adjacency

__all__ = [
    "DatasetFormatError",
    "MissingFileError",
    "MalformedLineError",
    "LabelRangeError",
    "SplitIndexError",
    "SplitMask",
    "Dataset",
    "SynthConfig",
    "GenerationReport",
    "load_dataset",
    "save_dataset",
    "generate_splits",
    "grow_preferential_graph",
    "generate_synthetic",
    "homophily_sweep_generate",
    "marker_feature_pool",
    "DEFAULT_SWEEP_H_VALUES",
]


class DatasetFormatError(ValueError):
    """Base class for canonical-format violations."""


class MissingFileError(DatasetFormatError):
    pass


class MalformedLineError(DatasetFormatError):
    def __init__(self, path, line_number: int, message: str):
        super().__init__(f"{path}:{line_number}: {message}")
        self.line_number = line_number


class LabelRangeError(DatasetFormatError):
    pass


class SplitIndexError(DatasetFormatError):
    pass


@dataclass(frozen=True)
class SplitMask:
    """Disjoint, nonempty train/val/test index sets over ``[0, n)``."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        for name in ("train", "val", "test"):
            arr = np.asarray(getattr(self, name), dtype=np.int64)
            if arr.size == 0:
                raise ValueError(f"{name} split is empty")
            object.__setattr__(self, name, arr)
        combined = np.concatenate([self.train, self.val, self.test])
        if len(np.unique(combined)) != len(combined):
            raise ValueError("split index sets are not pairwise disjoint")

    def validate_range(self, n: int) -> None:
        for name in ("train", "val", "test"):
            arr = getattr(self, name)
            if arr.min() < 0 or arr.max() >= n:
                raise SplitIndexError(f"{name} split index out of range for n={n}")


@dataclass(eq=False)
class Dataset:
    """A graph with node features, labels, and at least one split."""

    graph: Graph
    features: np.ndarray
    labels: LabelVector
    splits: list[SplitMask]
    name: str

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        n = self.graph.num_nodes
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise ValueError("features must be an (n, f) matrix")
        if self.features.shape[1] < 1:
            raise ValueError("feature width must be >= 1")
        if len(self.labels) != n:
            raise ValueError("label count does not match graph")
        if not self.splits:
            raise ValueError("dataset needs at least one split")
        for split in self.splits:
            split.validate_range(n)

    @property
    def num_nodes(self) -> int:
        return self.graph.num_nodes

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @cached_property
    def adjacency_operator(self):
        """Symmetrically normalized adjacency with self-loops (GCN operator)."""
        return normalized_adjacency(self.graph)


def _read_lines(path: Path) -> list[str]:
    if not path.is_file():
        raise MissingFileError(f"missing required file: {path}")
    return path.read_text(encoding="utf-8").splitlines()


def load_dataset(directory) -> Dataset:
    """Load a canonical dataset directory, remapping node ids to dense indices."""
    directory = Path(directory)
    if not directory.is_dir():
        raise MissingFileError(f"dataset directory not found: {directory}")

    nodes_path = directory / "nodes.tsv"
    id_to_index: dict[str, int] = {}
    labels: list[int] = []
    feature_rows: list[np.ndarray] = []
    width: int | None = None
    for line_no, line in enumerate(_read_lines(nodes_path), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise MalformedLineError(nodes_path, line_no, f"expected 3 tab-separated fields, got {len(parts)}")
        node_id, label_text, feature_text = parts
        if node_id in id_to_index:
            raise MalformedLineError(nodes_path, line_no, f"duplicate node id {node_id!r}")
        try:
            label = int(label_text)
        except ValueError:
            raise MalformedLineError(nodes_path, line_no, f"label is not an integer: {label_text!r}") from None
        if label < 0:
            raise LabelRangeError(f"{nodes_path}:{line_no}: label {label} out of range")
        try:
            row = np.array([float(v) for v in feature_text.split(",")], dtype=np.float64)
        except ValueError:
            raise MalformedLineError(nodes_path, line_no, "unparseable feature value") from None
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise MalformedLineError(nodes_path, line_no, f"expected {width} feature values, got {len(row)}")
        id_to_index[node_id] = len(labels)
        labels.append(label)
        feature_rows.append(row)
    if not labels:
        raise MalformedLineError(nodes_path, 1, "no node lines")

    edges_path = directory / "edges.tsv"
    edges: list[tuple[int, int]] = []
    for line_no, line in enumerate(_read_lines(edges_path), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise MalformedLineError(edges_path, line_no, f"expected 2 tab-separated fields, got {len(parts)}")
        try:
            edges.append((id_to_index[parts[0]], id_to_index[parts[1]]))
        except KeyError as missing:
            raise MalformedLineError(edges_path, line_no, f"unknown node id {missing.args[0]!r}") from None

    splits_path = directory / "splits.json"
    if not splits_path.is_file():
        raise MissingFileError(f"missing required file: {splits_path}")
    try:
        raw_splits = json.loads(splits_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MalformedLineError(splits_path, exc.lineno, exc.msg) from None

    n = len(labels)
    graph = build_graph(edges, n)
    label_vec = LabelVector(np.array(labels), num_classes=max(2, max(labels) + 1))
    split_masks = []
    for entry in raw_splits:
        mask = SplitMask(np.array(entry["train"]), np.array(entry["val"]), np.array(entry["test"]))
        mask.validate_range(n)
        split_masks.append(mask)
    return Dataset(
        graph=graph,
        features=np.vstack(feature_rows),
        labels=label_vec,
        splits=split_masks,
        name=directory.name,
    )


def save_dataset(dataset: Dataset, directory) -> None:
    """Write a dataset in the canonical format; load_dataset round-trips it."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    with open(directory / "nodes.tsv", "w", encoding="utf-8", newline="\n") as fh:
        for i in range(dataset.num_nodes):
            values = ",".join(repr(float(v)) for v in dataset.features[i])
            fh.write(f"{i}\t{dataset.labels.labels[i]}\t{values}\n")

    with open(directory / "edges.tsv", "w", encoding="utf-8", newline="\n") as fh:
        for u, v in dataset.graph.edge_array():
            fh.write(f"{u}\t{v}\n")

    payload = [
        {"train": split.train.tolist(), "val": split.val.tolist(), "test": split.test.tolist()}
        for split in dataset.splits
    ]
    with open(directory / "splits.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def generate_splits(
    n: int,
    ratios: tuple[float, float, float] = (0.48, 0.32, 0.20),
    count: int = 10,
    seed: int = 0,
) -> list[SplitMask]:
    """Random disjoint splits of [0, n): floor(r0*n) train, floor(r1*n) val, rest test."""
    if n < 10:
        raise ValueError(f"need at least 10 nodes to split, got {n}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must sum to 1, got {ratios}")
    if min(ratios) <= 0:
        raise ValueError("all split ratios must be positive")
    rng = np.random.default_rng(seed)
    n_train, n_val = int(ratios[0] * n), int(ratios[1] * n)
    masks = []
    for _ in range(count):
        perm = rng.permutation(n)
        masks.append(
            SplitMask(
                train=perm[:n_train],
                val=perm[n_train : n_train + n_val],
                test=perm[n_train + n_val :],
            )
        )
    return masks


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of the class-compatibility-weighted preferential-attachment generator."""

    num_nodes: int
    edges_per_new_node: int
    target_homophily: float
    num_classes: int
    seed: int
    feature_pool: tuple[np.ndarray, np.ndarray]

    def __post_init__(self):
        if self.edges_per_new_node < 1:
            raise ValueError("edges_per_new_node must be >= 1")
        if not 0.0 <= self.target_homophily <= 1.0:
            raise ValueError("target_homophily must lie in [0, 1]")
        pool_features, pool_labels = self.feature_pool
        distinct = np.unique(np.asarray(pool_labels))
        if len(distinct) != self.num_classes:
            raise ValueError(
                f"num_classes={self.num_classes} does not match {len(distinct)} distinct pool labels"
            )
        if self.num_nodes <= self.num_classes:
            raise ValueError("num_nodes must exceed num_classes (seed clique size)")
        if len(pool_features) != len(np.asarray(pool_labels)):
            raise ValueError("feature pool rows and labels disagree")


@dataclass
class GenerationReport:
    """Degenerate-sampling events observed while growing a synthetic graph."""

    fallback_edges: int = 0
    dropped_edges: int = 0


def grow_preferential_graph(config: SynthConfig, rng: np.random.Generator) -> tuple[list[tuple[int, int]], np.ndarray, GenerationReport]:
    """Grow the edge list and label vector of one synthetic graph.

    Starts from a clique with one node per class, then attaches each new
    node (class drawn uniformly) to ``m`` existing nodes sampled with
    probability proportional to degree(v) * compat(c_u, c_v), where compat is
    ``h`` for same-class pairs and ``(1-h)/(C-1)`` otherwise. When every
    compatibility-weighted candidate is exhausted the edge falls back to
    degree-only sampling; both fallbacks and (never expected in practice)
    dropped edges are tallied in the report.
    """
    n, m, h, c = config.num_nodes, config.edges_per_new_node, config.target_homophily, config.num_classes
    labels = np.zeros(n, dtype=np.int64)
    labels[:c] = np.arange(c)
    labels[c:] = rng.integers(0, c, size=n - c)

    degrees = np.zeros(n, dtype=np.float64)
    degrees[:c] = c - 1
    edges = [(i, j) for i in range(c) for j in range(i + 1, c)]
    report = GenerationReport()

    cross_compat = (1.0 - h) / (c - 1)
    for u in range(c, n):
        compat = np.where(labels[:u] == labels[u], h, cross_compat)
        weights = degrees[:u] * compat
        chosen: set[int] = set()
        for _ in range(min(m, u)):
            w = weights.copy()
            if chosen:
                w[list(chosen)] = 0.0
            total = w.sum()
            if total <= 0.0:
                # no compatibility-weighted candidate left; retry on degree alone
                w = degrees[:u].copy()
                if chosen:
                    w[list(chosen)] = 0.0
                total = w.sum()
                if total <= 0.0:
                    report.dropped_edges += 1
                    continue
                report.fallback_edges += 1
            v = int(rng.choice(u, p=w / total))
            chosen.add(v)
            edges.append((u, v))
            degrees[u] += 1.0
            degrees[v] += 1.0
    return edges, labels, report


def generate_synthetic(config: SynthConfig, name: str | None = None) -> Dataset:
    """Synthetic dataset with prescribed homophily and pool-borrowed features.

    Each node's feature row is copied (with replacement across nodes) from a
    uniformly chosen feature-pool row of the same class. One 50/20/30 split
    is attached.
    """
    rng = np.random.default_rng(config.seed)
    edges, labels, _report = grow_preferential_graph(config, rng)
    graph = build_graph(edges, config.num_nodes)

    pool_features = np.asarray(config.feature_pool[0], dtype=np.float64)
    pool_labels = np.asarray(config.feature_pool[1])
    features = np.empty((config.num_nodes, pool_features.shape[1]))
    for cls in range(config.num_classes):
        members = np.flatnonzero(labels == cls)
        donors = np.flatnonzero(pool_labels == cls)
        features[members] = pool_features[rng.choice(donors, size=len(members), replace=True)]

    splits = generate_splits(config.num_nodes, ratios=(0.50, 0.20, 0.30), count=1, seed=config.seed)
    if name is None:
        name = f"syn_h{config.target_homophily:.2f}_s{config.seed}"
    return Dataset(
        graph=graph,
        features=features,
        labels=LabelVector(labels, num_classes=config.num_classes),
        splits=splits,
        name=name,
    )


DEFAULT_SWEEP_H_VALUES = tuple(i / 10 for i in range(11))


def homophily_sweep_generate(
    base_config: SynthConfig,
    h_values=DEFAULT_SWEEP_H_VALUES,
    graphs_per_h: int = 3,
    seed: int = 0,
) -> list[Dataset]:
    """One dataset per (target homophily, replicate), names encoding both."""
    datasets = []
    for h_idx, h in enumerate(h_values):
        for rep in range(graphs_per_h):
            sub_seed = int(np.random.SeedSequence((seed, h_idx, rep)).generate_state(1)[0])
            config = replace(base_config, target_homophily=float(h), seed=sub_seed)
            datasets.append(generate_synthetic(config, name=f"syn_h{h:.1f}_r{rep}"))
    return datasets


def marker_feature_pool(
    num_classes: int,
    feature_dim: int,
    rows_per_class: int,
    marker_prob: float = 0.35,
    background_prob: float = 0.06,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Class-conditional binary bag-of-words style feature pool.

    Each class owns a contiguous block of ``feature_dim // num_classes``
    marker dimensions sampled at ``marker_prob``; all other dimensions fire
    at ``background_prob``. Serves as a stand-in donor pool when no real
    feature source is available.
    """
    if feature_dim < num_classes:
        raise ValueError("feature_dim must be at least num_classes")
    rng = np.random.default_rng(seed)
    block = feature_dim // num_classes
    features = (rng.random((num_classes * rows_per_class, feature_dim)) < background_prob).astype(np.float64)
    labels = np.repeat(np.arange(num_classes), rows_per_class)
    for cls in range(num_classes):
        rows = slice(cls * rows_per_class, (cls + 1) * rows_per_class)
        cols = slice(cls * block, (cls + 1) * block)
        features[rows, cols] = (rng.random((rows_per_class, block)) < marker_prob).astype(np.float64)
    return features, labels
