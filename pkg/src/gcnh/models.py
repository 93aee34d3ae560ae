"""Model definitions: GCNH, GCN baseline, and MLP baseline.

A GCNH layer encodes the center node and its neighborhood through two
separate single-layer MLPs, reduces the neighbor embeddings with a
permutation-invariant aggregation, and blends the two representations with a
learned per-layer coefficient ``beta`` in (0, 1). A linear classifier maps
the final embeddings to class logits.

Dropout masks are drawn from generators keyed by (mask_key, layer, branch)
rather than from one sequential stream. The self-encoder branch of every
architecture uses branch 0, so an MLP and a GCNH model sharing a mask key
see identical masks on their shared path regardless of how many extra draws
the other branches make.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .graph import Graph
from .tensor import (
    AggregationMode,
    Tape,
    Tensor,
    add_row_bias,
    convex_mix,
    dropout,
    leaky_relu,
    matmul,
    neighbor_aggregate,
    sigmoid_scalar,
    spmm,
)

__all__ = [
    "ARCHITECTURES",
    "LEAKY_RELU_SLOPE",
    "ModelConfig",
    "GCNHLayerParams",
    "DenseLayerParams",
    "ClassifierParams",
    "Model",
    "PredictionOutput",
    "init_model",
    "gcnh_layer_forward",
    "gcn_layer_forward",
    "dense_layer_forward",
    "forward",
    "predict",
    "extract_betas",
    "count_params",
    "save_checkpoint",
    "load_checkpoint",
]

ARCHITECTURES = ("gcnh", "gcn", "mlp")

# negative slope of the LeakyReLU activation used by every layer
LEAKY_RELU_SLOPE = 0.01

CHECKPOINT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    architecture: str
    num_layers: int = 1
    hidden_size: int = 16
    dropout_rate: float = 0.0
    aggregation: AggregationMode = AggregationMode.SUM
    beta_trainable: bool = True
    beta_fixed_value: float | None = None
    share_mlps: bool = False

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.architecture!r}")
        if self.num_layers < 1:
            raise ValueError("num_layers must be >= 1")
        if self.hidden_size < 1:
            raise ValueError("hidden_size must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        object.__setattr__(self, "aggregation", AggregationMode.parse(self.aggregation))
        if self.beta_fixed_value is not None and self.beta_trainable:
            raise ValueError("beta_fixed_value requires beta_trainable=False")

    def to_dict(self) -> dict:
        return {
            "architecture": self.architecture,
            "num_layers": self.num_layers,
            "hidden_size": self.hidden_size,
            "dropout_rate": self.dropout_rate,
            "aggregation": self.aggregation.value,
            "beta_trainable": self.beta_trainable,
            "beta_fixed_value": self.beta_fixed_value,
            "share_mlps": self.share_mlps,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ModelConfig":
        return cls(**payload)


@dataclass
class GCNHLayerParams:
    """Weights of one GCNH layer; W2/b2 alias W1/b1 when the MLPs are shared."""

    W1: Tensor
    b1: Tensor
    W2: Tensor
    b2: Tensor
    raw_beta: Tensor
    beta_trainable: bool


@dataclass
class DenseLayerParams:
    W: Tensor
    b: Tensor


@dataclass
class ClassifierParams:
    W_cl: Tensor
    b_cl: Tensor


@dataclass
class Model:
    config: ModelConfig
    input_dim: int
    num_classes: int
    layers: list
    classifier: ClassifierParams

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        """All parameter tensors with stable names; shared tensors listed once."""
        out: list[tuple[str, Tensor]] = []
        for i, layer in enumerate(self.layers):
            if isinstance(layer, GCNHLayerParams):
                out.append((f"layer{i}.W1", layer.W1))
                out.append((f"layer{i}.b1", layer.b1))
                if layer.W2 is not layer.W1:
                    out.append((f"layer{i}.W2", layer.W2))
                    out.append((f"layer{i}.b2", layer.b2))
                out.append((f"layer{i}.raw_beta", layer.raw_beta))
            else:
                out.append((f"layer{i}.W", layer.W))
                out.append((f"layer{i}.b", layer.b))
        out.append(("classifier.W_cl", self.classifier.W_cl))
        out.append(("classifier.b_cl", self.classifier.b_cl))
        return out

    def parameters(self, trainable_only: bool = True) -> list[Tensor]:
        params = [t for _, t in self.named_parameters()]
        if trainable_only:
            params = [t for t in params if t.requires_grad]
        return params

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: t.values.copy() for name, t in self.named_parameters()}

    def restore(self, snapshot: dict[str, np.ndarray]) -> None:
        for name, t in self.named_parameters():
            t.values[...] = snapshot[name]


@dataclass
class PredictionOutput:
    """Row-normalized class probabilities and argmax classes (ties -> lowest)."""

    class_probs: np.ndarray
    predicted: np.ndarray


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_model(config: ModelConfig, input_dim: int, num_classes: int, rng: np.random.Generator) -> Model:
    """Glorot-uniform weights, zero biases, raw_beta = 0 (so beta starts at 0.5)."""
    if input_dim < 1 or num_classes < 2:
        raise ValueError("input_dim must be >= 1 and num_classes >= 2")
    dims = [input_dim] + [config.hidden_size] * config.num_layers
    layers: list = []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        if config.architecture == "gcnh":
            W1 = Tensor(_glorot(rng, d_in, d_out), requires_grad=True)
            b1 = Tensor(np.zeros((1, d_out)), requires_grad=True)
            if config.share_mlps:
                W2, b2 = W1, b1
            else:
                W2 = Tensor(_glorot(rng, d_in, d_out), requires_grad=True)
                b2 = Tensor(np.zeros((1, d_out)), requires_grad=True)
            raw_beta = Tensor(np.zeros((1, 1)), requires_grad=config.beta_trainable)
            layers.append(GCNHLayerParams(W1, b1, W2, b2, raw_beta, config.beta_trainable))
        else:
            W = Tensor(_glorot(rng, d_in, d_out), requires_grad=True)
            b = Tensor(np.zeros((1, d_out)), requires_grad=True)
            layers.append(DenseLayerParams(W, b))
    classifier = ClassifierParams(
        W_cl=Tensor(_glorot(rng, dims[-1], num_classes), requires_grad=True),
        b_cl=Tensor(np.zeros((1, num_classes)), requires_grad=True),
    )
    return Model(config=config, input_dim=input_dim, num_classes=num_classes, layers=layers, classifier=classifier)


def _mask_rng(mask_key, layer: int, branch: int) -> np.random.Generator:
    key = tuple(int(k) for k in mask_key) + (layer, branch)
    return np.random.default_rng(np.random.SeedSequence(key))


def _encode(tape, H, W, b, rate, training, rng):
    x = dropout(tape, H, rate, training, rng)
    return leaky_relu(tape, add_row_bias(tape, matmul(tape, x, W), b), LEAKY_RELU_SLOPE)


def gcnh_layer_forward(
    tape: Tape | None,
    H: Tensor,
    graph: Graph,
    params: GCNHLayerParams,
    mode: AggregationMode,
    dropout_rate: float = 0.0,
    training: bool = False,
    rng_self: np.random.Generator | None = None,
    rng_neighbors: np.random.Generator | None = None,
    beta_fixed: float | None = None,
) -> Tensor:
    """One GCNH layer: blend separately encoded center node and neighborhood.

    Both branches apply dropout to the layer input independently, encode it
    with their own MLP, and the neighbor branch is then reduced over each
    node's neighborhood. The blend coefficient is sigmoid(raw_beta), or the
    fixed constant when the layer's beta is frozen.
    """
    if H.rows != graph.num_nodes:
        raise ValueError(f"input rows {H.rows} != num_nodes {graph.num_nodes}")
    z_self = _encode(tape, H, params.W1, params.b1, dropout_rate, training, rng_self)
    encoded = _encode(tape, H, params.W2, params.b2, dropout_rate, training, rng_neighbors)
    z_neigh = neighbor_aggregate(tape, graph, encoded, mode)
    beta = beta_fixed if beta_fixed is not None else sigmoid_scalar(tape, params.raw_beta)
    return convex_mix(tape, beta, z_self, z_neigh)


def gcn_layer_forward(
    tape: Tape | None,
    H: Tensor,
    adjacency,
    params: DenseLayerParams,
    dropout_rate: float = 0.0,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Standard GCN layer: sigma(A_hat . dropout(H) . W + b)."""
    x = dropout(tape, H, dropout_rate, training, rng)
    z = add_row_bias(tape, spmm(tape, adjacency, matmul(tape, x, params.W)), params.b)
    return leaky_relu(tape, z, LEAKY_RELU_SLOPE)


def dense_layer_forward(
    tape: Tape | None,
    H: Tensor,
    params: DenseLayerParams,
    dropout_rate: float = 0.0,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """MLP layer: sigma(dropout(H) . W + b); the graph plays no role."""
    return _encode(tape, H, params.W, params.b, dropout_rate, training, rng)


def forward(model: Model, dataset, training: bool = False, tape: Tape | None = None, mask_key=None) -> Tensor:
    """Full-graph forward pass producing one logit row per node.

    ``mask_key`` seeds the per-layer dropout generators and is required when
    training with a nonzero dropout rate; evaluation is deterministic.
    """
    cfg = model.config
    if dataset.features.shape[1] != model.input_dim:
        raise ValueError(f"feature width {dataset.features.shape[1]} != model input_dim {model.input_dim}")
    need_masks = training and cfg.dropout_rate > 0.0
    if need_masks and mask_key is None:
        raise ValueError("training with dropout requires a mask_key")

    H = Tensor(dataset.features)
    adjacency = dataset.adjacency_operator if cfg.architecture == "gcn" else None
    for i, layer in enumerate(model.layers):
        rng0 = _mask_rng(mask_key, i, 0) if need_masks else None
        if cfg.architecture == "gcnh":
            rng1 = _mask_rng(mask_key, i, 1) if need_masks else None
            H = gcnh_layer_forward(
                tape, H, dataset.graph, layer, cfg.aggregation,
                cfg.dropout_rate, training, rng0, rng1, cfg.beta_fixed_value,
            )
        elif cfg.architecture == "gcn":
            H = gcn_layer_forward(tape, H, adjacency, layer, cfg.dropout_rate, training, rng0)
        else:
            H = dense_layer_forward(tape, H, layer, cfg.dropout_rate, training, rng0)
    return add_row_bias(tape, matmul(tape, H, model.classifier.W_cl), model.classifier.b_cl)


def predict(logits: Tensor) -> PredictionOutput:
    """Row-wise softmax and argmax; ties go to the lowest class index."""
    shifted = logits.values - logits.values.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    return PredictionOutput(class_probs=probs, predicted=probs.argmax(axis=1))


def extract_betas(model: Model) -> np.ndarray:
    """Per-layer blend coefficients in layer order (GCNH models only)."""
    if model.config.architecture != "gcnh":
        raise ValueError("betas exist only for GCNH models")
    if model.config.beta_fixed_value is not None:
        return np.full(len(model.layers), model.config.beta_fixed_value)
    raws = np.array([layer.raw_beta.values[0, 0] for layer in model.layers])
    return 1.0 / (1.0 + np.exp(-raws))


def count_params(model: Model) -> int:
    """Total trainable scalar count; shared tensors counted once."""
    return sum(t.values.size for t in model.parameters(trainable_only=True))


def save_checkpoint(model: Model, path, seed: int | None = None) -> None:
    """Write config + parameters to an .npz file; float64 values round-trip bit-exactly."""
    meta = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "config": model.config.to_dict(),
        "input_dim": model.input_dim,
        "num_classes": model.num_classes,
        "seed": seed,
    }
    arrays = {name: t.values for name, t in model.named_parameters()}
    np.savez(path, __meta__=np.str_(json.dumps(meta, sort_keys=True)), **arrays)


def load_checkpoint(path) -> tuple[Model, int | None]:
    """Rebuild a Model from :func:`save_checkpoint` output; returns (model, seed)."""
    with np.load(path) as archive:
        meta = json.loads(str(archive["__meta__"]))
        if meta["format_version"] != CHECKPOINT_FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta['format_version']}")
        config = ModelConfig.from_dict(meta["config"])
        model = init_model(config, meta["input_dim"], meta["num_classes"], np.random.default_rng(0))
        model.restore({name: archive[name] for name, _ in model.named_parameters()})
    return model, meta["seed"]
