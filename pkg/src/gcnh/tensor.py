"""Reverse-mode differentiation over dense float64 matrices.

Every value is a 2-D ``Tensor``; scalars are 1x1. Operations are free
functions that take an optional ``Tape`` as their first argument: passing a
tape records the op for the backward pass, passing ``None`` runs a plain
forward computation (used at evaluation time and by the finite-difference
checker). No global state: random masks come from explicitly supplied
generators.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .graph import Graph, LabelVector

__all__ = [
    "Tensor",
    "Tape",
    "AggregationMode",
    "matmul",
    "add_row_bias",
    "leaky_relu",
    "sigmoid_scalar",
    "dropout",
    "convex_mix",
    "spmm",
    "neighbor_aggregate",
    "softmax_nll",
]


class Tensor:
    """Dense float64 matrix, optionally tracked for gradients.

    ``grad`` is populated by ``Tape.backward`` and has the same shape as
    ``values``. Tensors created by ops inherit ``requires_grad`` from their
    inputs.
    """

    __slots__ = ("values", "requires_grad", "grad")

    def __init__(self, values, requires_grad: bool = False):
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise ValueError(f"tensors are 2-D, got shape {arr.shape}")
        self.values = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def item(self) -> float:
        if self.values.size != 1:
            raise ValueError("item() requires a 1x1 tensor")
        return float(self.values[0, 0])

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


@dataclass
class _Record:
    output: Tensor
    inputs: tuple[Tensor, ...]
    backward: Callable[[np.ndarray], None]


class Tape:
    """Ordered record of primitive ops; backward runs in exact reverse order."""

    def __init__(self):
        self._records: list[_Record] = []

    def __len__(self) -> int:
        return len(self._records)

    def record(self, output: Tensor, inputs: Sequence[Tensor], backward: Callable[[np.ndarray], None]) -> None:
        self._records.append(_Record(output, tuple(inputs), backward))

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/d(tensor) into ``.grad`` of every tracked tensor.

        ``loss`` must be a 1x1 tensor produced on this tape. Gradients are
        freshly zeroed for all participating tensors before accumulation, so
        one tape corresponds to exactly one forward/backward cycle.
        """
        if loss.values.shape != (1, 1):
            raise ValueError("backward requires a scalar (1x1) loss tensor")
        if not loss.requires_grad:
            raise ValueError("loss does not depend on any tracked tensor")
        seen: set[int] = set()
        for rec in self._records:
            for t in (rec.output, *rec.inputs):
                if t.requires_grad and id(t) not in seen:
                    seen.add(id(t))
                    t.grad = np.zeros_like(t.values)
        if id(loss) not in seen:
            raise ValueError("loss tensor was not produced on this tape")
        loss.grad = np.ones_like(loss.values)
        for rec in reversed(self._records):
            g = rec.output.grad
            if g is not None:
                rec.backward(g)


class AggregationMode(Enum):
    """Permutation-invariant reduction over a node's neighbor rows."""

    SUM = "sum"
    MEAN = "mean"
    MAX = "max"

    @classmethod
    def parse(cls, value: "AggregationMode | str") -> "AggregationMode":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


def _track(tape: Tape | None, out: Tensor, inputs: Sequence[Tensor], backward) -> Tensor:
    if tape is not None and out.requires_grad:
        tape.record(out, inputs, backward)
    return out


def matmul(tape: Tape | None, a: Tensor, b: Tensor) -> Tensor:
    """Matrix product ``a @ b``."""
    if a.cols != b.rows:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    out = Tensor(a.values @ b.values, requires_grad=a.requires_grad or b.requires_grad)

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a.grad += g @ b.values.T
        if b.requires_grad:
            b.grad += a.values.T @ g

    return _track(tape, out, (a, b), backward)


def add_row_bias(tape: Tape | None, x: Tensor, b: Tensor) -> Tensor:
    """Broadcast-add a 1 x d bias row to every row of ``x``."""
    if b.rows != 1 or b.cols != x.cols:
        raise ValueError(f"bias shape {b.shape} incompatible with {x.shape}")
    out = Tensor(x.values + b.values, requires_grad=x.requires_grad or b.requires_grad)

    def backward(g: np.ndarray) -> None:
        if x.requires_grad:
            x.grad += g
        if b.requires_grad:
            b.grad += g.sum(axis=0, keepdims=True)

    return _track(tape, out, (x, b), backward)


def leaky_relu(tape: Tape | None, x: Tensor, slope: float = 0.01) -> Tensor:
    """Elementwise ``max(x, slope * x)`` with ``slope >= 0``."""
    if slope < 0:
        raise ValueError("slope must be nonnegative")
    positive = x.values > 0
    out = Tensor(np.where(positive, x.values, slope * x.values), requires_grad=x.requires_grad)

    def backward(g: np.ndarray) -> None:
        x.grad += g * np.where(positive, 1.0, slope)

    return _track(tape, out, (x,), backward)


def sigmoid_scalar(tape: Tape | None, raw: Tensor) -> Tensor:
    """Logistic sigmoid of a 1x1 tensor."""
    if raw.values.shape != (1, 1):
        raise ValueError("sigmoid_scalar expects a 1x1 tensor")
    s = 1.0 / (1.0 + np.exp(-raw.values))
    out = Tensor(s, requires_grad=raw.requires_grad)

    def backward(g: np.ndarray) -> None:
        raw.grad += g * s * (1.0 - s)

    return _track(tape, out, (raw,), backward)


def dropout(tape: Tape | None, x: Tensor, rate: float, training: bool, rng: np.random.Generator | None) -> Tensor:
    """Zero entries with probability ``rate`` and rescale survivors by 1/(1-rate).

    Identity at evaluation time or when ``rate`` is 0. The backward pass
    routes gradients through the same mask.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("training-mode dropout requires a random generator")
    scale = 1.0 / (1.0 - rate)
    mask = (rng.random(x.shape) >= rate) * scale
    out = Tensor(x.values * mask, requires_grad=x.requires_grad)

    def backward(g: np.ndarray) -> None:
        x.grad += g * mask

    return _track(tape, out, (x,), backward)


def convex_mix(tape: Tape | None, beta: Tensor | float, z_self: Tensor, z_neighbors: Tensor) -> Tensor:
    """Per-row blend ``beta * z_self + (1 - beta) * z_neighbors``.

    ``beta`` is either a trainable 1x1 tensor or a plain float constant.
    """
    if z_self.shape != z_neighbors.shape:
        raise ValueError(f"mix shape mismatch: {z_self.shape} vs {z_neighbors.shape}")
    if isinstance(beta, Tensor):
        if beta.values.shape != (1, 1):
            raise ValueError("beta must be a 1x1 tensor")
        b = beta.values[0, 0]
        inputs: tuple[Tensor, ...] = (beta, z_self, z_neighbors)
        beta_tracked = beta.requires_grad
    else:
        b = float(beta)
        inputs = (z_self, z_neighbors)
        beta_tracked = False
    out = Tensor(
        b * z_self.values + (1.0 - b) * z_neighbors.values,
        requires_grad=beta_tracked or z_self.requires_grad or z_neighbors.requires_grad,
    )

    def backward(g: np.ndarray) -> None:
        if z_self.requires_grad:
            z_self.grad += b * g
        if z_neighbors.requires_grad:
            z_neighbors.grad += (1.0 - b) * g
        if beta_tracked:
            beta.grad += np.sum(g * (z_self.values - z_neighbors.values))

    return _track(tape, out, inputs, backward)


def spmm(tape: Tape | None, operator: sp.spmatrix, x: Tensor) -> Tensor:
    """Multiply a constant symmetric sparse operator into ``x``.

    The operator carries no gradient; symmetry is assumed by the backward
    pass (true for the normalized adjacency this engine builds).
    """
    if operator.shape[1] != x.rows:
        raise ValueError(f"operator shape {operator.shape} incompatible with {x.shape}")
    out = Tensor(operator @ x.values, requires_grad=x.requires_grad)

    def backward(g: np.ndarray) -> None:
        x.grad += operator @ g

    return _track(tape, out, (x,), backward)


def _binary_adjacency(graph: Graph) -> sp.csr_matrix:
    return sp.csr_matrix(
        (np.ones(len(graph.csr_neighbors)), graph.csr_neighbors, graph.csr_offsets),
        shape=(graph.num_nodes, graph.num_nodes),
    )


def neighbor_aggregate(tape: Tape | None, graph: Graph, x: Tensor, mode: AggregationMode) -> Tensor:
    """Reduce each node's neighbor rows of ``x`` (the node itself excluded).

    Isolated nodes produce a zero row in every mode and receive no gradient
    through this op. MAX routes each coordinate's gradient to a single
    argmax neighbor, ties broken toward the lowest neighbor index.
    """
    mode = AggregationMode.parse(mode)
    if x.rows != graph.num_nodes:
        raise ValueError(f"feature rows {x.rows} != num_nodes {graph.num_nodes}")

    if mode is AggregationMode.MAX:
        return _neighbor_max(tape, graph, x)

    adj = _binary_adjacency(graph)
    summed = adj @ x.values
    if mode is AggregationMode.SUM:
        out = Tensor(summed, requires_grad=x.requires_grad)

        def backward(g: np.ndarray) -> None:
            x.grad += adj @ g

        return _track(tape, out, (x,), backward)

    deg = graph.degrees().astype(np.float64)
    inv_deg = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)[:, None]
    out = Tensor(summed * inv_deg, requires_grad=x.requires_grad)

    def backward(g: np.ndarray) -> None:
        x.grad += adj @ (g * inv_deg)

    return _track(tape, out, (x,), backward)


def _neighbor_max(tape: Tape | None, graph: Graph, x: Tensor) -> Tensor:
    n, d = x.shape
    values = np.zeros((n, d))
    # source[u, j] = neighbor whose row wins coordinate j; -1 marks isolated rows
    source = np.full((n, d), -1, dtype=np.int64)
    offsets, nbrs = graph.csr_offsets, graph.csr_neighbors
    for u in range(n):
        lo, hi = offsets[u], offsets[u + 1]
        if lo == hi:
            continue
        block = x.values[nbrs[lo:hi]]
        # argmax takes the first maximum; neighbor lists are sorted ascending,
        # so ties resolve to the lowest neighbor index
        win = block.argmax(axis=0)
        values[u] = block[win, np.arange(d)]
        source[u] = nbrs[lo:hi][win]
    out = Tensor(values, requires_grad=x.requires_grad)

    def backward(g: np.ndarray) -> None:
        rows, cols = np.nonzero(source >= 0)
        np.add.at(x.grad, (source[rows, cols], cols), g[rows, cols])

    return _track(tape, out, (x,), backward)


def softmax_nll(tape: Tape | None, logits: Tensor, labels: LabelVector, mask) -> Tensor:
    """Mean negative log-likelihood of the true classes over ``mask`` rows.

    Row-max subtraction keeps the softmax numerically stable. Only the rows
    listed in ``mask`` are read, so held-out labels stay untouched.
    """
    mask = np.asarray(mask, dtype=np.int64)
    if mask.size == 0:
        raise ValueError("softmax_nll requires a nonempty mask")
    if logits.cols != labels.num_classes:
        raise ValueError(f"logit width {logits.cols} != num_classes {labels.num_classes}")
    rows = logits.values[mask]
    shifted = rows - rows.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    total = exp.sum(axis=1, keepdims=True)
    log_probs = shifted - np.log(total)
    picked = labels.labels[mask]
    loss = -log_probs[np.arange(mask.size), picked].mean()
    out = Tensor([[loss]], requires_grad=logits.requires_grad)

    def backward(g: np.ndarray) -> None:
        grad_rows = exp / total
        grad_rows[np.arange(mask.size), picked] -= 1.0
        grad_rows *= g[0, 0] / mask.size
        np.add.at(logits.grad, mask, grad_rows)

    return _track(tape, out, (logits,), backward)
