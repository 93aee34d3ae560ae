"""Immutable sparse graph representation and graph-level statistics.

Graphs are undirected, unweighted, without self-loops, and stored in CSR
form with every edge recorded in both directions. Node indices are dense
integers in ``[0, n)``; loaders are responsible for remapping arbitrary IDs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = [
    "Graph",
    "LabelVector",
    "HomophilyReport",
    "build_graph",
    "degree",
    "edge_homophily",
    "class_edge_matrix",
    "normalized_adjacency",
]


@dataclass(frozen=True)
class Graph:
    """Undirected graph in CSR form.

    ``csr_offsets`` has length ``num_nodes + 1`` and ``csr_neighbors`` has
    length ``2 * num_edges`` (each undirected edge appears in both endpoint
    lists). Neighbor lists are sorted ascending and contain no duplicates or
    self-loops. The arrays are marked read-only; a Graph never changes after
    construction and is safe to share across workers.
    """

    num_nodes: int
    csr_offsets: np.ndarray
    csr_neighbors: np.ndarray

    @property
    def num_edges(self) -> int:
        return len(self.csr_neighbors) // 2

    def neighbors(self, u: int) -> np.ndarray:
        return self.csr_neighbors[self.csr_offsets[u] : self.csr_offsets[u + 1]]

    def degrees(self) -> np.ndarray:
        return np.diff(self.csr_offsets)

    def edge_array(self) -> np.ndarray:
        """All undirected edges once each, as a (num_edges, 2) array with u < v."""
        rows = np.repeat(np.arange(self.num_nodes), self.degrees())
        cols = self.csr_neighbors
        keep = rows < cols
        return np.column_stack([rows[keep], cols[keep]])


@dataclass(frozen=True)
class LabelVector:
    """Integer node labels in ``[0, num_classes)`` with ``num_classes >= 2``."""

    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "labels", labels)
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes}")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise ValueError("labels outside [0, num_classes)")

    def __len__(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class HomophilyReport:
    """Fraction of undirected edges whose endpoints share a label."""

    edge_homophily: float
    same_label_edges: int
    total_edges: int


def build_graph(edge_list, num_nodes: int) -> Graph:
    """Build a Graph from an iterable of (u, v) pairs.

    The input is symmetrized, deduplicated, and self-loops are dropped.
    Raises ValueError if any index falls outside ``[0, num_nodes)``.
    """
    if num_nodes < 0:
        raise ValueError("num_nodes must be nonnegative")
    edges = np.asarray(list(edge_list) if not isinstance(edge_list, np.ndarray) else edge_list, dtype=np.int64)
    if edges.size == 0:
        edges = edges.reshape(0, 2)
    if edges.ndim != 2 or edges.shape[1] != 2:
        raise ValueError("edge_list must be pairs of node indices")
    if edges.size and (edges.min() < 0 or edges.max() >= num_nodes):
        raise ValueError(f"edge index out of range for num_nodes={num_nodes}")

    # symmetrize, drop self-loops, dedupe
    u = np.concatenate([edges[:, 0], edges[:, 1]])
    v = np.concatenate([edges[:, 1], edges[:, 0]])
    keep = u != v
    u, v = u[keep], v[keep]
    if u.size:
        pair_ids = u * num_nodes + v
        pair_ids = np.unique(pair_ids)
        u, v = pair_ids // num_nodes, pair_ids % num_nodes

    order = np.lexsort((v, u))
    u, v = u[order], v[order]
    offsets = np.zeros(num_nodes + 1, dtype=np.int64)
    np.cumsum(np.bincount(u, minlength=num_nodes), out=offsets[1:])
    offsets.flags.writeable = False
    neighbors = np.ascontiguousarray(v)
    neighbors.flags.writeable = False
    return Graph(num_nodes=num_nodes, csr_offsets=offsets, csr_neighbors=neighbors)


def degree(graph: Graph, u: int) -> int:
    """Number of neighbors of node ``u``."""
    if not 0 <= u < graph.num_nodes:
        raise ValueError(f"node {u} out of range")
    return int(graph.csr_offsets[u + 1] - graph.csr_offsets[u])


def edge_homophily(graph: Graph, labels: LabelVector) -> HomophilyReport:
    """Fraction of edges joining same-label endpoints, each edge counted once.

    Raises ValueError on an empty edge set (the ratio is undefined) or when
    the label vector length does not match the graph.
    """
    if len(labels) != graph.num_nodes:
        raise ValueError("label vector length does not match graph")
    if graph.num_edges == 0:
        raise ValueError("edge homophily is undefined on an empty edge set")
    edges = graph.edge_array()
    same = int(np.count_nonzero(labels.labels[edges[:, 0]] == labels.labels[edges[:, 1]]))
    total = graph.num_edges
    return HomophilyReport(edge_homophily=same / total, same_label_edges=same, total_edges=total)


def class_edge_matrix(graph: Graph, labels: LabelVector) -> np.ndarray:
    """Symmetric ``|C| x |C|`` matrix of undirected edge counts by endpoint labels.

    Entry (a, b) counts edges with endpoint labels {a, b}; each edge is
    counted once, so the diagonal holds same-label edge counts.
    """
    if len(labels) != graph.num_nodes:
        raise ValueError("label vector length does not match graph")
    c = labels.num_classes
    mat = np.zeros((c, c), dtype=np.int64)
    edges = graph.edge_array()
    la, lb = labels.labels[edges[:, 0]], labels.labels[edges[:, 1]]
    np.add.at(mat, (np.minimum(la, lb), np.maximum(la, lb)), 1)
    upper = np.triu(mat, k=1)
    return mat + upper.T


def normalized_adjacency(graph: Graph) -> sp.csr_matrix:
    """Symmetrically normalized adjacency with self-loops.

    Entry (u, v) of the returned operator equals ``1/sqrt((d_u+1)(d_v+1))``
    for each edge of A+I, where d is the degree in A. The operator is
    symmetric; isolated nodes get a lone diagonal entry of 1.
    """
    n = graph.num_nodes
    inv_sqrt = 1.0 / np.sqrt(graph.degrees() + 1.0)
    rows = np.repeat(np.arange(n), graph.degrees())
    cols = graph.csr_neighbors
    diag = np.arange(n)
    r = np.concatenate([rows, diag])
    c = np.concatenate([cols, diag])
    data = inv_sqrt[r] * inv_sqrt[c]
    return sp.coo_matrix((data, (r, c)), shape=(n, n)).tocsr()
