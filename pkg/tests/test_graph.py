import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gcnh import (
    LabelVector,
    build_graph,
    class_edge_matrix,
    degree,
    edge_homophily,
    normalized_adjacency,
)


def triangle():
    return build_graph([(0, 1), (1, 2), (2, 0)], 3)


class TestBuildGraph:
    def test_dedupe_and_self_loop_removal(self):
        g = build_graph([(0, 1), (1, 0), (1, 1)], 2)
        assert g.num_edges == 1
        assert list(g.neighbors(0)) == [1]
        assert list(g.neighbors(1)) == [0]

    def test_empty_edge_list(self):
        g = build_graph([], 3)
        assert g.num_edges == 0
        assert all(degree(g, u) == 0 for u in range(3))

    def test_triangle_degrees(self):
        g = triangle()
        # hand enumeration: every node touches the other two
        assert [sorted(g.neighbors(u)) for u in range(3)] == [[1, 2], [0, 2], [0, 1]]

    def test_index_out_of_range_rejected(self):
        with pytest.raises(ValueError, match="out of range"):
            build_graph([(0, 5)], 3)
        with pytest.raises(ValueError, match="out of range"):
            build_graph([(-1, 0)], 3)

    def test_csr_invariants(self):
        g = build_graph([(3, 1), (0, 2), (2, 0), (1, 3), (4, 0)], 5)
        assert g.csr_offsets[0] == 0
        assert g.csr_offsets[-1] == len(g.csr_neighbors)
        assert np.all(np.diff(g.csr_offsets) >= 0)
        for u in range(5):
            nbrs = g.neighbors(u)
            assert np.all(np.diff(nbrs) > 0)  # sorted, no duplicates
            assert u not in nbrs
            for v in nbrs:
                assert u in g.neighbors(v)

    @given(
        st.lists(st.tuples(st.integers(0, 14), st.integers(0, 14)), max_size=60),
        st.integers(15, 20),
    )
    @settings(max_examples=50, deadline=None)
    def test_round_trip_through_edge_array(self, edges, n):
        g = build_graph(edges, n)
        rebuilt = build_graph(g.edge_array(), n)
        assert np.array_equal(g.csr_offsets, rebuilt.csr_offsets)
        assert np.array_equal(g.csr_neighbors, rebuilt.csr_neighbors)


class TestDegree:
    def test_isolated(self):
        assert degree(build_graph([], 2), 0) == 0

    def test_triangle(self):
        assert degree(triangle(), 1) == 2

    def test_star_center(self):
        k = 7
        g = build_graph([(0, i) for i in range(1, k + 1)], k + 1)
        assert degree(g, 0) == k
        assert all(degree(g, i) == 1 for i in range(1, k + 1))


class TestEdgeHomophily:
    def test_all_same_label(self):
        report = edge_homophily(triangle(), LabelVector([0, 0, 0], 2))
        assert report.edge_homophily == 1.0
        assert (report.same_label_edges, report.total_edges) == (3, 3)

    def test_path_alternating(self):
        g = build_graph([(0, 1), (1, 2)], 3)
        report = edge_homophily(g, LabelVector([0, 1, 0], 2))
        assert report.edge_homophily == 0.0

    def test_empty_edge_set_rejected(self):
        with pytest.raises(ValueError, match="undefined"):
            edge_homophily(build_graph([], 3), LabelVector([0, 1, 0], 2))

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="length"):
            edge_homophily(triangle(), LabelVector([0, 1], 2))

    @given(st.permutations(list(range(8))))
    @settings(max_examples=30, deadline=None)
    def test_permutation_invariance(self, perm):
        rng = np.random.default_rng(0)
        edges = [(int(a), int(b)) for a, b in rng.integers(0, 8, size=(20, 2)) if a != b]
        labels = rng.integers(0, 3, 8)
        perm = np.array(perm)
        base = edge_homophily(build_graph(edges, 8), LabelVector(labels, 3))
        permuted_edges = [(perm[a], perm[b]) for a, b in edges]
        inv = np.empty(8, dtype=int)
        inv[perm] = np.arange(8)
        permuted = edge_homophily(build_graph(permuted_edges, 8), LabelVector(labels[inv], 3))
        assert permuted.edge_homophily == base.edge_homophily

    def test_random_labels_approach_one_over_c(self):
        rng = np.random.default_rng(7)
        n, c = 2000, 5
        edges = rng.integers(0, n, size=(12_000, 2))
        g = build_graph(edges[edges[:, 0] != edges[:, 1]], n)
        assert g.num_edges >= 10_000
        labels = LabelVector(rng.integers(0, c, n), c)
        assert abs(edge_homophily(g, labels).edge_homophily - 1 / c) <= 0.03


class TestClassEdgeMatrix:
    def test_counts_and_symmetry(self):
        g = build_graph([(0, 1), (1, 2)], 3)
        mat = class_edge_matrix(g, LabelVector([0, 1, 0], 2))
        assert mat[0, 1] == 2 and mat[1, 0] == 2
        assert mat[0, 0] == 0 and mat[1, 1] == 0

    def test_total_matches_edge_count(self):
        rng = np.random.default_rng(3)
        edges = rng.integers(0, 30, size=(80, 2))
        g = build_graph(edges[edges[:, 0] != edges[:, 1]], 30)
        labels = LabelVector(rng.integers(0, 4, 30), 4)
        mat = class_edge_matrix(g, labels)
        off_diag = np.triu(mat, k=1).sum()
        assert off_diag + np.trace(mat) == g.num_edges


class TestNormalizedAdjacency:
    def test_isolated_node_self_loop(self):
        op = normalized_adjacency(build_graph([], 1))
        assert op.toarray() == pytest.approx([[1.0]])

    def test_single_edge_all_half(self):
        op = normalized_adjacency(build_graph([(0, 1)], 2))
        assert np.allclose(op.toarray(), 0.5)

    def test_triangle_diagonal(self):
        op = normalized_adjacency(triangle()).toarray()
        assert np.allclose(np.diag(op), 1 / 3)

    def test_symmetric(self):
        rng = np.random.default_rng(11)
        edges = rng.integers(0, 20, size=(50, 2))
        op = normalized_adjacency(build_graph(edges[edges[:, 0] != edges[:, 1]], 20)).toarray()
        assert np.array_equal(op, op.T)

    def test_regular_graph_preserves_constant_vector(self):
        # a cycle is 2-regular: each row of the operator sums to exactly 3 * (1/3)
        n = 12
        g = build_graph([(i, (i + 1) % n) for i in range(n)], n)
        out = normalized_adjacency(g) @ np.ones(n)
        assert np.allclose(out, 1.0, atol=1e-12)
