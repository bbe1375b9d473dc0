import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gclreplay.graphs import (
    Graph,
    buffer_homophily_table,
    homophily_ratio,
    isolated_nodes,
)
from gclreplay.replay import ReplayBuffer


def star(center_label, leaf_labels):
    n = 1 + len(leaf_labels)
    feats = np.zeros((n, 2))
    return Graph(feats, [center_label, *leaf_labels],
                 [(0, i) for i in range(1, n)])


class TestGraphConstruction:
    def test_rejects_self_loops(self):
        with pytest.raises(ValueError, match="self-loop"):
            Graph(np.zeros((2, 1)), [0, 0], [(1, 1)])

    def test_rejects_out_of_range_endpoints(self):
        with pytest.raises(ValueError, match="id space"):
            Graph(np.zeros((2, 1)), [0, 0], [(0, 2)])

    def test_rejects_mismatched_labels(self):
        with pytest.raises(ValueError):
            Graph(np.zeros((3, 1)), [0, 0], [])

    def test_deduplicates_reversed_pairs(self):
        g = Graph(np.zeros((3, 1)), [0, 0, 0], [(0, 1), (1, 0), (2, 1)])
        assert g.num_edges == 2

    def test_arrays_are_readonly(self):
        g = Graph(np.zeros((2, 1)), [0, 1], [(0, 1)])
        with pytest.raises(ValueError):
            g.features[0, 0] = 5.0

    def test_unknown_node_id(self):
        g = Graph(np.zeros((2, 1)), [0, 1], [(0, 1)])
        with pytest.raises(ValueError, match="unknown node id"):
            g.local(17)


class TestHomophily:
    def test_two_of_three_neighbors_same_class(self):
        g = star(1, [1, 1, 0])
        assert homophily_ratio(g, 0) == pytest.approx(2 / 3)

    def test_all_same_class(self):
        g = star(0, [0, 0])
        assert homophily_ratio(g, 0) == 1.0

    def test_isolated_node_sentinel(self):
        g = Graph(np.zeros((3, 1)), [0, 1, 1], [(1, 2)])
        assert homophily_ratio(g, 0) == 1.0
        assert isolated_nodes(g) == 1

    @given(st.permutations(list(range(4))), st.integers(0, 10**6))
    def test_invariant_under_label_permutation(self, perm, seed):
        rng = np.random.default_rng(seed)
        labels = rng.integers(0, 4, size=8)
        edges = {(int(u), int(v)) for u, v in
                 rng.integers(0, 8, size=(12, 2)) if u != v}
        g1 = Graph(np.zeros((8, 1)), labels, edges)
        relabeled = np.array([perm[y] for y in labels])
        g2 = Graph(np.zeros((8, 1)), relabeled, edges)
        for v in range(8):
            assert homophily_ratio(g1, v) == homophily_ratio(g2, v)


class TestBufferHomophilyTable:
    def test_mean_and_population_std(self):
        # node 0: neighbors [1,2] labels [0,1] -> 0.5 ; node 1: neighbor [0] -> 1.0
        g = Graph(np.zeros((3, 1)), [0, 0, 1], [(0, 1), (0, 2)])
        table = buffer_homophily_table(g, {0: [0, 1]})
        mean, std = table[0]
        assert mean == pytest.approx(0.75)
        assert std == pytest.approx(0.25)

    def test_single_node_std_zero(self):
        g = star(0, [0, 1])
        table = buffer_homophily_table(g, {0: [0]})
        assert table[0][1] == 0.0

    def test_empty_bucket_absent(self):
        g = star(0, [0, 1])
        buf = ReplayBuffer(4, {0: [0], 1: []})
        assert 1 not in buffer_homophily_table(g, buf)

    def test_unknown_buffer_node_raises(self):
        g = star(0, [0, 1])
        with pytest.raises(ValueError, match="unknown node id"):
            buffer_homophily_table(g, {0: [99]})
