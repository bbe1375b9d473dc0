import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gclreplay.graphs import Graph, buffer_homophily_table
from gclreplay.replay import ReplayBuffer
from gclreplay.structure import (
    CandidateSets,
    add_edges,
    build_candidates,
    delete_edges,
    delta_log_to_csv,
    homophily_boost_edges,
    refine_structure,
)


def line_graph(values, labels, edges):
    feats = np.asarray(values, dtype=float).reshape(-1, 1)
    return Graph(feats, labels, edges)


@pytest.fixture
def small_graph():
    # 6 nodes; node 0 is replayed, labels split 0/1
    return line_graph(
        [0.0, 0.1, 0.2, 5.0, 5.1, 5.2],
        [0, 0, 0, 1, 1, 1],
        [(0, 3), (0, 4), (1, 2), (3, 4), (4, 5)],
    )


@pytest.fixture
def buffer0():
    return ReplayBuffer(4, {0: [0]})


class TestBuildCandidates:
    def test_k_larger_than_graph_returns_everyone_else(self, small_graph, buffer0):
        emb = small_graph.features
        cands = build_candidates(buffer0, emb, small_graph, k=50)
        assert sorted(cands.of(0)) == [1, 2, 3, 4, 5]

    def test_nearest_two(self, buffer0):
        g = line_graph([0.0, 0.1, 0.2, 5.0], [0, 0, 0, 0], [(0, 1)])
        cands = build_candidates(buffer0, g.features, g, k=2)
        assert cands.of(0) == [1, 2]

    def test_distance_ties_break_by_id(self, buffer0):
        g = line_graph([0.0, 1.0, -1.0, 5.0], [0] * 4, [(0, 1)])
        cands = build_candidates(buffer0, g.features, g, k=2)
        assert cands.of(0) == [1, 2]

    def test_excludes_self(self, small_graph, buffer0):
        cands = build_candidates(buffer0, small_graph.features, small_graph, k=3)
        assert 0 not in cands.of(0)

    def test_embedding_row_count_checked(self, small_graph, buffer0):
        with pytest.raises(ValueError, match="every node"):
            build_candidates(buffer0, np.zeros((2, 1)), small_graph, k=2)


class TestAddEdges:
    def test_n_zero_is_identity(self, small_graph, buffer0):
        cands = CandidateSets({0: [1, 2]}, {0: np.array([0.1, 0.2])}, 2)
        out = add_edges(small_graph, buffer0, cands, {0: np.array([0.9, 0.8])}, 0)
        assert out.graph.edges == small_graph.edges
        assert out.added == []

    def test_top_two_by_score(self, small_graph, buffer0):
        cands = CandidateSets({0: [1, 2, 5]}, {}, 3)
        scores = {0: np.array([0.9, 0.7, 0.2])}
        out = add_edges(small_graph, buffer0, cands, scores, 2)
        new = {(e.u, e.v) for e in out.added}
        assert new == {(0, 1), (0, 2)}
        assert (0, 1) in out.graph.edges and (0, 2) in out.graph.edges

    def test_existing_edge_union_is_idempotent(self, small_graph, buffer0):
        # candidate 3 is already a neighbor: no duplicate, no delta entry
        cands = CandidateSets({0: [3, 1]}, {}, 2)
        scores = {0: np.array([0.99, 0.5])}
        out = add_edges(small_graph, buffer0, cands, scores, 2)
        assert {(e.u, e.v) for e in out.added} == {(0, 1)}
        assert out.graph.num_edges == small_graph.num_edges + 1

    def test_score_tie_breaks_to_smaller_candidate_id(self, small_graph, buffer0):
        cands = CandidateSets({0: [5, 1]}, {}, 2)
        scores = {0: np.array([0.8, 0.8])}
        out = add_edges(small_graph, buffer0, cands, scores, 1)
        assert {(e.u, e.v) for e in out.added} == {(0, 1)}

    def test_empty_candidate_list_is_noop(self, small_graph, buffer0):
        out = add_edges(small_graph, buffer0, CandidateSets({}, {}, 2), {}, 3)
        assert out.graph.edges == small_graph.edges


class TestDeleteEdges:
    def test_tau_zero_deletes_nothing(self, small_graph, buffer0):
        scores = {0: {3: 1e-7, 4: 0.9}}   # clamped scores are always > 0
        out = delete_edges(small_graph, buffer0, scores, 0.0)
        assert out.graph.edges == small_graph.edges

    def test_threshold_is_strict(self, small_graph, buffer0):
        scores = {0: {3: 0.9, 4: 0.5}}
        out = delete_edges(small_graph, buffer0, scores, 0.8)
        kept = out.graph.edges
        assert (0, 3) in kept
        assert (0, 4) not in kept
        assert [(e.u, e.v) for e in out.deleted] == [(0, 4)]

    def test_score_equal_to_tau_is_deleted(self, small_graph, buffer0):
        out = delete_edges(small_graph, buffer0, {0: {3: 0.8}}, 0.8)
        assert (0, 3) not in out.graph.edges

    @given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
    def test_monotone_in_tau(self, t1, t2):
        t_lo, t_hi = sorted((t1, t2))
        g = line_graph([0.0, 1.0, 2.0, 3.0], [0] * 4, [(0, 1), (0, 2), (0, 3)])
        buf = ReplayBuffer(2, {0: [0]})
        scores = {0: {1: 0.2, 2: 0.55, 3: 0.9}}
        kept_hi = delete_edges(g, buf, scores, t_hi).graph.edges
        kept_lo = delete_edges(g, buf, scores, t_lo).graph.edges
        assert kept_hi <= kept_lo


class TestRefineStructure:
    def _setup(self):
        g = line_graph(
            [0.0, 0.2, 0.4, 3.0, 3.2, 6.0],
            [0, 0, 0, 1, 1, 1],
            [(0, 5), (0, 3), (1, 2), (3, 4)],
        )
        buf = ReplayBuffer(3, {0: [0]})
        cands = CandidateSets({0: [1, 2]}, {}, 2)
        # z embeddings: nodes 0,1,2 aligned; node 5 opposite
        z = np.array([[1.0, 0.0], [1.0, 0.1], [1.0, -0.1],
                      [0.0, 1.0], [0.1, 1.0], [-1.0, 0.0]])
        return g, buf, cands, z

    def test_additions_then_deletions(self):
        g, buf, cands, z = self._setup()
        out = refine_structure(g, buf, cands, z, n_add=2, tau=0.8,
                               sl_ratio=1.0, rng=np.random.default_rng(0))
        got = {(e.u, e.v) for e in out.added}
        assert got == {(0, 1), (0, 2)}
        # (0,5) has score ~0 -> deleted; (0,3) ~0.5 -> deleted at tau .8
        dropped = {(e.u, e.v) for e in out.deleted}
        assert dropped == {(0, 5), (0, 3)}
        assert (3, 4) in out.graph.edges          # non-buffer edge untouched

    def test_sl_ratio_zero_is_identity(self):
        g, buf, cands, z = self._setup()
        out = refine_structure(g, buf, cands, z, 2, 0.8, 0.0,
                               np.random.default_rng(0))
        assert out.graph.edges == g.edges
        assert not out.added and not out.deleted

    def test_noop_composition(self):
        g, buf, cands, z = self._setup()
        out = refine_structure(g, buf, cands, z, n_add=0, tau=0.0,
                               sl_ratio=1.0, rng=np.random.default_rng(0))
        assert out.graph.edges == g.edges

    def test_degree_growth_bounded_by_n(self):
        g, buf, cands, z = self._setup()
        n_add = 2
        out = refine_structure(g, buf, cands, z, n_add, 0.0, 1.0,
                               np.random.default_rng(0))
        for b in buf.all_nodes():
            before = g.degree(g.local(b))
            after = out.graph.degree(out.graph.local(b))
            assert after <= before + n_add

    def test_non_buffer_edges_untouched(self):
        g, buf, cands, z = self._setup()
        out = refine_structure(g, buf, cands, z, 2, 0.99, 1.0,
                               np.random.default_rng(0))
        replayed_locals = {g.local(b) for b in buf.all_nodes()}
        for e in g.edges | out.graph.edges:
            if not (set(e) & replayed_locals):
                assert (e in g.edges) == (e in out.graph.edges)

    def test_deterministic(self):
        g, buf, cands, z = self._setup()
        a = refine_structure(g, buf, cands, z, 2, 0.8, 0.5,
                             np.random.default_rng(42))
        b = refine_structure(g, buf, cands, z, 2, 0.8, 0.5,
                             np.random.default_rng(42))
        assert a.graph.edges == b.graph.edges

    def test_homophily_strictly_increases_on_fixture(self):
        # all candidates share the replayed node's class, all original
        # neighbors differ from it
        g, buf, cands, z = self._setup()
        before = buffer_homophily_table(g, buf)[0][0]
        out = refine_structure(g, buf, cands, z, n_add=2, tau=0.8,
                               sl_ratio=1.0, rng=np.random.default_rng(1))
        after = buffer_homophily_table(out.graph, buf)[0][0]
        assert after > before


class TestHomophilyBoost:
    def _graph(self):
        g = line_graph([0.0, 1.0, 2.0, 3.0, 4.0], [0, 0, 0, 1, 1],
                       [(0, 3), (0, 4)])
        buf = ReplayBuffer(2, {0: [0]})
        pools = {0: np.array([1, 2])}
        return g, buf, pools

    def test_n_zero_noop(self):
        g, buf, pools = self._graph()
        out = homophily_boost_edges(g, buf, 0, pools, np.random.default_rng(0))
        assert out.graph.edges == g.edges

    def test_homophily_never_decreases(self):
        g, buf, pools = self._graph()
        before = buffer_homophily_table(g, buf)[0][0]
        out = homophily_boost_edges(g, buf, 2, pools, np.random.default_rng(0))
        after = buffer_homophily_table(out.graph, buf)[0][0]
        assert after >= before

    def test_small_pool_adds_everything_available(self):
        g, buf, pools = self._graph()
        out = homophily_boost_edges(g, buf, 99, pools, np.random.default_rng(0))
        assert {(e.u, e.v) for e in out.added} == {(0, 1), (0, 2)}


def test_delta_log_csv_roundtrip(tmp_path, small_graph):
    buf = ReplayBuffer(4, {0: [0]})
    cands = CandidateSets({0: [1, 2]}, {}, 2)
    out = add_edges(small_graph, buf, cands, {0: np.array([0.9, 0.3])}, 1,
                    task=2)
    path = tmp_path / "delta.csv"
    delta_log_to_csv(out.added, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "op,u,v,score,task"
    assert lines[1] == "add,0,1,0.9,2"
