import numpy as np
import pytest

from gclreplay.graphs import Graph
from gclreplay.streams import SplitSpec, advance_snapshot, build_task_stream


def four_singleton_classes():
    """Nodes 0..3 with classes 0..3, edges (0,2) and (0,1)."""
    return Graph(np.eye(4), [0, 1, 2, 3], [(0, 2), (0, 1)])


def labeled_graph(rng, n=120, classes=6, p=0.05):
    labels = np.sort(rng.integers(0, classes, size=n))
    # guarantee every class has enough nodes for a split
    labels[: 3 * classes] = np.repeat(np.arange(classes), 3)
    edges = {(int(u), int(v)) for u, v in rng.integers(0, n, size=(int(p * n * n), 2))
             if u != v}
    return Graph(rng.normal(size=(n, 5)), labels, edges)


class TestSplitSpec:
    def test_fractions_must_sum_to_one(self):
        with pytest.raises(ValueError):
            SplitSpec(0.5, 0.4, 0.2)

    def test_fractions_must_be_interior(self):
        with pytest.raises(ValueError):
            SplitSpec(1.0, 0.0, 0.0)


class TestBuildTaskStream:
    def test_future_task_edges_excluded(self):
        # classes {0,1} first: edge (0,2) crosses into a future class, so the
        # first snapshot keeps only (0,1)
        g = four_singleton_classes()
        with pytest.raises(ValueError):
            # singleton classes cannot honor one-node-per-split
            build_task_stream(g, 2, 2, SplitSpec())

    def test_exclusion_rule_on_snapshot(self):
        g = four_singleton_classes()
        # bypass the split by building snapshots through a 1-node-per-split
        # graph: replicate each class 3x
        feats = np.vstack([np.eye(4)] * 3)
        labels = np.tile([0, 1, 2, 3], 3)
        edges = [(0, 2), (0, 1)]
        g = Graph(feats, labels, edges)
        stream = build_task_stream(g, 2, 2, SplitSpec(seed=0))
        snap1 = stream.snapshot(0)
        pairs = {(int(snap1.node_ids[u]), int(snap1.node_ids[v]))
                 for u, v in snap1.edge_array}
        assert pairs == {(0, 1)}
        snap2 = stream.snapshot(1)
        pairs2 = {(int(snap2.node_ids[u]), int(snap2.node_ids[v]))
                  for u, v in snap2.edge_array}
        assert pairs2 == {(0, 1), (0, 2)}

    def test_degenerate_single_task_is_induced_subgraph(self):
        rng = np.random.default_rng(0)
        g = labeled_graph(rng, n=40, classes=2)
        stream = build_task_stream(g, 2, 1, SplitSpec(seed=1))
        snap = stream.snapshot(0)
        assert snap.num_nodes == g.num_nodes
        assert snap.num_edges == g.num_edges

    def test_too_few_classes(self):
        rng = np.random.default_rng(1)
        g = labeled_graph(rng, classes=4)
        with pytest.raises(ValueError, match="classes"):
            build_task_stream(g, 2, 3, SplitSpec())

    def test_class_sets_disjoint_and_ascending(self, tiny_stream):
        seen = set()
        for task in tiny_stream.tasks:
            assert not (set(task.classes) & seen)
            seen |= set(task.classes)
        assert list(tiny_stream.all_classes) == sorted(seen)

    def test_snapshots_nest(self, tiny_stream):
        for t in range(1, tiny_stream.num_tasks):
            prev, cur = tiny_stream.snapshot(t - 1), tiny_stream.snapshot(t)
            assert set(prev.node_ids.tolist()) <= set(cur.node_ids.tolist())
            assert prev.edges <= cur.edges          # prefix-stable local ids
            assert np.array_equal(cur.node_ids[: prev.num_nodes], prev.node_ids)

    def test_no_future_nodes_or_edges(self, tiny_stream):
        for t in range(tiny_stream.num_tasks):
            snap = tiny_stream.snapshot(t)
            allowed = set(tiny_stream.classes_through(t).tolist())
            assert set(snap.labels.tolist()) <= allowed

    def test_each_class_has_every_split(self, tiny_stream):
        for task in tiny_stream.tasks:
            for cls in task.classes:
                for part in (task.train, task.val, task.test):
                    fg = tiny_stream.full_graph
                    labels = fg.labels[fg.locals_of(part)]
                    assert np.sum(labels == cls) >= 1

    def test_split_partitions_class_nodes(self, tiny_stream):
        fg = tiny_stream.full_graph
        for task in tiny_stream.tasks:
            members = fg.node_ids[np.isin(fg.labels, task.classes)]
            combined = np.concatenate([task.train, task.val, task.test])
            assert sorted(combined.tolist()) == sorted(members.tolist())

    def test_deterministic_for_fixed_seed(self, tiny_benchmark):
        a = build_task_stream(tiny_benchmark, 2, 3, SplitSpec(seed=5))
        b = build_task_stream(tiny_benchmark, 2, 3, SplitSpec(seed=5))
        for ta, tb in zip(a.tasks, b.tasks):
            assert np.array_equal(ta.train, tb.train)
            assert np.array_equal(ta.test, tb.test)

    def test_different_seed_changes_split(self, tiny_benchmark):
        a = build_task_stream(tiny_benchmark, 2, 3, SplitSpec(seed=5))
        b = build_task_stream(tiny_benchmark, 2, 3, SplitSpec(seed=6))
        assert not np.array_equal(a.tasks[0].train, b.tasks[0].train)


class TestAdvanceSnapshot:
    def test_refined_edges_persist(self, tiny_stream):
        snap1 = advance_snapshot(tiny_stream, 0, None)
        # delete one edge, add one new edge, then grow to task 2
        edges = set(snap1.edges)
        dropped = next(iter(edges))
        edges.remove(dropped)
        added = None
        for u in range(snap1.num_nodes):
            for v in range(u + 1, snap1.num_nodes):
                if (u, v) not in snap1.edges:
                    added = (u, v)
                    break
            if added:
                break
        edges.add(added)
        refined = snap1.with_edges(edges)
        snap2 = advance_snapshot(tiny_stream, 1, refined)
        assert added in snap2.edges
        assert dropped not in snap2.edges
        # pristine edges incident to new nodes do appear
        pristine2 = tiny_stream.snapshot(1)
        new_edges = {e for e in pristine2.edges
                     if e[0] >= snap1.num_nodes or e[1] >= snap1.num_nodes}
        assert new_edges <= snap2.edges

    def test_requires_prefix(self, tiny_stream):
        bigger = tiny_stream.snapshot(2)
        with pytest.raises(ValueError, match="prefix"):
            advance_snapshot(tiny_stream, 1, bigger)
