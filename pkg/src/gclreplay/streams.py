"""Class-incremental task streams over an evolving graph.

A stream cuts a full benchmark graph into M ordered tasks of fresh classes.
The snapshot for task t contains every node whose class was introduced by
task t, and only the edges among those nodes: nothing about future-task nodes
(neither the nodes nor edges incident to them) leaks backwards. Edge edits
made by structure refinement persist into later snapshots via
:func:`advance_snapshot`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graphs import Graph


@dataclass(frozen=True)
class SplitSpec:
    """Stratified per-class train/val/test fractions plus the shuffle seed."""

    train_frac: float = 0.6
    val_frac: float = 0.2
    test_frac: float = 0.2
    seed: int = 0

    def __post_init__(self):
        fracs = (self.train_frac, self.val_frac, self.test_frac)
        if any(not (0.0 < f < 1.0) for f in fracs):
            raise ValueError("split fractions must lie strictly inside (0,1)")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")


@dataclass(frozen=True)
class TaskDescriptor:
    index: int                       # 0-based task position
    classes: tuple[int, ...]
    train: np.ndarray                # global node ids, sorted
    val: np.ndarray
    test: np.ndarray


@dataclass(frozen=True)
class TaskStream:
    """Ordered tasks plus the full graph and construction provenance."""

    full_graph: Graph
    tasks: tuple[TaskDescriptor, ...]
    node_order: np.ndarray           # global ids ordered (task block, then id)
    task_offsets: np.ndarray         # node_order[:task_offsets[t]] = nodes through t
    split: SplitSpec
    classes_per_task: int
    _snapshots: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def num_tasks(self) -> int:
        return len(self.tasks)

    @property
    def all_classes(self) -> tuple[int, ...]:
        return tuple(c for t in self.tasks for c in t.classes)

    def classes_through(self, t: int) -> np.ndarray:
        return np.array([c for task in self.tasks[: t + 1] for c in task.classes])

    def nodes_through(self, t: int) -> np.ndarray:
        return self.node_order[: self.task_offsets[t]]

    def train_nodes_of_class(self, cls: int) -> np.ndarray:
        for task in self.tasks:
            if cls in task.classes:
                labels = self.full_graph.labels
                mask = labels[self.full_graph.locals_of(task.train)] == cls
                return task.train[mask]
        raise ValueError(f"class {cls} is not part of this stream")

    def task_of_class(self, cls: int) -> int:
        for task in self.tasks:
            if cls in task.classes:
                return task.index
        raise ValueError(f"class {cls} is not part of this stream")

    def snapshot(self, t: int) -> Graph:
        """Pristine (refinement-free) snapshot for task t."""
        if t not in self._snapshots:
            self._snapshots[t] = self._build_snapshot(t)
        return self._snapshots[t]

    def _build_snapshot(self, t: int) -> Graph:
        nodes = self.nodes_through(t)
        fg = self.full_graph
        rows = fg.locals_of(nodes)
        included = {int(g) for g in nodes}
        g2l = {int(g): i for i, g in enumerate(nodes)}
        edges = []
        for u, v in fg.edge_array:
            gu, gv = int(fg.node_ids[u]), int(fg.node_ids[v])
            if gu in included and gv in included:
                edges.append((g2l[gu], g2l[gv]))
        return Graph(fg.features[rows], fg.labels[rows], edges, node_ids=nodes)

    def resplit(self, seed: int) -> "TaskStream":
        """Same graph and class order, fresh stratified split."""
        spec = SplitSpec(self.split.train_frac, self.split.val_frac,
                         self.split.test_frac, seed)
        return build_task_stream(self.full_graph, self.classes_per_task,
                                 self.num_tasks, spec,
                                 class_order=list(self.all_classes))


def _split_counts(n: int, spec: SplitSpec) -> tuple[int, int, int]:
    if n < 3:
        raise ValueError(f"class needs >= 3 nodes to retain one per split, got {n}")
    n_tr = max(1, int(n * spec.train_frac))
    n_va = max(1, int(n * spec.val_frac))
    n_te = n - n_tr - n_va
    while n_te < 1:
        if n_tr >= n_va and n_tr > 1:
            n_tr -= 1
        else:
            n_va -= 1
        n_te = n - n_tr - n_va
    return n_tr, n_va, n_te


def build_task_stream(
    full_graph: Graph,
    classes_per_task: int,
    num_tasks: int,
    split: SplitSpec,
    class_order: list[int] | None = None,
) -> TaskStream:
    """Cut the full graph into a class-incremental stream.

    Classes are consumed in ascending label order unless ``class_order`` is
    given. The split is stratified per class with a seeded shuffle and is
    deterministic for a fixed (graph, spec, seed).
    """
    labels = full_graph.labels
    present = sorted(int(c) for c in np.unique(labels))
    needed = classes_per_task * num_tasks
    if class_order is None:
        class_order = present[:needed]
    if len(class_order) < needed:
        raise ValueError(
            f"need {needed} classes ({classes_per_task} x {num_tasks}), "
            f"graph provides {len(present)}"
        )
    class_order = [int(c) for c in class_order[:needed]]
    missing = [c for c in class_order if c not in present]
    if missing:
        raise ValueError(f"classes {missing} have no nodes")

    rng = np.random.default_rng(split.seed)
    per_class_split: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
    for cls in class_order:
        nodes = full_graph.node_ids[labels == cls]
        perm = rng.permutation(len(nodes))
        shuffled = nodes[perm]
        n_tr, n_va, _ = _split_counts(len(nodes), split)
        per_class_split[cls] = (
            np.sort(shuffled[:n_tr]),
            np.sort(shuffled[n_tr:n_tr + n_va]),
            np.sort(shuffled[n_tr + n_va:]),
        )

    tasks = []
    node_order_parts = []
    offsets = []
    total = 0
    for t in range(num_tasks):
        classes = tuple(class_order[t * classes_per_task:(t + 1) * classes_per_task])
        tr = np.sort(np.concatenate([per_class_split[c][0] for c in classes]))
        va = np.sort(np.concatenate([per_class_split[c][1] for c in classes]))
        te = np.sort(np.concatenate([per_class_split[c][2] for c in classes]))
        tasks.append(TaskDescriptor(t, classes, tr, va, te))
        block = np.sort(full_graph.node_ids[np.isin(labels, classes)])
        node_order_parts.append(block)
        total += len(block)
        offsets.append(total)

    return TaskStream(
        full_graph=full_graph,
        tasks=tuple(tasks),
        node_order=np.concatenate(node_order_parts),
        task_offsets=np.array(offsets, dtype=np.int64),
        split=split,
        classes_per_task=classes_per_task,
    )


def advance_snapshot(stream: TaskStream, t: int, prev: Graph | None) -> Graph:
    """Snapshot for task t grown from a possibly-refined predecessor.

    For t=0 this is the pristine first snapshot. Otherwise the previous
    graph's edge set (including refinement adds/deletes) carries over, plus
    every full-graph edge that touches a newly introduced node. Node ordering
    is prefix-stable, so the predecessor's local edge indices stay valid.
    """
    if t == 0 or prev is None:
        return stream.snapshot(0)
    nodes = stream.nodes_through(t)
    n_prev = prev.num_nodes
    if not np.array_equal(prev.node_ids, nodes[:n_prev]):
        raise ValueError("previous snapshot is not a prefix of task nodes")
    fg = stream.full_graph
    rows = fg.locals_of(nodes)
    g2l = {int(g): i for i, g in enumerate(nodes)}
    edges = set(prev.edges)
    for u, v in fg.edge_array:
        gu, gv = int(fg.node_ids[u]), int(fg.node_ids[v])
        lu, lv = g2l.get(gu), g2l.get(gv)
        if lu is None or lv is None:
            continue
        if lu >= n_prev or lv >= n_prev:   # incident to a new node
            edges.add((min(lu, lv), max(lu, lv)))
    return Graph(fg.features[rows], fg.labels[rows], edges, node_ids=nodes)
