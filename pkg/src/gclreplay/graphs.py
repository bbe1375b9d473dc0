"""Immutable graph snapshots and graph-level statistics.

A :class:`Graph` is one task snapshot: an undirected simple graph with dense
node features, integer class labels, and stable *global* node ids so a node
keeps its identity across snapshots. Edges are stored in local indices
(0..num_nodes-1); public statistics take global ids.
"""

from __future__ import annotations

from functools import cached_property
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp


def canonical_edges(edges: Iterable[tuple[int, int]]) -> frozenset[tuple[int, int]]:
    """Canonicalize to (min, max) pairs, rejecting self-loops."""
    out = set()
    for u, v in edges:
        u, v = int(u), int(v)
        if u == v:
            raise ValueError(f"self-loop ({u},{u}) is not a storable edge")
        out.add((u, v) if u < v else (v, u))
    return frozenset(out)


class Graph:
    """One immutable snapshot; treat every attribute as read-only."""

    def __init__(self, features, labels, edges, node_ids=None):
        self.features = np.ascontiguousarray(features, dtype=np.float64)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D (num_nodes x d) matrix")
        self.labels = np.asarray(labels, dtype=np.int64)
        n = self.features.shape[0]
        if self.labels.shape != (n,):
            raise ValueError("labels length must equal the feature row count")
        if node_ids is None:
            node_ids = np.arange(n, dtype=np.int64)
        self.node_ids = np.asarray(node_ids, dtype=np.int64)
        if self.node_ids.shape != (n,):
            raise ValueError("node_ids length must equal num_nodes")
        if len(set(self.node_ids.tolist())) != n:
            raise ValueError("node_ids must be unique")
        self.edges = canonical_edges(edges)
        for u, v in self.edges:
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u},{v}) endpoint outside id space [0,{n})")
        for arr in (self.features, self.labels, self.node_ids):
            arr.setflags(write=False)
        self._local = {int(g): i for i, g in enumerate(self.node_ids)}

    # -- basics ----------------------------------------------------------
    @property
    def num_nodes(self) -> int:
        return self.features.shape[0]

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def has_node(self, global_id: int) -> bool:
        return int(global_id) in self._local

    def local(self, global_id: int) -> int:
        try:
            return self._local[int(global_id)]
        except KeyError:
            raise ValueError(f"unknown node id {global_id}") from None

    def locals_of(self, global_ids) -> np.ndarray:
        return np.array([self.local(g) for g in global_ids], dtype=np.int64)

    @cached_property
    def edge_array(self) -> np.ndarray:
        """(E, 2) int array of canonical edges, lexicographically sorted."""
        if not self.edges:
            return np.empty((0, 2), dtype=np.int64)
        return np.array(sorted(self.edges), dtype=np.int64)

    @cached_property
    def _adj_csr(self) -> sp.csr_matrix:
        n = self.num_nodes
        ea = self.edge_array
        if ea.shape[0] == 0:
            return sp.csr_matrix((n, n))
        rows = np.concatenate([ea[:, 0], ea[:, 1]])
        cols = np.concatenate([ea[:, 1], ea[:, 0]])
        data = np.ones(rows.shape[0])
        return sp.csr_matrix((data, (rows, cols)), shape=(n, n))

    def neighbors(self, local_id: int) -> np.ndarray:
        a = self._adj_csr
        return a.indices[a.indptr[local_id]:a.indptr[local_id + 1]]

    def degree(self, local_id: int) -> int:
        a = self._adj_csr
        return int(a.indptr[local_id + 1] - a.indptr[local_id])

    @cached_property
    def degrees(self) -> np.ndarray:
        a = self._adj_csr
        return np.diff(a.indptr)

    @cached_property
    def features_csr(self) -> sp.csr_matrix:
        return sp.csr_matrix(self.features)

    @cached_property
    def message_passing(self) -> "MessagePassingIndex":
        return MessagePassingIndex(self)

    # -- derivation -------------------------------------------------------
    def with_edges(self, edges) -> "Graph":
        """Same nodes/features/labels, different edge set."""
        return Graph(self.features, self.labels, edges, self.node_ids)

    def __repr__(self):
        return f"Graph(n={self.num_nodes}, m={self.num_edges}, d={self.feature_dim})"


class MessagePassingIndex:
    """Directed-edge arrays (both orientations plus self-loops) and the
    sparse gather/scatter operators the attention layers use."""

    def __init__(self, graph: Graph):
        n = graph.num_nodes
        ea = graph.edge_array
        src = np.concatenate([ea[:, 0], ea[:, 1], np.arange(n, dtype=np.int64)])
        dst = np.concatenate([ea[:, 1], ea[:, 0], np.arange(n, dtype=np.int64)])
        order = np.lexsort((src, dst))
        self.src = src[order]
        self.dst = dst[order]
        e = self.src.shape[0]
        ones = np.ones(e)
        eye = np.arange(e)
        # adjoints: scatter-add over src / segment-sum over dst
        self.scatter_src = sp.csr_matrix((ones, (self.src, eye)), shape=(n, e))
        self.scatter_dst = sp.csr_matrix((ones, (self.dst, eye)), shape=(n, e))
        self.num_nodes = n
        self.num_directed = e


# -- statistics ------------------------------------------------------------


def homophily_ratio(graph: Graph, node: int) -> float:
    """Fraction of the node's neighbors sharing its label.

    Degree-0 nodes score 1.0 by convention so that deleting edges can never
    spuriously improve homophily summaries; isolated nodes are counted
    separately by :func:`isolated_nodes`.
    """
    i = graph.local(node)
    nbrs = graph.neighbors(i)
    if nbrs.size == 0:
        return 1.0
    return float(np.mean(graph.labels[nbrs] == graph.labels[i]))


def isolated_nodes(graph: Graph, nodes=None) -> int:
    """Count of degree-0 nodes (optionally restricted to given global ids)."""
    if nodes is None:
        return int(np.sum(graph.degrees == 0))
    idx = graph.locals_of(nodes)
    return int(np.sum(graph.degrees[idx] == 0))


def buffer_homophily_table(graph: Graph, buffer) -> dict[int, tuple[float, float]]:
    """Per-class (mean, population std) of homophily over replayed nodes.

    ``buffer`` is a ReplayBuffer or any mapping class -> iterable of global
    node ids. Classes with empty buckets are omitted rather than reported as
    zero. All buffered nodes must exist in the graph.
    """
    buckets: Mapping[int, Iterable[int]] = getattr(buffer, "buckets", buffer)
    table: dict[int, tuple[float, float]] = {}
    for cls in sorted(buckets):
        nodes = list(buckets[cls])
        if not nodes:
            continue
        ratios = np.array([homophily_ratio(graph, v) for v in nodes])
        table[int(cls)] = (float(ratios.mean()), float(ratios.std()))
    return table
