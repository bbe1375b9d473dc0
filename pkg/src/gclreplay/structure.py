"""Structure refinement around replayed nodes.

At the end of each task every replayed node gets a candidate list: its K
nearest nodes in the embedding space of the model that just finished
training. When the next task starts, a freshly trained link predictor scores
those candidates; each replayed node gains edges to its top-N scorers and
loses original edges whose score does not clear the threshold tau. Additions
come first and deletions only ever touch edges that existed before the
refinement, so an added edge cannot be removed in the same sweep. Edges with
no replayed endpoint are never touched.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .graphs import Graph
from .replay import ReplayBuffer

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CandidateSets:
    """Per replayed node: candidate global ids ascending by embedding
    distance, with the distances themselves kept for audit."""

    neighbors: dict[int, list[int]]
    distances: dict[int, np.ndarray]
    k: int

    def of(self, node: int) -> list[int]:
        return self.neighbors.get(int(node), [])


@dataclass
class DeltaEntry:
    op: str          # "add" | "del"
    u: int           # global ids
    v: int
    score: float
    task: int


@dataclass
class RefinedAdjacency:
    """Result of one refinement sweep over a snapshot."""

    graph: Graph
    added: list[DeltaEntry] = field(default_factory=list)
    deleted: list[DeltaEntry] = field(default_factory=list)

    def check_disjoint(self) -> None:
        a = {(min(e.u, e.v), max(e.u, e.v)) for e in self.added}
        d = {(min(e.u, e.v), max(e.u, e.v)) for e in self.deleted}
        if a & d:
            raise ValueError("an edge appears in both the added and deleted sets")


def build_candidates(buffer: ReplayBuffer, embeddings: np.ndarray,
                     graph: Graph, k: int) -> CandidateSets:
    """K nearest snapshot nodes per replayed node, by Euclidean distance on
    the given embeddings (rows aligned with the snapshot's local ids).

    Candidates exclude the replayed node itself; because they are computed on
    the snapshot available when the buffer was (re)built, nodes of any later
    task can never appear. Fewer than K eligible nodes yields a shorter,
    logged list.
    """
    emb = np.asarray(embeddings, dtype=np.float64)
    if emb.shape[0] != graph.num_nodes:
        raise ValueError("embeddings must cover every node of the snapshot")
    neighbors: dict[int, list[int]] = {}
    distances: dict[int, np.ndarray] = {}
    buffered = buffer.all_nodes()
    if not buffered:
        return CandidateSets({}, {}, k)
    rows = graph.locals_of(buffered)
    d = cdist(emb[rows], emb)
    for b_global, b_local, drow in zip(buffered, rows, d):
        drow = drow.copy()
        drow[b_local] = np.inf                      # never its own candidate
        order = np.lexsort((graph.node_ids, drow))
        take = min(k, graph.num_nodes - 1)
        if take < k:
            logger.info("node %d has only %d candidate(s), requested %d",
                        b_global, take, k)
        chosen = order[:take]
        neighbors[int(b_global)] = [int(graph.node_ids[i]) for i in chosen]
        distances[int(b_global)] = drow[chosen]
    return CandidateSets(neighbors, distances, k)


def _top_n_additions(graph: Graph, node: int, candidates: CandidateSets,
                     scores: np.ndarray, n: int, task: int,
                     ) -> list[DeltaEntry]:
    cands = candidates.of(node)
    if not cands:
        logger.info("replayed node %d has no candidates; nothing to add", node)
        return []
    if n <= 0:
        return []
    cand_arr = np.asarray(cands, dtype=np.int64)
    order = np.lexsort((cand_arr, -scores))         # score desc, id asc
    u_local = graph.local(node)
    existing = set(graph.neighbors(u_local).tolist())
    out = []
    for idx in order[:n]:
        v = int(cand_arr[idx])
        v_local = graph.local(v)
        if v_local in existing:
            continue                                # idempotent union
        out.append(DeltaEntry("add", int(node), v, float(scores[idx]), task))
    return out


def add_edges(graph: Graph, buffer: ReplayBuffer, candidates: CandidateSets,
              score_of: dict[int, np.ndarray], n: int, task: int = 0,
              nodes=None) -> RefinedAdjacency:
    """Connect each replayed node to its top-N scoring candidates.

    ``score_of`` maps replayed node id -> scores aligned with its candidate
    list. Existing edges are kept (the union is idempotent); ties break to
    the smaller candidate id.
    """
    targets = list(nodes) if nodes is not None else buffer.all_nodes()
    added: list[DeltaEntry] = []
    for b in targets:
        added.extend(_top_n_additions(graph, b, candidates,
                                      score_of.get(int(b), np.empty(0)), n, task))
    edges = set(graph.edges)
    for e in added:
        u, v = graph.local(e.u), graph.local(e.v)
        edges.add((min(u, v), max(u, v)))
    return RefinedAdjacency(graph.with_edges(edges), added=added)


def delete_edges(graph: Graph, buffer: ReplayBuffer,
                 neighbor_scores: dict[int, dict[int, float]], tau: float,
                 task: int = 0, nodes=None) -> RefinedAdjacency:
    """Drop original edges at replayed nodes whose score fails tau.

    An edge (b, j) with j an *original* neighbor of replayed node b survives
    iff its score is strictly greater than tau; removals apply symmetrically.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0,1]")
    targets = list(nodes) if nodes is not None else buffer.all_nodes()
    deleted: list[DeltaEntry] = []
    doomed: set[tuple[int, int]] = set()
    for b in targets:
        scores = neighbor_scores.get(int(b), {})
        u = graph.local(b)
        for j, s in scores.items():
            if s > tau:
                continue
            v = graph.local(j)
            key = (min(u, v), max(u, v))
            if key in doomed:
                continue
            if key not in graph.edges:
                raise ValueError(f"({b},{j}) is not an original edge")
            doomed.add(key)
            deleted.append(DeltaEntry("del", int(b), int(j), float(s), task))
    return RefinedAdjacency(graph.with_edges(set(graph.edges) - doomed),
                            deleted=deleted)


def refine_structure(graph: Graph, buffer: ReplayBuffer,
                     candidates: CandidateSets, z: np.ndarray,
                     n_add: int, tau: float, sl_ratio: float,
                     rng: np.random.Generator, task: int = 0,
                     score_fn=None) -> RefinedAdjacency:
    """One full refinement sweep: additions, then deletions, over a seeded
    fraction ``sl_ratio`` of the replayed nodes.

    ``z`` holds link-predictor embeddings aligned with the snapshot's local
    ids; all scores come from this single table. The returned graph carries
    the refined adjacency used for downstream training and for growing the
    next snapshot.
    """
    from .nn import pair_scores  # local import to keep module deps one-way

    if not 0.0 <= sl_ratio <= 1.0:
        raise ValueError("sl_ratio must lie in [0,1]")
    score_fn = score_fn or pair_scores
    all_nodes = np.array(buffer.all_nodes(), dtype=np.int64)
    count = int(round(sl_ratio * all_nodes.size))
    if count == 0 or all_nodes.size == 0:
        return RefinedAdjacency(graph)
    chosen = np.sort(rng.choice(all_nodes, size=count, replace=False))

    score_of: dict[int, np.ndarray] = {}
    neighbor_scores: dict[int, dict[int, float]] = {}
    for b in chosen:
        u = graph.local(int(b))
        cands = candidates.of(int(b))
        if cands:
            pairs = np.array([[u, graph.local(c)] for c in cands], dtype=np.int64)
            score_of[int(b)] = score_fn(z, pairs)
        nbrs = graph.neighbors(u)
        if nbrs.size:
            pairs = np.stack([np.full(nbrs.size, u, dtype=np.int64), nbrs], axis=1)
            svals = score_fn(z, pairs)
            neighbor_scores[int(b)] = {
                int(graph.node_ids[j]): float(s) for j, s in zip(nbrs, svals)
            }

    after_add = add_edges(graph, buffer, candidates, score_of, n_add,
                          task=task, nodes=chosen)
    # deletions consult the ORIGINAL neighbor sets captured above
    after_del = delete_edges(after_add.graph, buffer, neighbor_scores, tau,
                             task=task, nodes=chosen)
    result = RefinedAdjacency(after_del.graph, added=after_add.added,
                              deleted=after_del.deleted)
    result.check_disjoint()
    return result


def homophily_boost_edges(graph: Graph, buffer: ReplayBuffer, n: int,
                          train_pool: dict[int, np.ndarray],
                          rng: np.random.Generator,
                          task: int = 0) -> RefinedAdjacency:
    """Control refinement: wire each replayed node to N random same-class
    *training* nodes, which can only raise buffer homophily. Used by the
    ablation harness, never by the main method."""
    added: list[DeltaEntry] = []
    edges = set(graph.edges)
    for cls in sorted(buffer.buckets):
        pool = np.asarray(train_pool.get(cls, np.empty(0, dtype=np.int64)))
        for b in buffer.buckets[cls]:
            u = graph.local(b)
            nbrs = set(graph.neighbors(u).tolist())
            eligible = np.array(
                [p for p in pool
                 if int(p) != int(b) and graph.local(int(p)) not in nbrs],
                dtype=np.int64,
            )
            if eligible.size == 0 or n <= 0:
                continue
            take = min(n, eligible.size)
            picked = rng.choice(eligible, size=take, replace=False)
            for v in np.sort(picked):
                lv = graph.local(int(v))
                edges.add((min(u, lv), max(u, lv)))
                added.append(DeltaEntry("add", int(b), int(v), 1.0, task))
    return RefinedAdjacency(graph.with_edges(edges), added=added)


def delta_log_to_csv(entries: list[DeltaEntry], path) -> None:
    """Export the add/delete log as CSV (op, u, v, score, task)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["op", "u", "v", "score", "task"])
        for e in entries:
            w.writerow([e.op, e.u, e.v, repr(e.score), e.task])
