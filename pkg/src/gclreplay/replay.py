"""Replay-buffer selection: coverage-diversity plus the baseline samplers.

The coverage of a node is the set of same-class training nodes within a
radius proportional to the class's mean pairwise embedding distance. The
coverage-diversity (cd) selector greedily picks nodes maximizing the size of
the union of their coverages, which balances representativeness against
spread. Baselines: nearest-to-mean-feature (mf), fewest nearby other-class
nodes (cm), seeded uniform sampling, and k-means medoid sampling.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist


@dataclass(frozen=True)
class CoverageSpec:
    """Radius factor for coverage: d = r * (class mean pairwise distance)."""

    r: float = 0.3

    def __post_init__(self):
        if self.r <= 0:
            raise ValueError("coverage radius factor r must be positive")


@dataclass
class ReplayBuffer:
    """Per-class buckets of global node ids with a total capacity."""

    capacity: int
    buckets: dict[int, list[int]] = field(default_factory=dict)

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("buffer capacity must be >= 1")
        self.check()

    def check(self) -> None:
        seen: set[int] = set()
        total = 0
        for cls, nodes in self.buckets.items():
            s = set(nodes)
            if len(s) != len(nodes):
                raise ValueError(f"duplicate node in bucket of class {cls}")
            if s & seen:
                raise ValueError("buckets must be disjoint")
            seen |= s
            total += len(nodes)
        if total > self.capacity:
            raise ValueError(f"buffer holds {total} nodes, capacity {self.capacity}")

    def all_nodes(self) -> list[int]:
        return [v for cls in sorted(self.buckets) for v in self.buckets[cls]]

    def size(self) -> int:
        return sum(len(b) for b in self.buckets.values())

    def is_empty(self) -> bool:
        return self.size() == 0

    def class_of(self, node: int) -> int:
        for cls, nodes in self.buckets.items():
            if node in nodes:
                return cls
        raise ValueError(f"node {node} is not buffered")


def class_pair_mean_distance(embeddings: np.ndarray) -> float:
    """Mean Euclidean distance over all unordered pairs of class members."""
    emb = np.atleast_2d(np.asarray(embeddings, dtype=np.float64))
    m = emb.shape[0]
    if m < 2:
        raise ValueError("pair mean distance needs at least two members")
    d = cdist(emb, emb)
    iu = np.triu_indices(m, k=1)
    return float(d[iu].mean())


def coverage(i: int, embeddings: np.ndarray, labels: np.ndarray,
             spec: CoverageSpec) -> np.ndarray:
    """Indices of same-class nodes strictly within r*E of node ``i``.

    ``E`` is the mean pairwise distance among nodes of ``i``'s class; the
    node covers itself (distance 0).
    """
    emb = np.atleast_2d(np.asarray(embeddings, dtype=np.float64))
    labels = np.asarray(labels)
    same = np.flatnonzero(labels == labels[i])
    if same.size < 2:
        raise ValueError("coverage radius undefined for a singleton class")
    e = class_pair_mean_distance(emb[same])
    d = cdist(emb[i:i + 1], emb[same])[0]
    return same[d < spec.r * e]


def buffer_quota(class_sizes: dict[int, int], capacity: int) -> dict[int, int]:
    """Proportional per-class slot counts summing exactly to ``capacity``.

    Floors of the proportional shares are topped up by largest fractional
    remainder (larger class first on equal remainders, then smaller class
    id); every class is guaranteed at least one slot.
    """
    classes = sorted(class_sizes)
    if capacity < len(classes):
        raise ValueError(
            f"capacity {capacity} cannot give {len(classes)} classes one slot each"
        )
    total = sum(class_sizes[c] for c in classes)
    if total <= 0:
        raise ValueError("class sizes must be positive")
    shares = {c: capacity * class_sizes[c] / total for c in classes}
    quota = {c: int(np.floor(shares[c])) for c in classes}
    leftover = capacity - sum(quota.values())
    order = sorted(classes, key=lambda c: (-(shares[c] - quota[c]), -class_sizes[c], c))
    for c in order[:leftover]:
        quota[c] += 1
    # guarantee one slot per class, stealing from the fattest buckets
    for c in classes:
        while quota[c] == 0:
            donor = max(classes, key=lambda k: (quota[k], -k))
            quota[donor] -= 1
            quota[c] += 1
    return quota


def _mf_order(points: np.ndarray, ids: np.ndarray,
              center: np.ndarray | None = None) -> np.ndarray:
    """Ids sorted by distance to the (class) mean, ties by smaller id."""
    if center is None:
        center = points.mean(axis=0, keepdims=True)
    d = cdist(points, center)[:, 0]
    return ids[np.lexsort((ids, d))]


def select_buffer_cd(embeddings: np.ndarray, ids: np.ndarray, e_l: int,
                     spec: CoverageSpec) -> list[int]:
    """Greedy union-coverage selection of ``e_l`` nodes for one class.

    Repeatedly takes the candidate whose coverage grows the covered set the
    most (ties to the smaller node id), removes the newly covered nodes from
    the candidate pool, and stops after ``e_l`` picks. If the pool empties
    early (everything covered), remaining slots fill by nearest-to-mean order
    over the not-yet-selected nodes on the same embeddings.
    """
    emb = np.atleast_2d(np.asarray(embeddings, dtype=np.float64))
    ids = np.asarray(ids, dtype=np.int64)
    m = emb.shape[0]
    if e_l > m:
        raise ValueError(f"quota {e_l} exceeds class size {m}")
    if m == 1 or e_l == 0:
        return ids[:e_l].tolist()
    order = np.argsort(ids, kind="stable")
    emb, ids = emb[order], ids[order]
    e = class_pair_mean_distance(emb)
    cover_sets = cdist(emb, emb) < spec.r * e      # row i: mask of C(v_i)
    covered = np.zeros(m, dtype=bool)
    in_pool = np.ones(m, dtype=bool)
    selected_mask = np.zeros(m, dtype=bool)
    picks: list[int] = []
    while len(picks) < e_l and in_pool.any():
        gains = np.where(in_pool, (cover_sets | covered).sum(axis=1), -1)
        best = int(np.argmax(gains))               # first max = smallest id
        covered |= cover_sets[best]
        covered[best] = True
        in_pool &= ~cover_sets[best]
        in_pool[best] = False
        selected_mask[best] = True
        picks.append(int(ids[best]))
    if len(picks) < e_l:
        rest = ~selected_mask
        fill = _mf_order(emb[rest], ids[rest], emb.mean(axis=0, keepdims=True))
        picks.extend(int(v) for v in fill[: e_l - len(picks)])
    return picks


def union_coverage_size(embeddings: np.ndarray, chosen_rows, spec: CoverageSpec) -> int:
    """|union of coverages| of the chosen rows within one class."""
    emb = np.atleast_2d(np.asarray(embeddings, dtype=np.float64))
    e = class_pair_mean_distance(emb)
    d = cdist(emb[list(chosen_rows)], emb)
    return int(np.any(d < spec.r * e, axis=0).sum())


def select_buffer_mf(features: np.ndarray, ids: np.ndarray, e_l: int) -> list[int]:
    """The e_l nodes nearest the class mean vector, ties by smaller id."""
    pts = np.atleast_2d(np.asarray(features, dtype=np.float64))
    ids = np.asarray(ids, dtype=np.int64)
    if e_l > pts.shape[0]:
        raise ValueError(f"quota {e_l} exceeds class size {pts.shape[0]}")
    return _mf_order(pts, ids)[:e_l].tolist()


def select_buffer_cm(embeddings: np.ndarray, ids: np.ndarray,
                     other_embeddings: np.ndarray, e_l: int,
                     spec: CoverageSpec) -> list[int]:
    """The e_l class members with the fewest other-class nodes within r*E.

    ``other_embeddings`` holds the same-task nodes of different classes;
    E is the selected class's own mean pairwise distance.
    """
    emb = np.atleast_2d(np.asarray(embeddings, dtype=np.float64))
    ids = np.asarray(ids, dtype=np.int64)
    m = emb.shape[0]
    if e_l > m:
        raise ValueError(f"quota {e_l} exceeds class size {m}")
    if m == 1:
        return ids[:e_l].tolist()
    e = class_pair_mean_distance(emb)
    others = np.atleast_2d(np.asarray(other_embeddings, dtype=np.float64))
    if others.size == 0:
        counts = np.zeros(m)
    else:
        counts = (cdist(emb, others) < spec.r * e).sum(axis=1)
    return ids[np.lexsort((ids, counts))][:e_l].tolist()


def select_buffer_random(ids: np.ndarray, e_l: int,
                         rng: np.random.Generator) -> list[int]:
    """Seeded uniform sample without replacement."""
    ids = np.asarray(ids, dtype=np.int64)
    if e_l > ids.size:
        raise ValueError(f"quota {e_l} exceeds class size {ids.size}")
    return rng.choice(ids, size=e_l, replace=False).tolist()


def _kmeans(points: np.ndarray, k: int, rng: np.random.Generator,
            iters: int = 50) -> np.ndarray:
    """Plain Lloyd iterations with seeded point-sampled init."""
    init = rng.choice(points.shape[0], size=k, replace=False)
    centers = points[np.sort(init)].copy()
    for _ in range(iters):
        assign = np.argmin(cdist(points, centers), axis=1)
        moved = False
        for j in range(k):
            members = points[assign == j]
            if members.shape[0] == 0:
                continue  # empty cluster keeps its center
            c = members.mean(axis=0)
            if not np.array_equal(c, centers[j]):
                centers[j] = c
                moved = True
        if not moved:
            break
    return centers


def select_buffer_clustering(embeddings: np.ndarray, ids: np.ndarray, e_l: int,
                             rng: np.random.Generator, k: int = 5) -> list[int]:
    """k-means (k = min(k, e_l)) then nearest-to-center nodes, round-robin
    by next-nearest until the quota is filled."""
    emb = np.atleast_2d(np.asarray(embeddings, dtype=np.float64))
    ids = np.asarray(ids, dtype=np.int64)
    m = emb.shape[0]
    if e_l > m:
        raise ValueError(f"quota {e_l} exceeds class size {m}")
    if e_l == 0:
        return []
    kk = min(k, e_l, m)
    order = np.argsort(ids, kind="stable")
    emb, ids = emb[order], ids[order]
    centers = _kmeans(emb, kk, rng)
    d = cdist(emb, centers)                      # (m, kk)
    ranked = [np.lexsort((ids, d[:, j])) for j in range(kk)]
    taken = np.zeros(m, dtype=bool)
    picks: list[int] = []
    rank = 0
    while len(picks) < e_l:
        for j in range(kk):
            if len(picks) >= e_l:
                break
            for row in ranked[j][rank:]:
                if not taken[row]:
                    taken[row] = True
                    picks.append(int(ids[row]))
                    break
        rank += 1
    return picks


def buffer_to_csv(buffer: ReplayBuffer, method: str, path) -> None:
    """Audit dump: one row per replayed node (class_id, node_id, method)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["class_id", "node_id", "method"])
        for cls in sorted(buffer.buckets):
            for node in buffer.buckets[cls]:
                w.writerow([cls, node, method])
