"""Continual-learning metrics and embedding-diversity statistics.

The accuracy matrix A is lower-triangular: A[i, j] (0-based here) is the
percent accuracy on task j's test nodes after finishing task i. Derived
metrics: final-row mean (pm), mean diagonal-to-final drop (fm), and three
ratio statistics over embeddings that are invariant to uniform scaling.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist


def _check_matrix(matrix) -> np.ndarray:
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("accuracy matrix must be square")
    return m


def pm(matrix) -> float:
    """Mean of the final row: average per-task accuracy after all tasks."""
    m = _check_matrix(matrix)
    last = m[-1, :]
    if not np.all(np.isfinite(last)):
        raise ValueError("final row of the accuracy matrix is incomplete")
    return float(last.mean())


def fm(matrix) -> float | None:
    """Mean over earlier tasks of (immediate accuracy - final accuracy).

    Undefined for a single task; reported as None (absent) in that case.
    Negative values mean backward transfer.
    """
    m = _check_matrix(matrix)
    t = m.shape[0]
    if t < 2:
        return None
    drops = [m[i, i] - m[t - 1, i] for i in range(t - 1)]
    if not np.all(np.isfinite(drops)):
        raise ValueError("accuracy matrix is incomplete")
    return float(np.mean(drops))


def _mean_pairwise(emb: np.ndarray) -> float:
    d = cdist(emb, emb)
    iu = np.triu_indices(emb.shape[0], k=1)
    return float(d[iu].mean())


def buff_div(embeddings: np.ndarray, buffer_rows, train_rows) -> float | None:
    """Mean pairwise distance among replayed nodes over the same among the
    class's training nodes. None (absent) for singleton sets."""
    emb = np.asarray(embeddings, dtype=np.float64)
    b = np.asarray(list(buffer_rows), dtype=np.int64)
    t = np.asarray(list(train_rows), dtype=np.int64)
    if b.size < 2 or t.size < 2:
        return None
    return _mean_pairwise(emb[b]) / _mean_pairwise(emb[t])


def corr_div(embeddings: np.ndarray, correct_rows, test_rows,
             center: np.ndarray) -> float | None:
    """Mean distance-to-center of correctly predicted test nodes over the
    same for all test nodes. None when nothing was predicted correctly."""
    emb = np.asarray(embeddings, dtype=np.float64)
    c = np.asarray(list(correct_rows), dtype=np.int64)
    t = np.asarray(list(test_rows), dtype=np.int64)
    if c.size == 0:
        return None
    if t.size == 0:
        raise ValueError("no test nodes")
    center = np.asarray(center, dtype=np.float64).reshape(1, -1)
    num = cdist(emb[c], center).mean()
    den = cdist(emb[t], center).mean()
    return float(num / den)


def dist_from_center(embeddings: np.ndarray, buffer_rows,
                     train_rows) -> float | None:
    """Mean buffered-node distance to the class center (mean training
    embedding), normalized by the class's mean pairwise training distance."""
    emb = np.asarray(embeddings, dtype=np.float64)
    b = np.asarray(list(buffer_rows), dtype=np.int64)
    t = np.asarray(list(train_rows), dtype=np.int64)
    if b.size < 1 or t.size < 2:
        return None
    center = emb[t].mean(axis=0, keepdims=True)
    return float(cdist(emb[b], center).mean() / _mean_pairwise(emb[t]))


def homophily_buckets(node_ids: np.ndarray, ratios: np.ndarray,
                      bucket_size: int) -> list[np.ndarray]:
    """Sort nodes by homophily ascending and chunk into ceil(n/size) buckets
    (the last may be short). Ties break by node id for determinism."""
    if bucket_size < 1:
        raise ValueError("bucket size must be >= 1")
    node_ids = np.asarray(node_ids, dtype=np.int64)
    ratios = np.asarray(ratios, dtype=np.float64)
    if node_ids.size < 1:
        raise ValueError("class too small for one bucket")
    order = np.lexsort((node_ids, ratios))
    ordered = node_ids[order]
    return [ordered[i:i + bucket_size] for i in range(0, ordered.size, bucket_size)]


def metric_table_csv(rows: list[dict], path) -> None:
    """Write a list of uniform dicts as a CSV table (for plotting)."""
    if not rows:
        raise ValueError("nothing to write")
    keys = list(rows[0])
    with open(path, "w") as fh:
        fh.write(",".join(keys) + "\n")
        for row in rows:
            fh.write(",".join(str(row[k]) for k in keys) + "\n")
