"""Per-task continual-learning driver.

Task 1 trains a freshly initialized classifier on its snapshot. Every later
task t: (1) warm-start the classifier, randomly re-initialize the link
predictor and train it on the pristine snapshot with the combined
link/label loss; (2) refine the adjacency around replayed nodes using the
candidate sets computed at the end of task t-1; (3) train the classifier on
the refined graph with the replay-weighted loss; (4) fill row t of the
accuracy matrix over all tasks seen so far (softmax over every seen class);
(5) reselect the replay buffer for all seen classes and rebuild candidate
sets from the current embeddings. Refined edges persist into the next
snapshot.

Randomness is split into named streams (split, init, negative sampling,
sampler, refinement mask) derived from the master seed, so method ablations
at equal seeds differ only where they should.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import metrics, rng as rng_mod
from .config import ExperimentConfig
from .errors import NumericalError
from .graphs import Graph, buffer_homophily_table, homophily_ratio, isolated_nodes
from .nn import (
    Adam,
    GatEncoder,
    LinkPredictor,
    ParamStore,
    build_classifier,
    combine_lp_loss,
    link_loss,
    pair_scores_tensor,
    replay_weighted_loss,
)
from .replay import (
    CoverageSpec,
    ReplayBuffer,
    buffer_quota,
    select_buffer_cd,
    select_buffer_clustering,
    select_buffer_cm,
    select_buffer_mf,
    select_buffer_random,
)
from .streams import TaskStream, advance_snapshot
from .structure import (
    CandidateSets,
    build_candidates,
    homophily_boost_edges,
    refine_structure,
)

logger = logging.getLogger(__name__)

_SAMPLER = {
    "dslr": "cd", "cd_only": "cd", "mf": "mf", "cm": "cm", "random": "random",
    "clustering": "clustering", "sl_only": "mf", "homophily_boost": "cd",
}
_REFINEMENT = {
    "dslr": "lp", "sl_only": "lp", "homophily_boost": "boost",
    "cd_only": None, "mf": None, "cm": None, "random": None, "clustering": None,
}


@dataclass
class TaskRecord:
    task: int
    quota: dict[int, int]
    buffer: dict[int, list[int]]
    buffer_homophily: dict[int, tuple[float, float]]
    buff_div: dict[int, float | None]
    dist_from_center: dict[int, float | None]
    homophily_before: float | None = None
    homophily_after: float | None = None
    delta_added: int = 0
    delta_deleted: int = 0
    isolated_buffered: int = 0
    wall_seconds: float = 0.0


@dataclass
class ContinualState:
    seed: int
    params: ParamStore
    classifier: GatEncoder
    matrix: np.ndarray
    buffer: ReplayBuffer
    candidates: CandidateSets
    graphs: list[Graph] = field(default_factory=list)
    records: list[TaskRecord] = field(default_factory=list)
    corr_div: dict[int, float | None] = field(default_factory=dict)
    delta_log: list = field(default_factory=list)
    next_task: int = 0


def init_state(stream: TaskStream, config: ExperimentConfig, seed: int,
               ) -> ContinualState:
    params = ParamStore()
    classifier = build_classifier(
        params,
        in_dim=stream.full_graph.feature_dim,
        hidden_dim=config.hidden_dim,
        num_classes=len(stream.all_classes),
        num_layers=config.num_layers,
        rng=rng_mod.stream(seed, "init_cls"),
    )
    m = stream.num_tasks
    return ContinualState(
        seed=seed,
        params=params,
        classifier=classifier,
        matrix=np.full((m, m), np.nan),
        buffer=ReplayBuffer(config.buffer_size),
        candidates=CandidateSets({}, {}, config.k_cand),
    )


def _class_columns(stream: TaskStream, t: int) -> np.ndarray:
    """Columns of the classifier head for classes seen through task t.

    The head is laid out in stream class order, so the column of class c is
    its position in ``all_classes``."""
    all_classes = list(stream.all_classes)
    seen = sorted(stream.classes_through(t).tolist())
    return np.array([all_classes.index(c) for c in seen]), np.array(seen)


def _buffer_rows(graph: Graph, buffer: ReplayBuffer) -> tuple[np.ndarray, np.ndarray]:
    nodes = buffer.all_nodes()
    if not nodes:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    rows = graph.locals_of(nodes)
    return rows, graph.labels[rows]


def _check_loss(value: float, what: str) -> None:
    if not np.isfinite(value):
        raise NumericalError(f"non-finite {what} loss")


def _train_classifier(state: ContinualState, stream: TaskStream, t: int,
                      graph: Graph, config: ExperimentConfig) -> None:
    cols, seen = _class_columns(stream, t)
    train_ids = stream.tasks[t].train
    train_rows = graph.locals_of(train_ids)
    train_labels = graph.labels[train_rows]
    buf_rows, buf_labels = _buffer_rows(graph, state.buffer)
    label_cols = np.searchsorted(seen, train_labels)
    buf_cols = np.searchsorted(seen, buf_labels) if buf_rows.size else buf_labels
    opt = Adam(state.params, config.learning_rate)
    for _ in range(config.epochs_cls):
        logits = state.classifier.forward(graph)
        loss = replay_weighted_loss(logits, train_rows, cols[label_cols],
                                    buf_rows, cols[buf_cols] if buf_rows.size else buf_labels,
                                    config.beta, np.sort(cols))
        _check_loss(loss.item(), "classification")
        loss.backward()
        opt.step()


def _sample_non_edges(rng: np.random.Generator, n: int, count: int,
                      edge_keys: np.ndarray) -> np.ndarray:
    """Uniform (u,v) pairs that are neither self-pairs nor existing edges.

    ``edge_keys`` holds the sorted canonical keys min*n+max of real edges.
    Sampling is with replacement, so repeated picks of one non-edge can occur.
    """
    chunks = []
    filled = 0
    while filled < count:
        m = 2 * (count - filled) + 8
        u = rng.integers(0, n, size=m)
        v = rng.integers(0, n, size=m)
        keys = np.minimum(u, v) * n + np.maximum(u, v)
        pos = np.searchsorted(edge_keys, keys)
        pos = np.minimum(pos, edge_keys.size - 1) if edge_keys.size else pos
        is_edge = edge_keys[pos] == keys if edge_keys.size else np.zeros(m, bool)
        ok = (u != v) & ~is_edge
        take = np.flatnonzero(ok)[: count - filled]
        chunks.append(np.stack([u[take], v[take]], axis=1))
        filled += take.size
    return np.concatenate(chunks, axis=0)


def _train_link_predictor(stream: TaskStream, t: int, graph: Graph,
                          buffer: ReplayBuffer, config: ExperimentConfig,
                          seed: int) -> np.ndarray | None:
    """Returns link-predictor embeddings for the snapshot, or None when the
    snapshot has no edges to learn from."""
    pos = graph.edge_array
    if pos.shape[0] == 0:
        logger.warning("task %d snapshot has no edges; skipping refinement", t + 1)
        return None
    cols, seen = _class_columns(stream, t)
    train_ids = stream.tasks[t].train
    train_rows = graph.locals_of(train_ids)
    train_labels = graph.labels[train_rows]
    buf_rows, buf_labels = _buffer_rows(graph, buffer)
    label_cols = np.searchsorted(seen, train_labels)
    buf_cols = np.searchsorted(seen, buf_labels) if buf_rows.size else buf_labels

    store = ParamStore()
    lp = LinkPredictor(store, graph.feature_dim, config.hidden_dim,
                       len(stream.all_classes), config.num_layers,
                       rng_mod.stream(seed, "init_lp", t))
    opt = Adam(store, config.learning_rate)
    neg_rng = rng_mod.stream(seed, "negatives", t)
    n = graph.num_nodes
    edge_keys = np.sort(pos[:, 0].astype(np.int64) * n + pos[:, 1])
    indicator = np.concatenate([np.ones(pos.shape[0]), np.zeros(pos.shape[0])])
    for _ in range(config.epochs_lp):
        neg = _sample_non_edges(neg_rng, n, pos.shape[0], edge_keys)
        pairs = np.vstack([pos, neg])
        z = lp.encode(graph)
        l_link = link_loss(pair_scores_tensor(z, pairs), indicator)
        l_node = replay_weighted_loss(lp.class_logits(z), train_rows,
                                      cols[label_cols], buf_rows,
                                      cols[buf_cols] if buf_rows.size else buf_labels,
                                      config.beta, np.sort(cols))
        loss = combine_lp_loss(l_link, l_node, config.lambda_)
        _check_loss(loss.item(), "link-predictor")
        loss.backward()
        opt.step()
    return lp.encode(graph).value


def _evaluate_row(state: ContinualState, stream: TaskStream, t: int) -> None:
    cols, seen = _class_columns(stream, t)
    for j in range(t + 1):
        g = state.graphs[j]
        logits = state.classifier.forward(g).value
        pred_cols = np.argmax(logits[:, cols], axis=1)
        pred = seen[pred_cols]
        rows = g.locals_of(stream.tasks[j].test)
        acc = float(np.mean(pred[rows] == g.labels[rows])) * 100.0
        state.matrix[t, j] = acc


def _embeddings(state: ContinualState, stream: TaskStream, t: int,
                graph: Graph) -> np.ndarray:
    cols, _ = _class_columns(stream, t)
    return state.classifier.forward(graph).value[:, cols]


def _select_buffer(state: ContinualState, stream: TaskStream, t: int,
                   graph: Graph, emb: np.ndarray, config: ExperimentConfig,
                   method: str, pinned: dict[int, list[int]] | None,
                   ) -> tuple[ReplayBuffer, TaskRecord]:
    sampler = _SAMPLER[method]
    spec = CoverageSpec(config.r)
    seen = sorted(stream.classes_through(t).tolist())
    pinned = pinned or {}
    pinned_total = sum(len(v) for c, v in pinned.items() if c in seen)
    sizes = {c: int(stream.train_nodes_of_class(c).size)
             for c in seen if c not in pinned}
    capacity_left = config.buffer_size - pinned_total
    quota = buffer_quota(sizes, capacity_left) if sizes else {}
    samp_rng = rng_mod.stream(state.seed, "sampler", t)

    buckets: dict[int, list[int]] = {}
    div: dict[int, float | None] = {}
    dfc: dict[int, float | None] = {}
    for cls in seen:
        ids = stream.train_nodes_of_class(cls)
        rows = graph.locals_of(ids)
        if cls in pinned:
            buckets[cls] = [int(v) for v in pinned[cls]]
        else:
            e_l = min(quota[cls], ids.size)
            class_emb = emb[rows]
            if sampler == "cd":
                buckets[cls] = select_buffer_cd(class_emb, ids, e_l, spec)
            elif sampler == "mf":
                feat = graph.features[rows]
                buckets[cls] = select_buffer_mf(feat, ids, e_l)
            elif sampler == "cm":
                intro = stream.task_of_class(cls)
                other = [c for c in stream.tasks[intro].classes if c != cls]
                other_ids = (np.concatenate([stream.train_nodes_of_class(c)
                                             for c in other])
                             if other else np.empty(0, dtype=np.int64))
                other_emb = emb[graph.locals_of(other_ids)] if other_ids.size \
                    else np.empty((0, emb.shape[1]))
                buckets[cls] = select_buffer_cm(class_emb, ids, other_emb, e_l, spec)
            elif sampler == "random":
                buckets[cls] = select_buffer_random(ids, e_l, samp_rng)
            elif sampler == "clustering":
                buckets[cls] = select_buffer_clustering(class_emb, ids, e_l,
                                                        samp_rng)
            else:  # pragma: no cover
                raise ValueError(f"unknown sampler {sampler}")
        brows = graph.locals_of(buckets[cls])
        div[cls] = metrics.buff_div(emb, brows, rows)
        dfc[cls] = metrics.dist_from_center(emb, brows, rows)

    buffer = ReplayBuffer(config.buffer_size, buckets)
    record = TaskRecord(
        task=t,
        quota={int(c): int(q) for c, q in quota.items()},
        buffer={int(c): list(map(int, v)) for c, v in buckets.items()},
        buffer_homophily=buffer_homophily_table(graph, buffer),
        buff_div=div,
        dist_from_center=dfc,
        isolated_buffered=isolated_nodes(graph, buffer.all_nodes()),
    )
    return buffer, record


def _final_corr_div(state: ContinualState, stream: TaskStream) -> None:
    t_final = stream.num_tasks - 1
    cols, seen = _class_columns(stream, t_final)
    for j, task in enumerate(stream.tasks):
        g = state.graphs[j]
        logits = state.classifier.forward(g).value
        emb = logits[:, cols]
        pred = seen[np.argmax(emb, axis=1)]
        test_rows = g.locals_of(task.test)
        for cls in task.classes:
            mask = g.labels[test_rows] == cls
            rows_cls = test_rows[mask]
            correct = rows_cls[pred[rows_cls] == cls]
            train_rows = g.locals_of(stream.train_nodes_of_class(cls))
            center = emb[train_rows].mean(axis=0)
            state.corr_div[int(cls)] = metrics.corr_div(emb, correct, rows_cls,
                                                        center)


def run_task(state: ContinualState, stream: TaskStream, t: int,
             config: ExperimentConfig, method: str,
             pinned: dict[int, list[int]] | None = None) -> ContinualState:
    """Run one task end to end, mutating and returning the state."""
    if method not in _SAMPLER:
        raise ValueError(f"unknown method {method!r}")
    if t != state.next_task:
        raise ValueError(f"tasks must run in order; expected {state.next_task}, got {t}")
    started = time.perf_counter()
    refinement = _REFINEMENT[method]

    homo_before = homo_after = None
    delta_added = delta_deleted = 0
    if t == 0:
        graph = advance_snapshot(stream, 0, None)
    else:
        pristine = advance_snapshot(stream, t, state.graphs[t - 1])
        graph = pristine
        if refinement is not None and not state.buffer.is_empty():
            table = buffer_homophily_table(pristine, state.buffer)
            homo_before = float(np.mean([m for m, _ in table.values()])) if table else None
            refined = None
            if refinement == "lp":
                z = _train_link_predictor(stream, t, pristine, state.buffer,
                                          config, state.seed)
                if z is not None:
                    refined = refine_structure(
                        pristine, state.buffer, state.candidates, z,
                        config.n_add, config.tau, config.sl_ratio,
                        rng_mod.stream(state.seed, "sl_mask", t), task=t,
                    )
            elif refinement == "boost":
                pools = {c: stream.train_nodes_of_class(c)
                         for c in state.buffer.buckets}
                refined = homophily_boost_edges(
                    pristine, state.buffer, config.n_add, pools,
                    rng_mod.stream(state.seed, "boost", t), task=t,
                )
            if refined is not None:
                graph = refined.graph
                delta_added = len(refined.added)
                delta_deleted = len(refined.deleted)
                state.delta_log.extend(refined.added)
                state.delta_log.extend(refined.deleted)
                table = buffer_homophily_table(graph, state.buffer)
                homo_after = float(np.mean([m for m, _ in table.values()])) if table else None

    state.graphs.append(graph)
    _train_classifier(state, stream, t, graph, config)
    _evaluate_row(state, stream, t)

    emb = _embeddings(state, stream, t, graph)
    state.buffer, record = _select_buffer(state, stream, t, graph, emb,
                                          config, method, pinned)
    state.candidates = build_candidates(state.buffer, emb, graph, config.k_cand)

    record.homophily_before = homo_before
    record.homophily_after = homo_after
    record.delta_added = delta_added
    record.delta_deleted = delta_deleted
    record.wall_seconds = time.perf_counter() - started
    state.records.append(record)
    state.next_task = t + 1

    if t == stream.num_tasks - 1:
        _final_corr_div(state, stream)
    return state


def run_seed(stream: TaskStream, config: ExperimentConfig, method: str,
             seed: int, pinned: dict[int, list[int]] | None = None,
             resplit: bool = True) -> ContinualState:
    """One full pass over the stream for a single master seed."""
    st = stream.resplit(rng_mod.derived_seed(seed, "split")) if resplit else stream
    state = init_state(st, config, seed)
    for t in range(st.num_tasks):
        run_task(state, st, t, config, method, pinned=pinned)
    return state


def summarize_seed(state: ContinualState) -> dict:
    matrix = state.matrix
    return {
        "seed": state.seed,
        "matrix": [[None if np.isnan(v) else float(v) for v in row]
                   for row in matrix],
        "pm": metrics.pm(matrix),
        "fm": metrics.fm(matrix),
        "diag_mean": float(np.mean(np.diag(matrix))),
        "tasks": [
            {
                "task": r.task + 1,
                "quota": r.quota,
                "buffer": r.buffer,
                "buffer_homophily": {c: [m, s] for c, (m, s) in
                                     r.buffer_homophily.items()},
                "buff_div": r.buff_div,
                "dist_from_center": r.dist_from_center,
                "homophily_before": r.homophily_before,
                "homophily_after": r.homophily_after,
                "delta_added": r.delta_added,
                "delta_deleted": r.delta_deleted,
                "isolated_buffered": r.isolated_buffered,
            }
            for r in state.records
        ],
        "corr_div": state.corr_div,
        "wall_seconds": [r.wall_seconds for r in state.records],
    }


def _mean_or_none(values) -> float | None:
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else None


def aggregate_seeds(per_seed: list[dict]) -> dict:
    pms = np.array([s["pm"] for s in per_seed])
    fms = np.array([s["fm"] for s in per_seed if s["fm"] is not None])
    div_means = [
        _mean_or_none([v for task in s["tasks"]
                       for v in task["buff_div"].values()])
        for s in per_seed
    ]
    dfc_means = [
        _mean_or_none([v for task in s["tasks"]
                       for v in task["dist_from_center"].values()])
        for s in per_seed
    ]
    corr_means = [_mean_or_none(s["corr_div"].values()) for s in per_seed]
    uplifts = []
    for s in per_seed:
        pairs = [(task["homophily_before"], task["homophily_after"])
                 for task in s["tasks"]
                 if task["homophily_before"] is not None
                 and task["homophily_after"] is not None]
        if pairs:
            uplifts.append(float(np.mean([a - b for b, a in pairs])))
    return {
        "pm_mean": float(pms.mean()),
        "pm_std": float(pms.std()),
        "fm_mean": float(fms.mean()) if fms.size else None,
        "fm_std": float(fms.std()) if fms.size else None,
        "buff_div_mean": _mean_or_none(div_means),
        "dist_from_center_mean": _mean_or_none(dfc_means),
        "corr_div_mean": _mean_or_none(corr_means),
        "homophily_uplift_mean": _mean_or_none(uplifts),
        "homophily_uplift_positive_seeds": sum(1 for u in uplifts if u > 0),
    }


def run_experiment(stream: TaskStream, config: ExperimentConfig, method: str,
                   seeds: list[int] | None = None,
                   pinned: dict[int, list[int]] | None = None,
                   resplit: bool = True) -> dict:
    """Multi-seed experiment; returns the report body (see reports module).

    Each seed re-derives its own stratified split from the stream's
    construction provenance (so methods compared at equal seeds share
    splits), then runs every task in order.
    """
    seeds = list(seeds) if seeds is not None else config.seed_list()
    if not seeds:
        raise ValueError("need at least one seed")
    per_seed = []
    wall = {}
    for seed in seeds:
        state = run_seed(stream, config, method, seed, pinned=pinned,
                         resplit=resplit)
        summary = summarize_seed(state)
        # wall clock must not live in the deterministic part of the report
        wall[str(seed)] = summary.pop("wall_seconds")
        per_seed.append(summary)
    return {
        "method": method,
        "seeds": seeds,
        "per_seed": per_seed,
        "aggregate": aggregate_seeds(per_seed),
        "eval_graph_policy": "task-i snapshot with its refined adjacency as of task i",
        "timing": {"per_seed_task_seconds": wall,
                   "total_seconds": float(sum(sum(v) for v in wall.values()))},
    }
