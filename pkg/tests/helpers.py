"""Shared test utilities: small random graphs and the finite-difference
gradient oracle used by both the unit suite and the acceptance gate."""

from __future__ import annotations

import numpy as np

from gclreplay.autodiff import Tensor
from gclreplay.graphs import Graph
from gclreplay.nn import (
    LinkPredictor,
    ParamStore,
    build_classifier,
    combine_lp_loss,
    cross_entropy_loss,
    link_loss,
    pair_scores_tensor,
    replay_weighted_loss,
)


def random_small_graph(rng: np.random.Generator, max_nodes: int = 10,
                       max_feats: int = 4, num_classes: int = 3) -> Graph:
    n = int(rng.integers(3, max_nodes + 1))
    d = int(rng.integers(1, max_feats + 1))
    features = rng.normal(size=(n, d))
    labels = rng.integers(0, num_classes, size=n)
    # make sure at least two classes show up
    labels[0], labels[1] = 0, 1
    edges = set()
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < 0.4:
                edges.add((u, v))
    return Graph(features, labels, edges)


def numeric_grad(loss_fn, param: Tensor, eps: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar loss w.r.t. one tensor."""
    base = param.value.copy()
    grad = np.zeros_like(base)
    flat = base.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        param.value = flat.reshape(base.shape).copy()
        up = loss_fn()
        flat[i] = orig - eps
        param.value = flat.reshape(base.shape).copy()
        down = loss_fn()
        gflat[i] = (up - down) / (2.0 * eps)
        flat[i] = orig
    param.value = base
    return grad


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray,
                       floor: float = 1e-6) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def check_store_gradients(store: ParamStore, loss_builder,
                          tol: float = 1e-4) -> float:
    """Backprop the loss, then FD-check every tensor in the store.

    ``loss_builder`` must rebuild the forward graph from the store's current
    values and return the loss Tensor. Returns the worst relative error.
    """
    store.zero_grad()
    loss = loss_builder()
    loss.backward()
    analytic = {name: (p.grad.copy() if p.grad is not None
                       else np.zeros_like(p.value))
                for name, p in store.items()}
    worst = 0.0
    for name, p in store.items():
        num = numeric_grad(lambda: loss_builder().item(), p)
        err = max_relative_error(analytic[name], num)
        assert err <= tol, f"gradient mismatch for {name}: rel err {err:.2e}"
        worst = max(worst, err)
    store.zero_grad()
    return worst


def _setup_case(seed: int):
    """One random graph plus a classifier and link predictor over it."""
    rng = np.random.default_rng(seed)
    g = random_small_graph(rng)
    classes = np.sort(np.unique(g.labels))
    n = g.num_nodes
    cls_store = ParamStore()
    clf = build_classifier(cls_store, g.feature_dim, 6,
                           int(g.labels.max()) + 1, 2,
                           np.random.default_rng(seed + 1))
    lp_store = ParamStore()
    lp = LinkPredictor(lp_store, g.feature_dim, 5, int(g.labels.max()) + 1, 2,
                       np.random.default_rng(seed + 2))
    rows = rng.permutation(n)
    split = max(1, n // 2)
    train_rows = np.sort(rows[:split])
    buf_rows = np.sort(rows[split:split + max(1, n // 3)])
    # pairs: existing edges as positives (if any) plus random pairs as negatives
    pos = g.edge_array
    k = max(2, min(4, n))
    neg = np.stack([rng.integers(0, n, size=k), rng.integers(0, n, size=k)], axis=1)
    neg = neg[neg[:, 0] != neg[:, 1]]
    if len(neg) == 0:
        neg = np.array([[0, 1]])
    pairs = np.vstack([pos, neg]) if pos.size else neg
    indicator = np.concatenate([np.ones(len(pos)), np.zeros(len(neg))])
    return g, classes, clf, cls_store, lp, lp_store, train_rows, buf_rows, pairs, indicator


def gradient_check_all_losses(seed: int, tol: float = 1e-4) -> dict[str, float]:
    """FD-check every parameter gradient for all five loss functions on one
    random graph; returns the worst relative error per loss."""
    (g, classes, clf, cls_store, lp, lp_store,
     train_rows, buf_rows, pairs, indicator) = _setup_case(seed)
    labels = g.labels
    errs = {}

    errs["classification"] = check_store_gradients(
        cls_store,
        lambda: cross_entropy_loss(clf.forward(g), train_rows,
                                   labels[train_rows], classes),
        tol,
    )
    errs["link"] = check_store_gradients(
        lp_store,
        lambda: link_loss(pair_scores_tensor(lp.encode(g), pairs), indicator),
        tol,
    )
    errs["label_mix"] = check_store_gradients(
        lp_store,
        lambda: replay_weighted_loss(lp.class_logits(lp.encode(g)),
                                     train_rows, labels[train_rows],
                                     buf_rows, labels[buf_rows], 0.3, classes),
        tol,
    )

    def combined():
        z = lp.encode(g)
        l_link = link_loss(pair_scores_tensor(z, pairs), indicator)
        l_node = replay_weighted_loss(lp.class_logits(z), train_rows,
                                      labels[train_rows], buf_rows,
                                      labels[buf_rows], 0.3, classes)
        return combine_lp_loss(l_link, l_node, 0.6)

    errs["combined"] = check_store_gradients(lp_store, combined, tol)
    errs["replay_weighted"] = check_store_gradients(
        cls_store,
        lambda: replay_weighted_loss(clf.forward(g), train_rows,
                                     labels[train_rows], buf_rows,
                                     labels[buf_rows], 0.1, classes),
        tol,
    )
    return errs
