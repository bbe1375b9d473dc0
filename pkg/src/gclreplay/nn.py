"""Attention-based graph encoders, loss functions, and the optimizer.

The classifier is a stack of single-head graph attention layers: layer ``l``
computes ``h_i = act(sum_j alpha_ij W h_j)`` over each node's neighbors plus
a self-loop, with the usual LeakyReLU(0.2) attention logits and a softmax
normalization per target node. ELU sits between layers; the final layer is
linear so its output rows are logits. The link predictor reuses the same
encoder family with its own parameters plus a linear class head, and scores
node pairs by cosine similarity mapped to [0,1].
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .autodiff import Tensor
from .errors import NumericalError
from .graphs import Graph

logger = logging.getLogger(__name__)

SCORE_EPS = 1e-7   # scores are clamped to [SCORE_EPS, 1-SCORE_EPS] before logs
ATTN_SLOPE = 0.2


class ParamStore:
    """Named trainable tensors with gradient slots."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self._params:
            raise ValueError(f"parameter {name!r} already exists")
        t = Tensor(np.array(value, dtype=np.float64), requires_grad=True)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def items(self):
        return self._params.items()

    def names(self) -> list[str]:
        return list(self._params)

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.grad = None

    def check_finite(self) -> None:
        for name, p in self._params.items():
            if not np.all(np.isfinite(p.value)):
                raise NumericalError(f"parameter {name!r} contains non-finite values")

    def copy_values_from(self, other: "ParamStore") -> None:
        for name, p in self._params.items():
            p.value = other[name].value.copy()

    # flat binary dump with a text index: "name<TAB>shape<TAB>offset"
    def save(self, path) -> None:
        path = Path(path)
        blobs, index, offset = [], [], 0
        for name, p in sorted(self._params.items()):
            raw = np.ascontiguousarray(p.value).tobytes()
            index.append(f"{name}\t{','.join(map(str, p.value.shape))}\t{offset}")
            blobs.append(raw)
            offset += len(raw)
        path.with_suffix(".bin").write_bytes(b"".join(blobs))
        path.with_suffix(".idx").write_text("\n".join(index) + "\n")

    def load(self, path) -> None:
        path = Path(path)
        blob = path.with_suffix(".bin").read_bytes()
        for line in path.with_suffix(".idx").read_text().splitlines():
            name, shape_s, offset_s = line.split("\t")
            shape = tuple(int(s) for s in shape_s.split(",") if s)
            count = int(np.prod(shape)) if shape else 1
            start = int(offset_s)
            arr = np.frombuffer(blob, dtype=np.float64, count=count, offset=start)
            self._params[name].value = arr.reshape(shape).copy()


def glorot(rng: np.random.Generator, shape: tuple[int, ...],
           fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class GatLayer:
    def __init__(self, store: ParamStore, name: str, in_dim: int, out_dim: int,
                 rng: np.random.Generator):
        self.w = store.add(f"{name}.W", glorot(rng, (in_dim, out_dim), in_dim, out_dim))
        # the two halves of the attention vector over [Wh_i || Wh_j]
        self.a_src = store.add(f"{name}.a_src",
                               glorot(rng, (out_dim, 1), 2 * out_dim, 1))
        self.a_dst = store.add(f"{name}.a_dst",
                               glorot(rng, (out_dim, 1), 2 * out_dim, 1))

    def forward(self, x, mp, final: bool) -> tuple[Tensor, np.ndarray]:
        """Returns (node outputs, attention coefficients per directed edge)."""
        if isinstance(x, sp.spmatrix):
            h = ad.sparse_matmul(x, self.w)
        else:
            h = ad.matmul(x, self.w)
        s_src = ad.matmul(h, self.a_src)
        s_dst = ad.matmul(h, self.a_dst)
        e_src = ad.gather_rows(s_src, mp.src, adjoint=mp.scatter_src)
        e_dst = ad.gather_rows(s_dst, mp.dst, adjoint=mp.scatter_dst)
        logits = ad.leaky_relu(ad.add(e_src, e_dst), ATTN_SLOPE)
        # max-shift is constant w.r.t. gradients (cancels in the softmax)
        shift = ad.segment_max(logits.value[:, 0], mp.dst, mp.num_nodes)
        expd = ad.texp(ad.sub(logits, Tensor(shift[mp.dst][:, None])))
        denom = ad.scatter_sum(expd, mp.scatter_dst, mp.dst)
        alpha = ad.div(expd, ad.gather_rows(denom, mp.dst, adjoint=mp.scatter_dst))
        msg = ad.mul(alpha, ad.gather_rows(h, mp.src, adjoint=mp.scatter_src))
        out = ad.scatter_sum(msg, mp.scatter_dst, mp.dst)
        if not final:
            out = ad.elu(out)
        return out, alpha.value[:, 0]


class GatEncoder:
    """Multi-layer single-head attention encoder over one graph snapshot."""

    def __init__(self, store: ParamStore, prefix: str, in_dim: int,
                 hidden_dim: int, out_dim: int, num_layers: int,
                 rng: np.random.Generator):
        dims = [in_dim] + [hidden_dim] * (num_layers - 1) + [out_dim]
        self.layers = [
            GatLayer(store, f"{prefix}.layer{l}", dims[l], dims[l + 1], rng)
            for l in range(num_layers)
        ]

    def forward(self, graph: Graph) -> Tensor:
        out, _ = self.forward_with_attention(graph)
        return out

    def forward_with_attention(self, graph: Graph) -> tuple[Tensor, list[np.ndarray]]:
        mp = graph.message_passing
        x = graph.features_csr
        alphas = []
        out = None
        last = len(self.layers) - 1
        for l, layer in enumerate(self.layers):
            out, alpha = layer.forward(x, mp, final=(l == last))
            alphas.append(alpha)
            x = out
        return out, alphas


def build_classifier(store: ParamStore, in_dim: int, hidden_dim: int,
                     num_classes: int, num_layers: int,
                     rng: np.random.Generator) -> GatEncoder:
    return GatEncoder(store, "cls", in_dim, hidden_dim, num_classes,
                      num_layers, rng)


class LinkPredictor:
    """Encoder with its own parameters plus a linear class head on z."""

    def __init__(self, store: ParamStore, in_dim: int, hidden_dim: int,
                 num_classes: int, num_layers: int, rng: np.random.Generator):
        self.store = store
        self.encoder = GatEncoder(store, "lp", in_dim, hidden_dim, hidden_dim,
                                  num_layers, rng)
        self.head = store.add("lp.head",
                              glorot(rng, (hidden_dim, num_classes),
                                     hidden_dim, num_classes))

    def encode(self, graph: Graph) -> Tensor:
        return self.encoder.forward(graph)

    def class_logits(self, z: Tensor) -> Tensor:
        return ad.matmul(z, self.head)


# -- pairwise link scores ---------------------------------------------------


def cosine_link_score(z_i: np.ndarray, z_j: np.ndarray) -> float:
    """(cos(z_i, z_j) + 1) / 2 for two embedding rows; symmetric by
    construction. A zero-norm row yields the neutral score 0.5 (logged)."""
    z_i = np.asarray(z_i, dtype=np.float64).ravel()
    z_j = np.asarray(z_j, dtype=np.float64).ravel()
    ni, nj = np.linalg.norm(z_i), np.linalg.norm(z_j)
    if ni == 0.0 or nj == 0.0:
        logger.warning("cosine score on zero-norm embedding; returning 0.5")
        return 0.5
    cos = float(np.dot(z_i, z_j) / (ni * nj))
    return min(1.0, max(0.0, (cos + 1.0) / 2.0))


def pair_scores_tensor(z: Tensor, pairs: np.ndarray) -> Tensor:
    """Differentiable [0,1] scores for an (m,2) array of row-index pairs."""
    zi = ad.gather_rows(z, pairs[:, 0])
    zj = ad.gather_rows(z, pairs[:, 1])
    dot = ad.tsum(ad.mul(zi, zj), axis=1, keepdims=True)
    ni = ad.clip(ad.tsqrt(ad.tsum(ad.mul(zi, zi), axis=1, keepdims=True) + 1e-30),
                 1e-8, np.inf)
    nj = ad.clip(ad.tsqrt(ad.tsum(ad.mul(zj, zj), axis=1, keepdims=True) + 1e-30),
                 1e-8, np.inf)
    cos = ad.div(dot, ad.mul(ni, nj))
    return ad.clip((cos + 1.0) * 0.5, 0.0, 1.0)


def pair_scores(z: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    """Inference-time scores, clamped to [eps, 1-eps] like the loss sees."""
    if pairs.shape[0] == 0:
        return np.empty(0)
    zi, zj = z[pairs[:, 0]], z[pairs[:, 1]]
    dot = np.sum(zi * zj, axis=1)
    norms = np.linalg.norm(zi, axis=1) * np.linalg.norm(zj, axis=1)
    zero = norms == 0.0
    if np.any(zero):
        logger.warning("%d zero-norm embeddings in pair scoring; using 0.5",
                       int(zero.sum()))
        norms[zero] = 1.0
        dot[zero] = 0.0
    s = (dot / norms + 1.0) / 2.0
    return np.clip(s, SCORE_EPS, 1.0 - SCORE_EPS)


# -- losses ------------------------------------------------------------------


def cross_entropy_loss(logits: Tensor, rows: np.ndarray, labels: np.ndarray,
                       classes: np.ndarray) -> Tensor:
    """Mean of -log softmax(h_i)[y_i] over the given rows, with the softmax
    restricted to the seen ``classes`` (global class ids, sorted)."""
    rows = np.asarray(rows, dtype=np.int64)
    if rows.size == 0:
        raise ValueError("cross entropy over an empty node set")
    labels = np.asarray(labels, dtype=np.int64)
    classes = np.asarray(classes, dtype=np.int64)
    pos = np.searchsorted(classes, labels)
    if np.any(pos >= classes.size) or np.any(classes[pos] != labels):
        raise ValueError("labels outside the seen class set")
    sub = ad.gather_rows(logits, rows)
    subc = ad.take_columns(sub, classes)
    shift = Tensor(subc.value.max(axis=1, keepdims=True))
    centered = ad.sub(subc, shift)
    lse = ad.tlog(ad.tsum(ad.texp(centered), axis=1, keepdims=True))
    logp = ad.sub(centered, lse)
    onehot = np.zeros((rows.size, classes.size))
    onehot[np.arange(rows.size), pos] = 1.0
    picked = ad.tsum(ad.mul(logp, Tensor(onehot)))
    return ad.mul(picked, Tensor(-1.0 / rows.size))


def link_loss(scores: Tensor, indicator: np.ndarray) -> Tensor:
    """Binary cross entropy, summed over the sampled pairs.

    ``indicator`` is 1 for an existing edge, 0 for a sampled non-edge.
    Scores are clamped to [eps, 1-eps] before the logs.
    """
    indicator = np.asarray(indicator, dtype=np.float64).reshape(-1, 1)
    if indicator.size == 0:
        raise ValueError("link loss over an empty pair sample")
    s = ad.clip(scores, SCORE_EPS, 1.0 - SCORE_EPS)
    y = Tensor(indicator)
    pos_term = ad.mul(y, ad.tlog(s))
    neg_term = ad.mul(Tensor(1.0 - indicator), ad.tlog(ad.sub(Tensor(1.0), s)))
    return ad.mul(ad.tsum(ad.add(pos_term, neg_term)), Tensor(-1.0))


def replay_weighted_loss(logits: Tensor, train_rows, train_labels,
                         buffer_rows, buffer_labels, beta: float,
                         classes: np.ndarray) -> Tensor:
    """beta * CE(current train set) + (1-beta) * CE(replay buffer).

    When the buffer is empty (first task) the second term is dropped and the
    loss is beta * CE(train); symmetrically for an empty train set. Both
    empty is an error.
    """
    n_train = len(train_rows)
    n_buf = len(buffer_rows)
    if n_train == 0 and n_buf == 0:
        raise ValueError("both the train set and the buffer are empty")
    if n_buf == 0:
        return ad.mul(cross_entropy_loss(logits, train_rows, train_labels, classes),
                      Tensor(beta))
    if n_train == 0:
        return ad.mul(cross_entropy_loss(logits, buffer_rows, buffer_labels, classes),
                      Tensor(1.0 - beta))
    l_train = cross_entropy_loss(logits, train_rows, train_labels, classes)
    l_buf = cross_entropy_loss(logits, buffer_rows, buffer_labels, classes)
    return ad.add(ad.mul(l_train, Tensor(beta)), ad.mul(l_buf, Tensor(1.0 - beta)))


def combine_lp_loss(l_link: Tensor, l_node: Tensor, lam: float) -> Tensor:
    """lam * link loss + (1-lam) * node loss."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0,1]")
    return ad.add(ad.mul(l_link, Tensor(lam)), ad.mul(l_node, Tensor(1.0 - lam)))


# -- optimizer ----------------------------------------------------------------


class Adam:
    """Adam with the standard defaults; rejects non-finite gradients."""

    def __init__(self, store: ParamStore, lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.store = store
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self._m = {name: np.zeros_like(p.value) for name, p in store.items()}
        self._v = {name: np.zeros_like(p.value) for name, p in store.items()}

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1 ** self.t
        bc2 = 1.0 - b2 ** self.t
        for name, p in self.store.items():
            g = p.grad
            if g is None:
                g = np.zeros_like(p.value)
            elif not np.all(np.isfinite(g)):
                raise NumericalError(
                    f"non-finite gradient in {name!r} "
                    f"({int(np.sum(~np.isfinite(g)))} bad entries); step rejected"
                )
            m = self._m[name]
            v = self._v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p.value = p.value - self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            p.grad = None
        self.store.check_finite()


# -- misc external interfaces --------------------------------------------------


def dump_embeddings_csv(path, node_ids: np.ndarray, embeddings: np.ndarray) -> None:
    """Write node embeddings as CSV (node_id, e0, e1, ...) for external
    projection/plotting tools."""
    emb = np.asarray(embeddings)
    with open(path, "w") as fh:
        width = emb.shape[1] if emb.ndim == 2 else 1
        fh.write("node_id," + ",".join(f"e{i}" for i in range(width)) + "\n")
        for nid, row in zip(node_ids, np.atleast_2d(emb)):
            fh.write(str(int(nid)) + "," + ",".join(repr(float(x)) for x in row) + "\n")
