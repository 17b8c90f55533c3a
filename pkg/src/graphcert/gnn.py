"""Mean-aggregation GCN with directed message passing.

Each layer computes ``h_v = ReLU(W . mean({h_u : u in N_in(v)} | {h_v}))``;
the last layer is linear and yields logits. Undirected edges carry messages
both ways, directed edges only from source to target.

Inference (:func:`gcn_forward`) evaluates every node with a fixed, per-node
summation order, so a node's logits are bitwise identical whenever its
receptive field is. Training uses a batched sparse path with analytic
gradients.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .division import HashScheme, Strategy, TaskKind, divide
from .graph import Graph

log = logging.getLogger(__name__)

EMPTY_GRAPH_CLASS = 0


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(f"loss became non-finite ({loss}) at epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True, eq=False)
class GcnParams:
    """Per-layer weights; ``layers[k]`` has shape ``(d_{k+1}, d_k)``."""

    layers: tuple[np.ndarray, ...]

    def __post_init__(self):
        for k, w in enumerate(self.layers):
            if w.ndim != 2:
                raise ValueError(f"layer {k} is not a matrix")
            if k and w.shape[1] != self.layers[k - 1].shape[0]:
                raise ValueError(
                    f"layer {k} expects {w.shape[1]} inputs but layer {k - 1} emits {self.layers[k - 1].shape[0]}"
                )
            if not np.all(np.isfinite(w)):
                raise ValueError(f"layer {k} has non-finite entries")

    @classmethod
    def from_arrays(cls, layers: Sequence[np.ndarray]) -> "GcnParams":
        frozen = []
        for w in layers:
            w = np.array(w, dtype=float)
            w.setflags(write=False)
            frozen.append(w)
        return cls(tuple(frozen))

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.layers[0].shape[1],) + tuple(w.shape[0] for w in self.layers)

    @property
    def K(self) -> int:
        return len(self.layers)

    @property
    def num_classes(self) -> int:
        return self.layers[-1].shape[0]

    def __eq__(self, other):
        if not isinstance(other, GcnParams):
            return NotImplemented
        return len(self.layers) == len(other.layers) and all(
            a.shape == b.shape and np.array_equal(a, b) for a, b in zip(self.layers, other.layers)
        )


def init_params(dims: Sequence[int], seed: int) -> GcnParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights from a seeded PCG64 stream."""
    rng = np.random.Generator(np.random.PCG64(seed))
    layers = []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(d_in)
        layers.append(rng.uniform(-bound, bound, size=(d_out, d_in)))
    return GcnParams.from_arrays(layers)


def _message_pairs(g: Graph) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(src, dst, count) row indices of every message including the self term.

    Pairs are sorted by (dst, src) so each node accumulates its inputs in
    ascending-id order regardless of the rest of the graph.
    """
    idx = g.index
    pairs = {(i, i) for i in range(len(g.nodes))}
    for u, v in g.edges:
        a, b = idx[u], idx[v]
        pairs.add((a, b))
        if not g.directed:
            pairs.add((b, a))
    ordered = sorted(pairs, key=lambda p: (p[1], p[0]))
    src = np.fromiter((p[0] for p in ordered), dtype=np.intp, count=len(ordered))
    dst = np.fromiter((p[1] for p in ordered), dtype=np.intp, count=len(ordered))
    count = np.bincount(dst, minlength=len(g.nodes)).astype(float)
    return src, dst, count


def _rowwise_matmul(a: np.ndarray, w: np.ndarray) -> np.ndarray:
    # a @ w.T with a fixed accumulation order per output entry
    out = np.zeros((a.shape[0], w.shape[0]))
    for j in range(a.shape[1]):
        out += np.multiply.outer(a[:, j], w[:, j])
    return out


def gcn_forward(g: Graph, params: GcnParams) -> np.ndarray:
    """Per-node logits, shape ``(num_nodes, num_classes)``, rows in ``g.nodes`` order."""
    n = len(g.nodes)
    if n and g.x.shape[1] != params.dims[0]:
        raise ValueError(f"graph features have dim {g.x.shape[1]} but params expect {params.dims[0]}")
    if n == 0:
        return np.zeros((0, params.num_classes))
    src, dst, count = _message_pairs(g)
    h = np.asarray(g.x, dtype=float)
    for k, w in enumerate(params.layers):
        agg = np.zeros_like(h)
        np.add.at(agg, dst, h[src])
        agg /= count[:, None]
        h = _rowwise_matmul(agg, w)
        if k < params.K - 1:
            h = np.maximum(h, 0.0)
    return h


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def _argmax(logits: np.ndarray) -> int:
    # np.argmax returns the first maximum, i.e. the smaller class index on ties
    return int(np.argmax(softmax(logits)))


def predict_node(g: Graph, params: GcnParams, v: int) -> int:
    if v not in g.index:
        raise KeyError(f"node {v} not in graph")
    return _argmax(gcn_forward(g, params)[g.index[v]])


def pooled_logits(g: Graph, params: GcnParams, pool_virtual: bool = True) -> np.ndarray | None:
    logits = gcn_forward(g, params)
    rows = [i for i, u in enumerate(g.nodes) if pool_virtual or u not in g.virtual_nodes]
    if not rows:
        return None
    acc = np.zeros(params.num_classes)
    for i in rows:
        acc += logits[i]
    return acc / len(rows)


def predict_graph(g: Graph, params: GcnParams, pool_virtual: bool = True) -> int:
    pooled = pooled_logits(g, params, pool_virtual)
    if pooled is None:
        return EMPTY_GRAPH_CLASS
    return _argmax(pooled)


# ---------------------------------------------------------------------------
# training


@dataclass
class _Batch:
    """Disjoint union of many graphs as one sparse propagation problem."""

    prop: sp.csr_matrix
    x: np.ndarray
    # node task: labeled rows and their weights; graph task: pooling matrix rows
    rows: np.ndarray
    targets: np.ndarray
    weights: np.ndarray
    pool: sp.csr_matrix | None = None


def _propagation_matrix(g: Graph) -> sp.csr_matrix:
    src, dst, count = _message_pairs(g) if g.nodes else (np.zeros(0, int), np.zeros(0, int), np.zeros(0))
    n = len(g.nodes)
    return sp.csr_matrix((1.0 / count[dst], (dst, src)), shape=(n, n))


def _make_batch(items: Sequence[tuple[Graph, object]], kind: TaskKind, pool_virtual: bool = True) -> _Batch:
    props, xs = [], []
    rows, targets, weights = [], [], []
    pool_r, pool_c, pool_v = [], [], []
    offset = 0
    items = [(g, y) for g, y in items if g.nodes]
    n_items = len(items)
    for gi, (g, labels) in enumerate(items):
        props.append(_propagation_matrix(g))
        xs.append(np.asarray(g.x, dtype=float))
        if kind is TaskKind.NODE:
            lab = [(g.index[u], y) for u, y in sorted(labels.items()) if u in g.index]
            for r, y in lab:
                rows.append(offset + r)
                targets.append(y)
                weights.append(1.0 / (len(lab) * n_items))
        else:
            keep = [i for i, u in enumerate(g.nodes) if pool_virtual or u not in g.virtual_nodes]
            for i in keep:
                pool_r.append(gi)
                pool_c.append(offset + i)
                pool_v.append(1.0 / len(keep))
            rows.append(gi)
            targets.append(int(labels))
            weights.append(1.0 / n_items)
        offset += len(g.nodes)
    prop = sp.block_diag(props, format="csr") if props else sp.csr_matrix((0, 0))
    pool = None
    if kind is TaskKind.GRAPH:
        pool = sp.csr_matrix((pool_v, (pool_r, pool_c)), shape=(n_items, offset))
    return _Batch(
        prop=prop,
        x=np.vstack(xs) if xs else np.zeros((0, 1)),
        rows=np.asarray(rows, dtype=np.intp),
        targets=np.asarray(targets, dtype=np.intp),
        weights=np.asarray(weights, dtype=float),
        pool=pool,
    )


def _loss_and_grads(batch: _Batch, layers: Sequence[np.ndarray], need_grad: bool = True):
    hs = [batch.x]
    aggs, zs = [], []
    h = batch.x
    K = len(layers)
    for k, w in enumerate(layers):
        a = batch.prop @ h
        z = a @ w.T
        aggs.append(a)
        zs.append(z)
        h = np.maximum(z, 0.0) if k < K - 1 else z
        hs.append(h)
    logits = hs[-1]
    out = batch.pool @ logits if batch.pool is not None else logits[batch.rows]
    probs = softmax(out)
    picked = probs[np.arange(len(batch.targets)), batch.targets]
    loss = float(-np.sum(batch.weights * np.log(np.maximum(picked, 1e-300))))
    if not need_grad:
        return loss, None
    d_out = probs.copy()
    d_out[np.arange(len(batch.targets)), batch.targets] -= 1.0
    d_out *= batch.weights[:, None]
    if batch.pool is not None:
        dz = batch.pool.T @ d_out
    else:
        dz = np.zeros_like(logits)
        np.add.at(dz, batch.rows, d_out)
    grads = [None] * K
    for k in range(K - 1, -1, -1):
        grads[k] = dz.T @ aggs[k]
        if k == 0:
            break
        dh = batch.prop.T @ (dz @ layers[k])
        dz = dh * (zs[k - 1] > 0)
    return loss, grads


def _as_item(g: Graph, labels, kind: TaskKind):
    if labels is None:
        raise ValueError("labels are required for training and gradients")
    if kind is TaskKind.NODE:
        if not isinstance(labels, Mapping) or not labels:
            raise ValueError("node task needs a non-empty node -> class mapping")
    return (g, labels)


def loss(g: Graph, params: GcnParams, labels, task=TaskKind.NODE, pool_virtual: bool = True) -> float:
    kind = TaskKind(task) if not isinstance(task, TaskKind) else task
    batch = _make_batch([_as_item(g, labels, kind)], kind, pool_virtual)
    return _loss_and_grads(batch, params.layers, need_grad=False)[0]


def backward(g: Graph, params: GcnParams, labels, task=TaskKind.NODE, pool_virtual: bool = True) -> list[np.ndarray]:
    """Gradient of mean cross-entropy w.r.t. every weight matrix.

    ``labels`` is a node -> class mapping for the node task or a single class
    for the graph task.
    """
    kind = TaskKind(task) if not isinstance(task, TaskKind) else task
    batch = _make_batch([_as_item(g, labels, kind)], kind, pool_virtual)
    return _loss_and_grads(batch, params.layers)[1]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    learning_rate: float = 0.1
    seed: int = 0
    hidden: tuple[int, ...] = (16,)
    num_classes: int | None = None
    task: TaskKind = TaskKind.NODE
    augment_with_subgraphs: bool = False
    T: int = 1
    scheme: HashScheme = field(default_factory=HashScheme)
    strategy: Strategy = Strategy.EDGE
    pool_virtual: bool = True

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")


def _infer_classes(dataset, kind: TaskKind) -> int:
    if kind is TaskKind.NODE:
        return 1 + max(max(lab.values()) for _, lab in dataset)
    return 1 + max(int(y) for _, y in dataset)


def augmented(dataset, cfg: TrainConfig):
    """Dataset plus each graph's T subgraphs carrying the same labels."""
    items = list(dataset)
    if not cfg.augment_with_subgraphs:
        return items
    out = []
    for g, labels in items:
        out.append((g, labels))
        for sub in divide(g, cfg.T, cfg.scheme, cfg.strategy, cfg.task):
            if not sub.nodes:
                continue
            if cfg.task is TaskKind.NODE:
                sub_labels = {u: y for u, y in labels.items() if u in sub.index}
                if not sub_labels:
                    continue
                out.append((sub, sub_labels))
            else:
                out.append((sub, labels))
    return out


def train(dataset: Sequence[tuple[Graph, object]], cfg: TrainConfig, init: GcnParams | None = None) -> GcnParams:
    """Full-batch gradient descent on mean cross-entropy."""
    if not dataset:
        raise ValueError("empty training set")
    kind = TaskKind(cfg.task)
    dim = dataset[0][0].dim
    if any(g.dim != dim for g, _ in dataset):
        raise ValueError("inconsistent feature dimensions in dataset")
    n_classes = cfg.num_classes or _infer_classes(dataset, kind)
    params = init or init_params((dim, *cfg.hidden, n_classes), cfg.seed)
    if cfg.epochs == 0:
        return params
    batch = _make_batch(augmented(dataset, cfg), kind, cfg.pool_virtual)
    weights = [np.array(w) for w in params.layers]
    for epoch in range(1, cfg.epochs + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            value, grads = _loss_and_grads(batch, weights)
        if not np.isfinite(value) or not all(np.all(np.isfinite(gr)) for gr in grads):
            raise TrainingDiverged(epoch, value)
        with np.errstate(over="ignore", invalid="ignore"):
            for w, gr in zip(weights, grads):
                w -= cfg.learning_rate * gr
        if not all(np.all(np.isfinite(w)) for w in weights):
            raise TrainingDiverged(epoch, float("nan"))
        if epoch % 100 == 0:
            log.debug("epoch %d loss %.6f", epoch, value)
    return GcnParams.from_arrays(weights)
