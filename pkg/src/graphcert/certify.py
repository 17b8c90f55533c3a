"""Majority-vote classifier over subgraph predictions and its certificate."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .division import HashScheme, Strategy, SubgraphSet, Task, TaskKind, divide
from .gnn import GcnParams, gcn_forward, predict_graph, _argmax
from .graph import Graph, Perturbation, check_perturbation, derived_edge_sets


@dataclass(frozen=True)
class VoteTally:
    counts: tuple[int, ...]

    @property
    def T(self) -> int:
        return sum(self.counts)

    @property
    def num_classes(self) -> int:
        return len(self.counts)


def tally_votes(predictions: Iterable[int], num_classes: int) -> VoteTally:
    counts = [0] * num_classes
    for y in predictions:
        y = int(y)
        if not 0 <= y < num_classes:
            raise ValueError(f"class {y} outside [0, {num_classes})")
        counts[y] += 1
    return VoteTally(tuple(counts))


def voting_predict(tally: VoteTally) -> tuple[int, int]:
    """Top class and runner-up, each breaking ties toward the smaller index."""
    c = tally.counts
    if len(c) < 2:
        raise ValueError("need at least two classes")
    ya = max(range(len(c)), key=lambda y: (c[y], -y))
    yb = max((y for y in range(len(c)) if y != ya), key=lambda y: (c[y], -y))
    return ya, yb


def certified_size(tally: VoteTally) -> int:
    ya, yb = voting_predict(tally)
    gap = tally.counts[ya] - tally.counts[yb] - int(ya > yb)
    return max(gap // 2, 0)


def perturbation_size(p: Perturbation, g: Graph, strategy) -> int:
    """Edge-centric: edges touched; node-centric: edges flipped plus nodes touched."""
    check_perturbation(g, p)
    flipped = len(p.edges_added) + len(p.edges_deleted)
    if Strategy(strategy) is Strategy.EDGE:
        ev_plus, ev_minus, ev_r = derived_edge_sets(g, p)
        return flipped + len(ev_plus) + len(ev_minus) + len(ev_r)
    return flipped + len(p.nodes_added) + len(p.nodes_deleted) + len(p.features_rewritten)


@dataclass(frozen=True)
class Certificate:
    voted_class: int
    runner_up: int
    tally: VoteTally
    certified_size: int
    strategy: Strategy
    task: Task
    scheme: HashScheme = HashScheme()
    pool_virtual: bool = True

    @property
    def M(self) -> int:
        return self.certified_size

    @property
    def T(self) -> int:
        return self.tally.T

    def to_json(self) -> dict:
        return {
            "class": self.voted_class,
            "runner_up": self.runner_up,
            "counts": list(self.tally.counts),
            "M": self.certified_size,
        }


def subgraph_predictions(subs: SubgraphSet, task: Task, params: GcnParams, pool_virtual: bool = True) -> list[int]:
    """Base-classifier prediction on each subgraph, in bucket order."""
    preds = []
    for sub in subs:
        if task.kind is TaskKind.NODE:
            preds.append(_argmax(gcn_forward(sub, params)[sub.index[task.target]]))
        else:
            preds.append(predict_graph(sub, params, pool_virtual))
    return preds


def _check_task(g: Graph, task: Task) -> None:
    if task.kind is TaskKind.NODE and task.target not in g.index:
        raise KeyError(f"target node {task.target} not in graph")


def vote(g: Graph, task: Task, T: int, scheme: HashScheme, strategy, params: GcnParams,
         pool_virtual: bool = True) -> tuple[list[int], VoteTally]:
    _check_task(g, task)
    subs = divide(g, T, scheme, strategy, task.kind)
    preds = subgraph_predictions(subs, task, params, pool_virtual)
    return preds, tally_votes(preds, params.num_classes)


def certificate_from_tally(tally: VoteTally, strategy, task: Task, scheme: HashScheme,
                           pool_virtual: bool = True) -> Certificate:
    ya, yb = voting_predict(tally)
    return Certificate(ya, yb, tally, certified_size(tally), Strategy(strategy), task, scheme, pool_virtual)


def certify(g: Graph, task: Task, T: int, scheme: HashScheme, strategy, params: GcnParams,
            pool_virtual: bool = True) -> Certificate:
    """Voted class plus the largest perturbation size that cannot change it."""
    _, tally = vote(g, task, T, scheme, strategy, params, pool_virtual)
    return certificate_from_tally(tally, strategy, task, scheme, pool_virtual)


def certified_accuracy(certs: Sequence[Certificate], labels: Sequence[int], m: int) -> float:
    if not certs:
        raise ValueError("empty dataset")
    hits = sum(1 for c, y in zip(certs, labels) if c.voted_class == y and c.certified_size >= m)
    return hits / len(certs)


def certified_accuracy_curve(certs: Sequence[Certificate], labels: Sequence[int],
                             m_values: Iterable[int]) -> list[tuple[int, float]]:
    """Fraction of targets voted correctly with certificate at least m, per m."""
    if len(certs) != len(labels):
        raise ValueError("one label per certificate is required")
    return [(int(m), certified_accuracy(certs, labels, m)) for m in m_values]


def max_certifiable(T: int) -> int:
    return T // 2


__all__ = [
    "VoteTally", "Certificate", "tally_votes", "voting_predict", "certified_size",
    "perturbation_size", "certify", "certified_accuracy_curve", "vote",
    "subgraph_predictions", "certificate_from_tally", "max_certifiable",
]
