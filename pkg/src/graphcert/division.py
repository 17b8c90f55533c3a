"""Hash-based division of a graph into T subgraphs.

Edge-centric division buckets every edge by the hash of its two padded
endpoint ids. Node-centric division splits undirected edges into two
directed halves and buckets each directed edge by the hash of its source,
so all outgoing edges of a node land in the same subgraph.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache
from enum import Enum
from typing import Callable

import numpy as np

from .graph import Edge, Graph, canonicalize_edge


class Strategy(str, Enum):
    EDGE = "edge"
    NODE = "node"


class TaskKind(str, Enum):
    NODE = "node"
    GRAPH = "graph"


@dataclass(frozen=True)
class Task:
    kind: TaskKind
    target: int | None = None

    @classmethod
    def node(cls, v: int) -> "Task":
        return cls(TaskKind.NODE, int(v))

    @classmethod
    def graph(cls) -> "Task":
        return cls(TaskKind.GRAPH)

    @property
    def is_node(self) -> bool:
        return self.kind is TaskKind.NODE


_ALGORITHMS: dict[str, Callable[[bytes], "hashlib._Hash"]] = {
    "md5": hashlib.md5,
    "sha256": hashlib.sha256,
}


@dataclass(frozen=True)
class HashScheme:
    algorithm: str = "md5"
    pad_length: int = 10

    def __post_init__(self):
        if self.algorithm not in _ALGORITHMS:
            raise ValueError(f"unsupported hash {self.algorithm!r}; choose from {sorted(_ALGORITHMS)}")
        if self.pad_length < 1:
            raise ValueError("pad_length must be positive")

    def digest(self, message: bytes) -> bytes:
        return _ALGORITHMS[self.algorithm](message).digest()


def pad_index(u: int, length: int) -> str:
    if u < 0:
        raise ValueError(f"node id {u} is negative")
    s = str(int(u))
    if len(s) > length:
        raise ValueError(f"id exceeds pad length: {u} has {len(s)} digits > {length}")
    return s.rjust(length, "0")


def digest_to_index(digest: bytes, T: int) -> int:
    """Big-endian digest integer reduced to a 1-based bucket."""
    if T < 1:
        raise ValueError("T must be >= 1")
    return int.from_bytes(digest, "big") % T + 1


def hash_to_index(message: bytes, T: int, scheme: HashScheme = HashScheme()) -> int:
    return digest_to_index(scheme.digest(message), T)


@lru_cache(maxsize=1 << 16)
def edge_subgraph_index(u: int, v: int, T: int, scheme: HashScheme = HashScheme(), directed: bool = False) -> int:
    a, b = canonicalize_edge(u, v, directed)
    msg = (pad_index(a, scheme.pad_length) + pad_index(b, scheme.pad_length)).encode("ascii")
    return hash_to_index(msg, T, scheme)


@lru_cache(maxsize=1 << 16)
def node_subgraph_index(u: int, T: int, scheme: HashScheme = HashScheme()) -> int:
    return hash_to_index(pad_index(u, scheme.pad_length).encode("ascii"), T, scheme)


@dataclass(frozen=True)
class SubgraphSet:
    T: int
    strategy: Strategy
    task: TaskKind
    subgraphs: tuple[Graph, ...]

    def __post_init__(self):
        assert len(self.subgraphs) == self.T

    def __getitem__(self, i: int) -> Graph:
        """1-based access, matching bucket indices."""
        if not 1 <= i <= self.T:
            raise IndexError(i)
        return self.subgraphs[i - 1]

    def __iter__(self):
        return iter(self.subgraphs)

    def __len__(self):
        return self.T


def _task_kind(task) -> TaskKind:
    if isinstance(task, Task):
        return task.kind
    return TaskKind(task)


def _restrict(g: Graph, keep: list[int]) -> tuple[tuple[int, ...], np.ndarray, tuple | None]:
    rows = [g.index[u] for u in keep]
    x = g.x[rows] if rows else np.zeros((0, g.dim))
    labels = tuple(g.labels[r] for r in rows) if g.labels is not None else None
    return tuple(keep), x, labels


def divide_edge_centric(g: Graph, T: int, scheme: HashScheme = HashScheme(), task=TaskKind.NODE) -> SubgraphSet:
    kind = _task_kind(task)
    if T < 1:
        raise ValueError("T must be >= 1")
    buckets: list[set[Edge]] = [set() for _ in range(T)]
    for (u, v) in g.edges:
        buckets[edge_subgraph_index(u, v, T, scheme, g.directed) - 1].add((u, v))
    subs = []
    for es in buckets:
        if kind is TaskKind.NODE:
            subs.append(Graph._make(g.nodes, es, g.x, g.directed, g.labels, g.graph_label))
        else:
            # isolated nodes are dropped per bucket
            touched = sorted({w for e in es for w in e})
            nodes, x, labels = _restrict(g, touched)
            subs.append(Graph._make(nodes, es, x, g.directed, labels, g.graph_label))
    return SubgraphSet(T, Strategy.EDGE, kind, tuple(subs))


def directed_halves(g: Graph) -> set[Edge]:
    if g.directed:
        return set(g.edges)
    out: set[Edge] = set()
    for u, v in g.edges:
        out.add((u, v))
        out.add((v, u))
    return out


def divide_node_centric(g: Graph, T: int, scheme: HashScheme = HashScheme(), task=TaskKind.NODE) -> SubgraphSet:
    kind = _task_kind(task)
    if T < 1:
        raise ValueError("T must be >= 1")
    node_idx = {u: node_subgraph_index(u, T, scheme) for u in g.nodes}
    buckets: list[set[Edge]] = [set() for _ in range(T)]
    for (u, v) in directed_halves(g):
        buckets[node_idx[u] - 1].add((u, v))
    subs = []
    top = max(g.nodes, default=-1)
    for i, es in enumerate(buckets, start=1):
        if kind is TaskKind.NODE:
            subs.append(Graph._make(g.nodes, es, g.x, True, g.labels, g.graph_label))
            continue
        keep = [u for u in g.nodes if node_idx[u] == i]
        kept = set(keep)
        inner = {(a, b) for (a, b) in es if a in kept and b in kept}
        nodes, x, labels = _restrict(g, keep)
        hub = top + 1 + i
        inner |= {(u, hub) for u in keep}
        nodes = nodes + (hub,)
        x = np.vstack([x, np.zeros((1, g.dim))])
        if labels is not None:
            labels = labels + (None,)
        subs.append(Graph._make(nodes, inner, x, True, labels, g.graph_label, frozenset({hub})))
    return SubgraphSet(T, Strategy.NODE, kind, tuple(subs))


def divide(g: Graph, T: int, scheme: HashScheme, strategy, task) -> SubgraphSet:
    if Strategy(strategy) is Strategy.EDGE:
        return divide_edge_centric(g, T, scheme, task)
    return divide_node_centric(g, T, scheme, task)
