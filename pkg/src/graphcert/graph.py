"""Graph and perturbation types shared by every other module."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

Edge = tuple[int, int]


class PerturbationError(ValueError):
    """A perturbation does not fit the graph it is applied to."""


def canonicalize_edge(u: int, v: int, directed: bool) -> Edge:
    if directed:
        return (u, v)
    return (u, v) if u <= v else (v, u)


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable attributed graph.

    ``nodes`` is sorted ascending and ``x`` holds one feature row per node in
    that order. Undirected edges are stored as ``(min, max)``. ``labels`` is
    aligned with ``nodes`` and uses ``None`` for unlabeled nodes.
    ``virtual_nodes`` marks aggregator nodes inserted by node-centric division
    so graph pooling can optionally skip them.
    """

    nodes: tuple[int, ...]
    edges: frozenset[Edge]
    x: np.ndarray
    directed: bool = False
    labels: tuple[int | None, ...] | None = None
    graph_label: int | None = None
    virtual_nodes: frozenset[int] = field(default_factory=frozenset)

    @classmethod
    def build(
        cls,
        features: Mapping[int, Sequence[float]],
        edges: Iterable[Sequence[int]] = (),
        directed: bool = False,
        labels: Mapping[int, int | None] | None = None,
        graph_label: int | None = None,
        dim: int | None = None,
        virtual_nodes: Iterable[int] = (),
    ) -> "Graph":
        """Construct from a node -> feature mapping; edges are canonicalized."""
        nodes = tuple(sorted(features))
        if nodes:
            rows = [np.asarray(features[u], dtype=float) for u in nodes]
            if len({r.shape for r in rows}) == 1 and rows[0].ndim == 1:
                x = np.array(rows, dtype=float)
            else:
                # ragged rows: keep them as objects so validate() can report them
                x = np.empty(len(nodes), dtype=object)
                for i, u in enumerate(nodes):
                    x[i] = np.asarray(features[u], dtype=float)
        else:
            x = np.zeros((0, dim or 1))
        lab = None
        if labels is not None:
            lab = tuple(labels.get(u) for u in nodes)
        e = frozenset(canonicalize_edge(int(a), int(b), directed) for a, b in edges)
        return cls._make(nodes, e, x, directed, lab, graph_label, frozenset(virtual_nodes))

    @classmethod
    def _make(cls, nodes, edges, x, directed, labels, graph_label, virtual_nodes=frozenset()):
        if isinstance(x, np.ndarray) and x.dtype != object and (x.dtype != float or x.flags.writeable):
            x = np.array(x, dtype=float)
            x.setflags(write=False)
        return cls(tuple(nodes), frozenset(edges), x, directed, labels, graph_label, virtual_nodes)

    @cached_property
    def index(self) -> dict[int, int]:
        return {u: i for i, u in enumerate(self.nodes)}

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def dim(self) -> int:
        return int(self.x.shape[1]) if self.x.ndim == 2 else len(self.x[0])

    def feature(self, u: int) -> np.ndarray:
        return self.x[self.index[u]]

    def label(self, u: int) -> int | None:
        if self.labels is None:
            return None
        return self.labels[self.index[u]]

    def has_edge(self, u: int, v: int) -> bool:
        return canonicalize_edge(u, v, self.directed) in self.edges

    def incident_edges(self, u: int) -> set[Edge]:
        return set(self._incidence.get(u, ()))

    def degree(self, u: int) -> int:
        return len(self._incidence.get(u, ()))

    @cached_property
    def _incidence(self) -> dict[int, tuple[Edge, ...]]:
        inc: dict[int, list[Edge]] = {}
        for e in self.edges:
            inc.setdefault(e[0], []).append(e)
            if e[1] != e[0]:
                inc.setdefault(e[1], []).append(e)
        return {u: tuple(sorted(es)) for u, es in inc.items()}

    def sorted_edges(self) -> list[Edge]:
        return sorted(self.edges)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.nodes == other.nodes
            and self.edges == other.edges
            and self.directed == other.directed
            and self.labels == other.labels
            and self.graph_label == other.graph_label
            and self.virtual_nodes == other.virtual_nodes
            and self.x.shape == other.x.shape
            and bool(np.array_equal(self.x, other.x))
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        kind = "directed" if self.directed else "undirected"
        return f"Graph({len(self.nodes)} nodes, {len(self.edges)} {kind} edges, dim={self.dim})"


def validate(graph: Graph, num_classes: int | None = None) -> list[str]:
    """Return a list of invariant violations; empty means the graph is valid."""
    problems: list[str] = []
    node_set = set(graph.nodes)
    if list(graph.nodes) != sorted(node_set) or len(node_set) != len(graph.nodes):
        problems.append("node ids are not a sorted set")
    for u in graph.nodes:
        if u < 0:
            problems.append(f"negative node id {u}")
    for a, b in sorted(graph.edges):
        for end in (a, b):
            if end not in node_set:
                problems.append(f"edge endpoint {end} not in node set")
        if not graph.directed and a > b:
            problems.append(f"edge ({a},{b}) not canonical")
    if graph.nodes:
        if graph.x.dtype == object:
            dims = [len(r) for r in graph.x]
            expected = max(set(dims), key=dims.count)
            for u, d in zip(graph.nodes, dims):
                if d != expected:
                    problems.append(f"node {u} has feature dim {d}, expected {expected}")
        elif graph.x.shape[0] != len(graph.nodes):
            problems.append(f"feature rows {graph.x.shape[0]} != node count {len(graph.nodes)}")
        elif graph.x.shape[1] < 1:
            problems.append("feature dimension must be >= 1")
    if graph.labels is not None:
        if len(graph.labels) != len(graph.nodes):
            problems.append("label vector length differs from node count")
        for u, y in zip(graph.nodes, graph.labels):
            if y is not None and (y < 0 or (num_classes is not None and y >= num_classes)):
                problems.append(f"node {u} has class {y} out of range")
    if graph.graph_label is not None and (
        graph.graph_label < 0 or (num_classes is not None and graph.graph_label >= num_classes)
    ):
        problems.append(f"graph label {graph.graph_label} out of range")
    return problems


@dataclass(frozen=True)
class Perturbation:
    """Declarative arbitrary attack against a specific graph.

    ``nodes_added`` maps a fresh node id to ``(features, incident_edges)``.
    Edges among the original nodes go in ``edges_added``/``edges_deleted``;
    edges touching an injected or deleted node live with that node.
    """

    edges_added: frozenset[Edge] = frozenset()
    edges_deleted: frozenset[Edge] = frozenset()
    nodes_added: Mapping[int, tuple[tuple[float, ...], frozenset[Edge]]] = field(default_factory=dict)
    nodes_deleted: frozenset[int] = frozenset()
    features_rewritten: Mapping[int, tuple[float, ...]] = field(default_factory=dict)

    @classmethod
    def create(
        cls,
        graph: Graph,
        edges_added: Iterable[Sequence[int]] = (),
        edges_deleted: Iterable[Sequence[int]] = (),
        nodes_added: Mapping[int, tuple[Sequence[float], Iterable[Sequence[int]]]] | None = None,
        nodes_deleted: Iterable[int] = (),
        features_rewritten: Mapping[int, Sequence[float]] | None = None,
    ) -> "Perturbation":
        """Build with edges canonicalized for ``graph``'s directedness."""
        d = graph.directed
        canon = lambda es: frozenset(canonicalize_edge(int(a), int(b), d) for a, b in es)  # noqa: E731
        added = {
            int(w): (tuple(float(t) for t in feat), canon(es))
            for w, (feat, es) in (nodes_added or {}).items()
        }
        rewritten = {int(u): tuple(float(t) for t in f) for u, f in (features_rewritten or {}).items()}
        return cls(
            canon(edges_added),
            canon(edges_deleted),
            dict(sorted(added.items())),
            frozenset(int(u) for u in nodes_deleted),
            dict(sorted(rewritten.items())),
        )

    @property
    def is_empty(self) -> bool:
        return not (
            self.edges_added or self.edges_deleted or self.nodes_added
            or self.nodes_deleted or self.features_rewritten
        )

    def injected_edges(self) -> set[Edge]:
        out: set[Edge] = set()
        for _, es in self.nodes_added.values():
            out |= es
        return out

    def __hash__(self) -> int:
        return hash((
            self.edges_added, self.edges_deleted,
            tuple((w, f, es) for w, (f, es) in self.nodes_added.items()),
            self.nodes_deleted, tuple(self.features_rewritten.items()),
        ))


def check_perturbation(graph: Graph, p: Perturbation) -> None:
    """Raise PerturbationError naming the first element that breaks consistency."""
    node_set = set(graph.nodes)
    max_id = max(graph.nodes, default=-1)
    added_ids = set(p.nodes_added)
    for w in sorted(added_ids):
        if w in node_set:
            raise PerturbationError(f"injected node {w} already exists")
        if w <= max_id:
            raise PerturbationError(f"injected node {w} must exceed max node id {max_id}")
    for u in sorted(p.nodes_deleted):
        if u not in node_set:
            raise PerturbationError(f"deleted node {u} not in graph")
    for u in sorted(p.features_rewritten):
        if u not in node_set:
            raise PerturbationError(f"rewritten node {u} not in graph")
        if u in p.nodes_deleted:
            raise PerturbationError(f"node {u} is both deleted and rewritten")
        if len(p.features_rewritten[u]) != graph.dim:
            raise PerturbationError(f"rewritten features of node {u} have wrong dimension")
    touched = added_ids | p.nodes_deleted
    for e in sorted(p.edges_deleted):
        if e not in graph.edges:
            raise PerturbationError(f"deleted edge {e} not in graph")
        if set(e) & touched:
            raise PerturbationError(f"deleted edge {e} touches an injected or deleted node")
    for e in sorted(p.edges_added):
        if e in graph.edges:
            raise PerturbationError(f"added edge {e} already in graph")
        if not set(e) <= node_set:
            raise PerturbationError(f"added edge {e} has an endpoint outside the graph")
        if set(e) & touched:
            raise PerturbationError(f"added edge {e} touches an injected or deleted node")
    alive = (node_set - p.nodes_deleted) | added_ids
    seen: set[Edge] = set()
    for w, (feat, es) in p.nodes_added.items():
        if len(feat) != graph.dim:
            raise PerturbationError(f"injected node {w} features have wrong dimension")
        for e in sorted(es):
            if w not in e:
                raise PerturbationError(f"edge {e} listed under injected node {w} does not touch it")
            if not set(e) <= alive:
                raise PerturbationError(f"injected edge {e} has an endpoint outside the perturbed graph")
            if e in seen:
                continue
            seen.add(e)


def apply_perturbation(graph: Graph, p: Perturbation) -> Graph:
    """Return the perturbed graph; ``graph`` itself is never modified."""
    check_perturbation(graph, p)
    dead = p.nodes_deleted
    edges = {e for e in graph.edges if not (e[0] in dead or e[1] in dead)}
    edges -= p.edges_deleted
    edges |= p.edges_added
    edges |= p.injected_edges()
    feats = {u: graph.x[i] for i, u in enumerate(graph.nodes) if u not in dead}
    for u, f in p.features_rewritten.items():
        feats[u] = np.asarray(f, dtype=float)
    labels = None
    if graph.labels is not None:
        labels = {u: y for u, y in zip(graph.nodes, graph.labels) if u not in dead}
    for w, (f, _) in p.nodes_added.items():
        feats[w] = np.asarray(f, dtype=float)
    nodes = tuple(sorted(feats))
    x = np.array([feats[u] for u in nodes], dtype=float).reshape(len(nodes), graph.dim)
    lab = tuple(labels.get(u) for u in nodes) if labels is not None else None
    return Graph._make(nodes, edges, x, graph.directed, lab, graph.graph_label)


def inverse_perturbation(graph: Graph, p: Perturbation) -> Perturbation:
    """The perturbation that maps ``apply_perturbation(graph, p)`` back to ``graph``.

    Restoring deleted nodes requires ids above the perturbed graph's max id,
    so the inverse only exists when every deleted node is larger than every
    surviving node; otherwise PerturbationError is raised.
    """
    survivors = set(graph.nodes) - p.nodes_deleted
    top = max(survivors | set(p.nodes_added), default=-1)
    if any(u <= top for u in p.nodes_deleted):
        raise PerturbationError("deleted nodes cannot be re-injected below the max surviving id")
    restored = {
        u: (tuple(graph.feature(u)), frozenset(graph.incident_edges(u)))
        for u in p.nodes_deleted
    }
    return Perturbation(
        edges_added=p.edges_deleted,
        edges_deleted=p.edges_added,
        nodes_added=restored,
        nodes_deleted=frozenset(p.nodes_added),
        features_rewritten={u: tuple(graph.feature(u)) for u in p.features_rewritten},
    )


def derived_edge_sets(graph: Graph, p: Perturbation) -> tuple[set[Edge], set[Edge], set[Edge]]:
    """Edges incident to injected, deleted and rewritten nodes, each as a set."""
    ev_plus = p.injected_edges()
    ev_minus: set[Edge] = set()
    for u in p.nodes_deleted:
        ev_minus |= graph.incident_edges(u)
    ev_r: set[Edge] = set()
    for u in p.features_rewritten:
        ev_r |= graph.incident_edges(u)
    return ev_plus, ev_minus, ev_r
