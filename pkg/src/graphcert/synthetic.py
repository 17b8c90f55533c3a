"""Small seeded graph generators for experiments and sweeps."""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .graph import Graph


def derive_seed(seed: int, stage: str) -> int:
    """Sub-seed for a named pipeline stage, stable across runs and platforms."""
    digest = hashlib.sha256(f"{seed}/{stage}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def _features(rng: np.random.Generator, classes: list[int], dim: int, signal: float) -> np.ndarray:
    means = np.zeros((max(classes, default=0) + 1, dim))
    for c in range(means.shape[0]):
        means[c, c % dim] = signal
    return means[classes] + rng.standard_normal((len(classes), dim))


def two_block_sbm(n_per_block: int, p_in: float, p_out: float, *, dim: int = 4,
                  signal: float = 1.0, seed: int = 0) -> Graph:
    """Two-community stochastic block model; labels are block memberships."""
    for p in (p_in, p_out):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"probability {p} outside [0, 1]")
    if n_per_block < 1:
        raise ValueError("n_per_block must be >= 1")
    rng = np.random.default_rng(seed)
    n = 2 * n_per_block
    block = [0] * n_per_block + [1] * n_per_block
    edges = []
    for u, v in itertools.combinations(range(n), 2):
        p = p_in if block[u] == block[v] else p_out
        if rng.random() < p:
            edges.append((u, v))
    x = _features(rng, block, dim, signal)
    return Graph.build({u: x[u] for u in range(n)}, edges, labels=dict(enumerate(block)))


def caveman(cliques: int, clique_size: int, *, dim: int = 4, signal: float = 1.0, seed: int = 0) -> Graph:
    """Connected caveman graph: cliques joined in a ring by one edge each; labels by clique."""
    if cliques < 1 or clique_size < 1:
        raise ValueError("sizes must be >= 1")
    rng = np.random.default_rng(seed)
    edges = []
    member = []
    for c in range(cliques):
        base = c * clique_size
        member += [c] * clique_size
        edges += list(itertools.combinations(range(base, base + clique_size), 2))
    if cliques > 1:
        for c in range(cliques):
            a = c * clique_size + clique_size - 1
            b = ((c + 1) % cliques) * clique_size
            if a != b:
                edges.append((a, b))
    x = _features(rng, member, dim, signal)
    n = cliques * clique_size
    return Graph.build({u: x[u] for u in range(n)}, edges, labels=dict(enumerate(member)))


def random_tree_edges(n: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    return [(int(rng.integers(0, v)), v) for v in range(1, n)]


def has_cycle(g: Graph) -> bool:
    parent = {u: u for u in g.nodes}

    def find(u):
        while parent[u] != u:
            parent[u] = parent[parent[u]]
            u = parent[u]
        return u

    for a, b in g.edges:
        ra, rb = find(a), find(b)
        if ra == rb:
            return True
        parent[ra] = rb
    return False


def random_graph_class_set(num_graphs: int, size_range: tuple[int, int] = (5, 8), *, dim: int = 4,
                           signal: float = 0.5, seed: int = 0) -> list[Graph]:
    """Graphs labeled 0 (random tree) or 1 (random tree plus one chord), alternating."""
    lo, hi = size_range
    if lo < 3 or hi < lo:
        raise ValueError("size_range must satisfy 3 <= lo <= hi")
    rng = np.random.default_rng(seed)
    graphs = []
    for k in range(num_graphs):
        label = k % 2
        n = int(rng.integers(lo, hi + 1))
        edges = random_tree_edges(n, rng)
        if label == 1:
            present = set(edges)
            missing = [e for e in itertools.combinations(range(n), 2) if e not in present]
            edges.append(missing[int(rng.integers(len(missing)))])
        x = _features(rng, [label] * n, dim, signal)
        graphs.append(Graph.build({u: x[u] for u in range(n)}, edges, graph_label=label))
    return graphs


def family_graph(family: str, n: int, *, dim: int = 3, seed: int = 0, p: float = 0.5) -> Graph:
    """path / cycle / star / complete / er graph on nodes 0..n-1 with random features."""
    rng = np.random.default_rng(seed)
    if family == "path":
        edges = [(i, i + 1) for i in range(n - 1)]
    elif family == "cycle":
        if n < 3:
            raise ValueError("cycle needs at least 3 nodes")
        edges = [(i, (i + 1) % n) for i in range(n)]
    elif family == "star":
        edges = [(0, i) for i in range(1, n)]
    elif family == "complete":
        edges = list(itertools.combinations(range(n), 2))
    elif family == "er":
        edges = [e for e in itertools.combinations(range(n), 2) if rng.random() < p]
    else:
        raise ValueError(f"unknown family {family!r}")
    x = rng.standard_normal((n, dim))
    return Graph.build({u: x[u] for u in range(n)}, edges)


def family(name: str, max_nodes: int, *, dim: int = 3, seed: int = 0, connected_only: bool = True) -> Iterator[Graph]:
    start = 3 if name == "cycle" else 2
    for n in range(start, max_nodes + 1):
        g = family_graph(name, n, dim=dim, seed=derive_seed(seed, f"{name}{n}"))
        if connected_only and name == "er" and not _connected(g):
            continue
        yield g


def _connected(g: Graph) -> bool:
    if not g.nodes:
        return True
    seen = {g.nodes[0]}
    stack = [g.nodes[0]]
    while stack:
        u = stack.pop()
        for a, b in g.incident_edges(u):
            w = b if a == u else a
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == len(g.nodes)


@dataclass(frozen=True)
class SyntheticSpec:
    """Which generator to run; ``options`` are forwarded as keyword arguments."""

    family: str = "sbm"
    options: dict = field(default_factory=dict)
    seed: int = 0

    def task(self) -> str:
        return "graph" if self.family == "graphs" else "node"


def generate(spec: SyntheticSpec) -> list[Graph]:
    opts = dict(spec.options)
    if spec.family == "sbm":
        return [two_block_sbm(opts.pop("n_per_block", 8), opts.pop("p_in", 0.9), opts.pop("p_out", 0.05),
                              seed=spec.seed, **opts)]
    if spec.family == "caveman":
        return [caveman(opts.pop("cliques", 3), opts.pop("clique_size", 4), seed=spec.seed, **opts)]
    if spec.family == "graphs":
        return random_graph_class_set(opts.pop("num_graphs", 20), tuple(opts.pop("size_range", (5, 8))),
                                      seed=spec.seed, **opts)
    raise ValueError(f"unknown synthetic family {spec.family!r}")


def split(items: list[int], fractions: tuple[float, float, float], seed: int) -> dict[str, list[int]]:
    """Seeded shuffle into train/val/test by the given fractions."""
    rng = np.random.default_rng(seed)
    order = [items[i] for i in rng.permutation(len(items))]
    n_train = int(round(fractions[0] * len(items)))
    n_val = int(round(fractions[1] * len(items)))
    return {
        "train": sorted(order[:n_train]),
        "val": sorted(order[n_train:n_train + n_val]),
        "test": sorted(order[n_train + n_val:]),
    }
