"""Attack enumeration and the brute-force check of certificates and bounds.

Every attack is replayed through the real division and base classifier, so
the counts here are observed, not derived from the bounds they check.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .certify import Certificate, perturbation_size, tally_votes, voting_predict
from .division import HashScheme, Strategy, SubgraphSet, Task, TaskKind, divide
from .gnn import GcnParams, _argmax, gcn_forward, predict_graph
from .graph import Edge, Graph, Perturbation, apply_perturbation, canonicalize_edge


class AttackKind(str, Enum):
    EDGE_ADD = "edge_add"
    EDGE_DELETE = "edge_delete"
    NODE_INJECT = "node_inject"
    NODE_DELETE = "node_delete"
    FEATURE_REWRITE = "feature_rewrite"


ALL_KINDS = frozenset(AttackKind)


class EnumerationTooLarge(ValueError):
    def __init__(self, count: int, cap: int):
        super().__init__(f"exhaustive enumeration has at least {count} attacks, cap is {cap}")
        self.count = count


@dataclass(frozen=True)
class AttackSpace:
    """Which manipulations to try and how many.

    ``budget`` is measured with :func:`perturbation_size` under ``strategy``.
    ``protected`` nodes (the target in node classification) are never deleted
    or rewritten. Injected nodes connect only to surviving original nodes.
    """

    budget: int
    strategy: Strategy = Strategy.EDGE
    allowed: frozenset[AttackKind] = ALL_KINDS
    feature_candidates: tuple[tuple[float, ...], ...] = ()
    min_incident_edges: int = 1
    max_incident_edges: int = 2
    max_injected: int = 1
    protected: frozenset[int] = frozenset()
    exhaustive: bool = True
    seed: int = 0
    samples: int = 100
    cap: int = 10**6

    def __post_init__(self):
        if self.budget < 0:
            raise ValueError("budget must be non-negative")
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        object.__setattr__(self, "allowed", frozenset(AttackKind(k) for k in self.allowed))


def default_feature_candidates(g: Graph, extreme: float = 1e3, copies: int = 1) -> tuple[tuple[float, ...], ...]:
    """Zeros, large positive and negative constants, and copies of other nodes' rows."""
    d = g.dim
    out = [(0.0,) * d, (extreme,) * d, (-extreme,) * d]
    seen = set(out)
    for row in g.x:
        t = tuple(float(v) for v in row)
        if t not in seen and copies > 0:
            out.append(t)
            seen.add(t)
            copies -= 1
    return tuple(out)


@dataclass(frozen=True)
class _Atom:
    kind: AttackKind
    edge: Edge | None = None
    node: int | None = None
    candidate: int | None = None

    @property
    def nodes(self) -> set[int]:
        if self.edge is not None:
            return set(self.edge)
        return {self.node}


class _Builder:
    """Atoms, injection options and incremental size bookkeeping for one graph."""

    def __init__(self, g: Graph, space: AttackSpace):
        self.g = g
        self.space = space
        cands = space.feature_candidates or default_feature_candidates(g)
        self.cands = tuple(tuple(float(t) for t in c) for c in cands)
        allowed = space.allowed
        nodes = list(g.nodes)
        atoms: list[_Atom] = []
        if AttackKind.EDGE_DELETE in allowed:
            atoms += [_Atom(AttackKind.EDGE_DELETE, edge=e) for e in sorted(g.edges)]
        if AttackKind.EDGE_ADD in allowed:
            if g.directed:
                pairs = [(u, v) for u in nodes for v in nodes if u != v]
            else:
                pairs = list(itertools.combinations(nodes, 2))
            atoms += [_Atom(AttackKind.EDGE_ADD, edge=e) for e in pairs if e not in g.edges]
        if AttackKind.NODE_DELETE in allowed:
            atoms += [_Atom(AttackKind.NODE_DELETE, node=u) for u in nodes if u not in space.protected]
        if AttackKind.FEATURE_REWRITE in allowed:
            atoms += [
                _Atom(AttackKind.FEATURE_REWRITE, node=u, candidate=c)
                for u in nodes if u not in space.protected
                for c in range(len(self.cands))
            ]
        self.atoms = atoms
        self.injections: list[tuple[tuple[int, ...], int]] = []
        if AttackKind.NODE_INJECT in allowed and space.max_injected > 0:
            hi = min(space.max_incident_edges, len(nodes))
            for k in range(space.min_incident_edges, hi + 1):
                for nbrs in itertools.combinations(nodes, k):
                    for c in range(len(self.cands)):
                        self.injections.append((nbrs, c))
        self.top = max(nodes, default=-1)

    def _injection_edges(self, w: int, nbrs: Sequence[int]) -> frozenset[Edge]:
        return frozenset(canonicalize_edge(u, w, self.g.directed) for u in nbrs)

    def _base_state(self, combo: Sequence[int]):
        nodes_added = {}
        touched: set[int] = set()
        for k, j in enumerate(combo):
            nbrs, c = self.injections[j]
            w = self.top + 1 + k
            nodes_added[w] = (self.cands[c], self._injection_edges(w, nbrs))
            touched |= set(nbrs)
        return nodes_added, touched

    def size_of(self, chosen: Sequence[_Atom], nodes_added) -> int:
        return perturbation_size(self.perturbation(chosen, nodes_added), self.g, self.space.strategy)

    def perturbation(self, chosen: Sequence[_Atom], nodes_added) -> Perturbation:
        ea, ed, nd, fr = set(), set(), set(), {}
        for a in chosen:
            if a.kind is AttackKind.EDGE_ADD:
                ea.add(a.edge)
            elif a.kind is AttackKind.EDGE_DELETE:
                ed.add(a.edge)
            elif a.kind is AttackKind.NODE_DELETE:
                nd.add(a.node)
            else:
                fr[a.node] = self.cands[a.candidate]
        return Perturbation(frozenset(ea), frozenset(ed), dict(nodes_added), frozenset(nd), dict(sorted(fr.items())))

    @staticmethod
    def conflicts(a: _Atom, chosen: Sequence[_Atom], inj_touched: set[int]) -> bool:
        for b in chosen:
            if a.kind is AttackKind.NODE_DELETE or b.kind is AttackKind.NODE_DELETE:
                dead = a if a.kind is AttackKind.NODE_DELETE else b
                other = b if dead is a else a
                if dead.node in other.nodes:
                    return True
            if (a.kind is AttackKind.FEATURE_REWRITE and b.kind is AttackKind.FEATURE_REWRITE
                    and a.node == b.node):
                return True
        if a.kind is AttackKind.NODE_DELETE and a.node in inj_touched:
            return True
        return False

    def injection_combos(self) -> Iterator[tuple[int, ...]]:
        for r in range(0, self.space.max_injected + 1):
            if r and not self.injections:
                break
            yield from itertools.combinations_with_replacement(range(len(self.injections)), r)

    def walk(self, budget: int) -> Iterator[Perturbation]:
        for combo in self.injection_combos():
            nodes_added, inj_touched = self._base_state(combo)
            if self.size_of((), nodes_added) > budget:
                continue
            yield from self._dfs([], 0, nodes_added, inj_touched, budget)

    def _dfs(self, chosen: list[_Atom], start: int, nodes_added, inj_touched, budget) -> Iterator[Perturbation]:
        yield self.perturbation(chosen, nodes_added)
        for i in range(start, len(self.atoms)):
            a = self.atoms[i]
            if self.conflicts(a, chosen, inj_touched):
                continue
            chosen.append(a)
            # sizes only grow as atoms are added, so an overflow prunes the branch
            if self.size_of(chosen, nodes_added) <= budget:
                yield from self._dfs(chosen, i + 1, nodes_added, inj_touched, budget)
            chosen.pop()


def count_exhaustive(g: Graph, space: AttackSpace) -> int:
    n = 0
    for _ in _Builder(g, space).walk(space.budget):
        n += 1
        if n > space.cap:
            raise EnumerationTooLarge(n, space.cap)
    return n


def enumerate_attacks(g: Graph, space: AttackSpace) -> Iterator[Perturbation]:
    """Every attack of size <= budget (exhaustive) or a seeded random sample."""
    if space.exhaustive:
        count_exhaustive(g, space)
        yield from _Builder(g, space).walk(space.budget)
    else:
        yield from _random_attacks(g, space)


def _random_attacks(g: Graph, space: AttackSpace) -> Iterator[Perturbation]:
    b = _Builder(g, space)
    rng = np.random.default_rng(space.seed)
    for _ in range(space.samples):
        nodes_added: dict = {}
        inj_touched: set[int] = set()
        n_inj = int(rng.integers(0, space.max_injected + 1)) if b.injections else 0
        for k in range(n_inj):
            nbrs, c = b.injections[int(rng.integers(len(b.injections)))]
            w = b.top + 1 + k
            trial = dict(nodes_added)
            trial[w] = (b.cands[c], b._injection_edges(w, nbrs))
            if b.size_of((), trial) <= space.budget:
                nodes_added = trial
                inj_touched |= set(nbrs)
        chosen: list[_Atom] = []
        order = rng.permutation(len(b.atoms)) if b.atoms else []
        for i in order:
            if rng.random() < 0.5:
                continue
            a = b.atoms[int(i)]
            if b.conflicts(a, chosen, inj_touched):
                continue
            chosen.append(a)
            if b.size_of(chosen, nodes_added) > space.budget:
                chosen.pop()
        yield b.perturbation(chosen, nodes_added)


def theorem_bound(p: Perturbation, g: Graph, strategy) -> int:
    """Maximum number of subgraph predictions ``p`` can alter; equals its perturbation size."""
    return perturbation_size(p, g, strategy)


def _predict_all(subs: SubgraphSet, task: Task, params: GcnParams, pool_virtual: bool,
                 reuse: tuple[SubgraphSet, list] | None = None) -> list:
    """Per-subgraph predictions; node task returns one {node: class} map per subgraph."""
    out = []
    for i, sub in enumerate(subs):
        if reuse is not None and reuse[0].subgraphs[i] == sub:
            out.append(reuse[1][i])
            continue
        if task.kind is TaskKind.NODE:
            logits = gcn_forward(sub, params)
            out.append({u: _argmax(logits[r]) for r, u in enumerate(sub.nodes)})
        else:
            out.append(predict_graph(sub, params, pool_virtual))
    return out


def count_altered(g: Graph, g_prime: Graph, task: Task, T: int, scheme: HashScheme, strategy,
                  params: GcnParams, pool_virtual: bool = True) -> int:
    """Number of bucket indices whose base prediction differs between g and g'."""
    if task.kind is TaskKind.NODE:
        if task.target not in g.index:
            raise KeyError(f"target {task.target} not in the clean graph")
        if task.target not in g_prime.index:
            raise ValueError(f"target {task.target} was deleted; the threat model excludes this")
    a = divide(g, T, scheme, strategy, task.kind)
    b = divide(g_prime, T, scheme, strategy, task.kind)
    pa = _predict_all(a, task, params, pool_virtual)
    pb = _predict_all(b, task, params, pool_virtual, reuse=(a, pa))
    if task.kind is TaskKind.NODE:
        v = task.target
        return sum(x[v] != y[v] for x, y in zip(pa, pb))
    return sum(x != y for x, y in zip(pa, pb))


@dataclass
class ViolationReport:
    violations: list[tuple[Perturbation, int, int]] = field(default_factory=list)
    bound_violations: list[tuple[Perturbation, int, int]] = field(default_factory=list)
    attacks_tried: int = 0
    max_altered: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations and not self.bound_violations


def verify_certificate(g: Graph, cert: Certificate, space: AttackSpace, params: GcnParams) -> ViolationReport:
    """Replay every attack in ``space`` and record any flip of the voted class.

    Also records attacks whose altered-prediction count exceeds their bound.
    """
    task = cert.task
    T, scheme, strategy = cert.T, cert.scheme, cert.strategy
    if task.kind is TaskKind.NODE:
        space = _protect(space, task.target)
    clean = divide(g, T, scheme, strategy, task.kind)
    clean_preds = _predict_all(clean, task, params, cert.pool_virtual)
    report = ViolationReport()
    for p in enumerate_attacks(g, space):
        gp = apply_perturbation(g, p)
        preds = _predict_all(divide(gp, T, scheme, strategy, task.kind), task, params, cert.pool_virtual,
                             reuse=(clean, clean_preds))
        if task.kind is TaskKind.NODE:
            v = task.target
            before = [c[v] for c in clean_preds]
            after = [c[v] for c in preds]
        else:
            before, after = clean_preds, preds
        altered = sum(x != y for x, y in zip(before, after))
        bound = theorem_bound(p, g, strategy)
        report.attacks_tried += 1
        report.max_altered = max(report.max_altered, altered)
        if altered > bound:
            report.bound_violations.append((p, altered, bound))
        voted, _ = voting_predict(tally_votes(after, params.num_classes))
        if voted != cert.voted_class:
            report.violations.append((p, cert.voted_class, voted))
    return report


def _protect(space: AttackSpace, v: int) -> AttackSpace:
    from dataclasses import replace

    return replace(space, protected=space.protected | {v})


# ---------------------------------------------------------------------------
# per-theorem sweeps

MANIPULATIONS = ("edge_flip", "node_inject", "node_delete", "feature_rewrite")


def manipulation_space(name: str, strategy, *, edge_budget: int = 1, max_degree: int = 3,
                       feature_candidates: tuple = (), big: int = 10**6) -> AttackSpace:
    """Attack space containing only one manipulation class, unconstrained by size."""
    kinds = {
        "edge_flip": {AttackKind.EDGE_ADD, AttackKind.EDGE_DELETE},
        "node_inject": {AttackKind.NODE_INJECT},
        "node_delete": {AttackKind.NODE_DELETE},
        "feature_rewrite": {AttackKind.FEATURE_REWRITE},
    }[name]
    return AttackSpace(
        budget=edge_budget if name == "edge_flip" else big,
        strategy=strategy,
        allowed=frozenset(kinds),
        feature_candidates=feature_candidates,
        min_incident_edges=1,
        max_incident_edges=max_degree,
        max_injected=1,
    )


def _single_kind_attacks(g: Graph, name: str, space: AttackSpace) -> Iterator[Perturbation]:
    if name == "edge_flip":
        yield from enumerate_attacks(g, space)
        return
    # exactly one manipulated node per attack
    b = _Builder(g, space)
    if name == "node_inject":
        for combo in itertools.combinations(range(len(b.injections)), 1):
            nodes_added, _ = b._base_state(combo)
            yield b.perturbation((), nodes_added)
    else:
        for a in b.atoms:
            yield b.perturbation((a,), {})


@dataclass
class SweepRow:
    theorem: str
    max_altered: int = 0
    bound: int = 0
    slack: int | None = None
    attacks: int = 0
    failures: int = 0

    def record(self, altered: int, bound: int) -> None:
        self.attacks += 1
        self.max_altered = max(self.max_altered, altered)
        self.bound = max(self.bound, bound)
        s = bound - altered
        self.slack = s if self.slack is None else min(self.slack, s)
        if altered > bound:
            self.failures += 1


def theorem_sweep(graphs: Iterable[Graph], strategy, task_kind, T: int, scheme: HashScheme,
                  params_source: Callable[[Graph], GcnParams] | GcnParams, *,
                  manipulations: Sequence[str] = MANIPULATIONS, edge_budget: int = 1, max_degree: int = 3,
                  feature_candidates: tuple = (), pool_virtual: bool = True,
                  on_failure: Callable | None = None) -> dict[str, SweepRow]:
    """Check altered <= bound for every single-class attack on every graph.

    For the node task every surviving, unrewritten node is a target at once.
    Returns one row per manipulation class with the worst observed slack.
    """
    kind = TaskKind(task_kind)
    rows = {name: SweepRow(name) for name in manipulations}
    for g in graphs:
        params = params_source(g) if callable(params_source) else params_source
        clean = divide(g, T, scheme, strategy, kind)
        probe = Task(kind, g.nodes[0] if g.nodes else None)
        clean_preds = _predict_all(clean, probe, params, pool_virtual)
        for name in manipulations:
            space = manipulation_space(name, strategy, edge_budget=edge_budget, max_degree=max_degree,
                                       feature_candidates=feature_candidates)
            for p in _single_kind_attacks(g, name, space):
                gp = apply_perturbation(g, p)
                preds = _predict_all(divide(gp, T, scheme, strategy, kind), probe, params, pool_virtual,
                                     reuse=(clean, clean_preds))
                bound = theorem_bound(p, g, strategy)
                if kind is TaskKind.NODE:
                    excluded = set(p.nodes_deleted) | set(p.features_rewritten)
                    for v in g.nodes:
                        if v in excluded:
                            continue
                        altered = sum(a[v] != b[v] for a, b in zip(clean_preds, preds))
                        rows[name].record(altered, bound)
                        if altered > bound and on_failure:
                            on_failure(g, p, v, altered, bound)
                else:
                    altered = sum(a != b for a, b in zip(clean_preds, preds))
                    rows[name].record(altered, bound)
                    if altered > bound and on_failure:
                        on_failure(g, p, None, altered, bound)
    return rows
