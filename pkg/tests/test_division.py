import numpy as np
import pytest

import oracles
from conftest import make_graph, random_graph
from graphcert.division import (
    HashScheme,
    TaskKind,
    digest_to_index,
    divide_edge_centric,
    divide_node_centric,
    edge_subgraph_index,
    hash_to_index,
    node_subgraph_index,
    pad_index,
)
from graphcert.graph import Perturbation, apply_perturbation

MD5_L8 = HashScheme("md5", 8)


def test_pad_index():
    assert pad_index(12, 4) == "0012"
    assert pad_index(0, 3) == "000"
    with pytest.raises(ValueError, match="id exceeds pad length"):
        pad_index(12345, 4)


def test_hash_to_index_trivial_cases():
    assert hash_to_index(b"anything", 1) == 1
    assert digest_to_index(bytes(16), 30) == 1
    assert digest_to_index(b"\x00" * 15 + b"\x1f", 30) == 31 % 30 + 1


def test_digest_is_read_big_endian():
    assert digest_to_index(b"\x01\x00", 7) == 256 % 7 + 1
    assert digest_to_index(b"\x00\x01", 7) == 1 % 7 + 1


# frozen from tests/oracles.py (pure-Python MD5, big-endian reduction)
def test_hash_to_index_md5_frozen():
    assert hash_to_index(b"0000000500000007", 30) == 27
    assert oracles.bucket("0000000500000007", 30) == 27


def test_edge_index_frozen():
    assert edge_subgraph_index(1, 2, 30, MD5_L8) == 17
    assert edge_subgraph_index(2, 1, 30, MD5_L8) == 17
    assert oracles.bucket(oracles.padded(1, 8) + oracles.padded(2, 8), 30) == 17


def test_node_index_frozen():
    assert node_subgraph_index(42, 30, MD5_L8) == 28
    assert oracles.bucket(oracles.padded(42, 8), 30) == 28
    assert node_subgraph_index(9, 1) == 1
    assert node_subgraph_index(42, 30) == node_subgraph_index(42, 30)


def test_edge_index_symmetric_for_undirected_only():
    assert edge_subgraph_index(5, 7, 30) == edge_subgraph_index(7, 5, 30)
    assert edge_subgraph_index(5, 7, 1) == 1
    msgs = {edge_subgraph_index(5, 7, 10**6, directed=True), edge_subgraph_index(7, 5, 10**6, directed=True)}
    assert len(msgs) == 2


def test_sha256_scheme_differs_from_md5():
    a = [edge_subgraph_index(u, u + 1, 97, HashScheme("sha256")) for u in range(20)]
    b = [edge_subgraph_index(u, u + 1, 97, HashScheme("md5")) for u in range(20)]
    assert a != b
    with pytest.raises(ValueError):
        HashScheme("sha1")


def test_edgeless_graph_node_task():
    g = make_graph(4, [])
    subs = divide_edge_centric(g, 3, task=TaskKind.NODE)
    assert len(subs) == 3
    for s in subs:
        assert s.nodes == g.nodes and not s.edges
        assert np.array_equal(s.x, g.x)


def test_path_partition_frozen(path4):
    subs = divide_edge_centric(path4, 2)
    # oracle buckets for (0,1),(1,2),(2,3) at T=2, L=10: [1, 1, 2]
    assert subs[1].edges == {(0, 1), (1, 2)}
    assert subs[2].edges == {(2, 3)}


def test_single_bucket_returns_graph(path4):
    assert divide_edge_centric(path4, 1)[1] == path4
    gsub = divide_edge_centric(path4, 1, task=TaskKind.GRAPH)[1]
    assert gsub.edges == path4.edges and gsub.nodes == path4.nodes


def test_graph_task_drops_isolated_nodes():
    g = make_graph(5, [(0, 1), (1, 2), (2, 3)])  # node 4 isolated
    for s in divide_edge_centric(g, 3, task=TaskKind.GRAPH):
        assert set(s.nodes) == {w for e in s.edges for w in e}


def test_star_node_centric():
    g = make_graph(5, [(0, i) for i in range(1, 5)])
    T = 7
    subs = divide_node_centric(g, T)
    center = node_subgraph_index(0, T)
    assert {(0, i) for i in range(1, 5)} <= subs[center].edges
    for leaf in range(1, 5):
        assert (leaf, 0) in subs[node_subgraph_index(leaf, T)].edges
    assert all(s.directed for s in subs)


def test_directed_input_single_bucket():
    g = make_graph(4, [(0, 1), (2, 1), (3, 0)], directed=True)
    assert divide_node_centric(g, 1)[1].edges == g.edges


def test_cycle6_node_centric_frozen():
    g = make_graph(6, [(i, (i + 1) % 6) for i in range(6)])
    subs = divide_node_centric(g, 3)
    # per-node buckets from the oracle at T=3, L=10
    expected_idx = [2, 1, 3, 3, 2, 3]
    assert sum(len(s.edges) for s in subs) == 12
    for u in range(6):
        outs = {(u, (u + 1) % 6), (u, (u - 1) % 6)}
        assert outs <= subs[expected_idx[u]].edges


def test_node_centric_graph_task_purification():
    g = make_graph(6, [(i, (i + 1) % 6) for i in range(6)])
    subs = divide_node_centric(g, 3, task=TaskKind.GRAPH)
    for i, s in enumerate(subs, start=1):
        (hub,) = s.virtual_nodes
        assert hub == 5 + 1 + i
        members = [u for u in g.nodes if node_subgraph_index(u, 3) == i]
        assert set(s.nodes) == set(members) | {hub}
        assert np.array_equal(s.feature(hub), np.zeros(g.dim))
        assert {(u, hub) for u in members} <= s.edges
        assert all(a in members for a, _ in s.edges)


def test_self_loop_handling():
    g = make_graph(3, [(1, 1), (0, 2)])
    e = divide_edge_centric(g, 5)
    assert (1, 1) in e[edge_subgraph_index(1, 1, 5)].edges
    n = divide_node_centric(g, 5)
    assert (1, 1) in n[node_subgraph_index(1, 5)].edges
    assert sum(len(s.edges) for s in n) == 3


def test_partition_and_colocation_random():
    rng = np.random.default_rng(1)
    for _ in range(200):
        g = random_graph(rng, max_nodes=12)
        T = int(rng.integers(1, 8))
        subs = divide_edge_centric(g, T)
        seen = set()
        for s in subs:
            assert not (s.edges & seen)
            seen |= s.edges
        assert seen == g.edges
        nsubs = divide_node_centric(g, T)
        for u in g.nodes:
            holders = [i for i, s in enumerate(nsubs, 1) if any(a == u for a, _ in s.edges)]
            assert holders in ([], [node_subgraph_index(u, T)])


def test_division_is_deterministic():
    rng = np.random.default_rng(2)
    for _ in range(20):
        g = random_graph(rng)
        for fn in (divide_edge_centric, divide_node_centric):
            for task in TaskKind:
                a, b = fn(g, 4, task=task), fn(g, 4, task=task)
                assert all(x == y for x, y in zip(a, b))


def _edge_multisets(subs):
    return [s.edges for s in subs]


def test_locality_under_single_edge_edit():
    rng = np.random.default_rng(3)
    for _ in range(100):
        g = random_graph(rng, max_nodes=8)
        if g.num_nodes < 2:
            continue
        u, v = sorted(rng.choice(g.num_nodes, 2, replace=False).tolist())
        p = Perturbation.create(g, edges_deleted=[(u, v)]) if g.has_edge(u, v) else \
            Perturbation.create(g, edges_added=[(u, v)])
        gp = apply_perturbation(g, p)
        for fn, limit in ((divide_edge_centric, 1), (divide_node_centric, 2)):
            a, b = fn(g, 5), fn(gp, 5)
            assert sum(x.edges != y.edges for x, y in zip(a, b)) <= limit


def test_locality_under_node_injection():
    rng = np.random.default_rng(4)
    for _ in range(100):
        g = random_graph(rng, max_nodes=8)
        w = g.num_nodes
        nbrs = [u for u in g.nodes if rng.random() < 0.6]
        gp = apply_perturbation(g, Perturbation.create(g, nodes_added={w: ([0.0, 0.0], [(u, w) for u in nbrs])}))
        a, b = divide_node_centric(g, 5), divide_node_centric(gp, 5)
        # outside w's own bucket, the only new edges point into w, which has no out-edges there
        into_w = lambda s: {(x, y) for x, y in s.edges if y != w}  # noqa: E731
        changed = [i for i, (x, y) in enumerate(zip(a, b), 1) if into_w(y) != x.edges]
        assert changed in ([], [node_subgraph_index(w, 5)])
        a, b = divide_edge_centric(g, 5), divide_edge_centric(gp, 5)
        assert sum(x.edges != y.edges for x, y in zip(a, b)) <= len(nbrs)


def test_gnncert_equivalence_small():
    g = make_graph(6, [(0, 1), (1, 2), (2, 5), (3, 4), (0, 5)])
    ours = divide_edge_centric(g, 3, task=TaskKind.GRAPH)
    ref = oracles.gnncert_edge_division(g.nodes, g.edges, 3)
    for s, (_, es) in zip(ours, ref):
        assert s.edges == es
        assert set(s.nodes) == {w for e in es for w in e}
