import numpy as np
import pytest

from conftest import random_graph
from graphcert.division import TaskKind
from graphcert.gnn import (
    GcnParams,
    TrainConfig,
    TrainingDiverged,
    backward,
    gcn_forward,
    init_params,
    loss,
    predict_graph,
    predict_node,
    softmax,
    train,
)
from graphcert.graph import Graph

I2 = GcnParams.from_arrays([np.eye(2)])


def test_isolated_node_identity():
    g = Graph.build({0: [-1.0, 2.0]})
    assert np.array_equal(gcn_forward(g, I2), [[-1.0, 2.0]])


def test_undirected_pair_mean():
    g = Graph.build({0: [1.0, 0.0], 1: [0.0, 3.0]}, [(0, 1)])
    out = gcn_forward(g, I2)
    assert np.allclose(out, [[0.5, 1.5], [0.5, 1.5]])


def test_directed_edge_only_feeds_target():
    g = Graph.build({0: [1.0, 0.0], 1: [0.0, 3.0]}, [(0, 1)], directed=True)
    out = gcn_forward(g, I2)
    assert np.array_equal(out[0], [1.0, 0.0])
    assert np.allclose(out[1], [0.5, 1.5])


def test_relu_on_hidden_layers_only():
    g = Graph.build({0: [1.0, -2.0]})
    p = GcnParams.from_arrays([np.eye(2), -np.eye(2)])
    # hidden: relu(1, -2) = (1, 0); output: (-1, 0) with no relu
    assert np.array_equal(gcn_forward(g, p), [[-1.0, 0.0]])


def test_self_loop_not_double_counted():
    g = Graph.build({0: [2.0, 0.0], 1: [0.0, 2.0]}, [(0, 0), (0, 1)])
    assert np.allclose(gcn_forward(g, I2)[0], [1.0, 1.0])


def test_dimension_mismatch_rejected():
    g = Graph.build({0: [1.0, 2.0, 3.0]})
    with pytest.raises(ValueError, match="dim 3"):
        gcn_forward(g, I2)


def test_predict_node_argmax_and_ties():
    assert predict_node(Graph.build({0: [0.1, 0.9]}), I2, 0) == 1
    assert predict_node(Graph.build({0: [0.5, 0.5]}), I2, 0) == 0
    p3 = GcnParams.from_arrays([np.eye(3)])
    assert predict_node(Graph.build({0: [0.1, 0.9, 0.2]}), p3, 0) == 1
    with pytest.raises(KeyError):
        predict_node(Graph.build({0: [0.1, 0.9]}), I2, 5)


def test_predict_node_hand_computed():
    # W = [[1,-1],[2,1]], x = (1,2): W x = (-1, 4) -> class 1
    p = GcnParams.from_arrays([np.array([[1.0, -1.0], [2.0, 1.0]])])
    g = Graph.build({0: [1.0, 2.0]})
    assert np.array_equal(gcn_forward(g, p), [[-1.0, 4.0]])
    assert predict_node(g, p, 0) == 1


def test_predict_graph_cases():
    one = Graph.build({0: [0.2, 0.7]})
    assert predict_graph(one, I2) == predict_node(one, I2, 0) == 1
    two = Graph.build({0: [1.0, 0.0], 1: [0.0, 1.0]})
    assert predict_graph(two, I2) == 0
    assert predict_graph(Graph.build({}, dim=2), I2) == 0


def test_predict_graph_triangle_hand_computed():
    # every node averages all three: (1/3, 4/3); W = diag(2, -1) -> (2/3, -4/3) -> class 0
    g = Graph.build({0: [1.0, 0.0], 1: [0.0, 1.0], 2: [0.0, 3.0]}, [(0, 1), (1, 2), (0, 2)])
    p = GcnParams.from_arrays([np.diag([2.0, -1.0])])
    assert np.allclose(gcn_forward(g, p), [[2 / 3, -4 / 3]] * 3)
    assert predict_graph(g, p) == 0


def test_virtual_node_pool_switch():
    g = Graph.build({0: [1.0, 0.0], 9: [0.0, 0.0]}, [(0, 9)], directed=True, virtual_nodes=[9])
    p = GcnParams.from_arrays([np.array([[1.0, 0.0], [0.0, 1.0]])])
    # with the hub pooled: mean((1,0), (0.5,0)) = (0.75, 0); without: (1, 0)
    from graphcert.gnn import pooled_logits
    assert np.allclose(pooled_logits(g, p, True), [0.75, 0.0])
    assert np.allclose(pooled_logits(g, p, False), [1.0, 0.0])


def test_softmax_normalized_and_shift_invariant():
    rng = np.random.default_rng(0)
    for _ in range(100):
        z = rng.standard_normal(5) * 50
        p = softmax(z)
        assert abs(p.sum() - 1.0) <= 1e-12
        assert np.allclose(softmax(z + rng.uniform(-100, 100)), p, atol=1e-12)


def _fd_grad(g, params, labels, task, eps=1e-5):
    out = []
    for k, w in enumerate(params.layers):
        gk = np.zeros_like(w)
        for idx in np.ndindex(w.shape):
            ws = [np.array(a) for a in params.layers]
            ws[k][idx] += eps
            lp = loss(g, GcnParams.from_arrays(ws), labels, task)
            ws[k][idx] -= 2 * eps
            lm = loss(g, GcnParams.from_arrays(ws), labels, task)
            gk[idx] = (lp - lm) / (2 * eps)
        out.append(gk)
    return out


def rel_err(a, b):
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-6)


@pytest.mark.parametrize("seed", range(6))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, max_nodes=6, dim=3, directed=bool(seed % 2))
    K = 1 + seed % 3
    dims = [3] + [4] * (K - 1) + [3]
    params = init_params(dims, seed)
    if seed % 3 == 2:
        task, labels = TaskKind.GRAPH, int(rng.integers(3))
    else:
        task, labels = TaskKind.NODE, {u: int(rng.integers(3)) for u in g.nodes}
    analytic = backward(g, params, labels, task)
    numeric = _fd_grad(g, params, labels, task)
    for a, n in zip(analytic, numeric):
        assert rel_err(a, n).max() <= 1e-4


def test_saturated_gradient_vanishes():
    g = Graph.build({0: [1.0, 0.0], 1: [0.0, 1.0]})
    p = GcnParams.from_arrays([np.eye(2) * 1e6])
    grads = backward(g, p, {0: 0, 1: 1})
    assert max(np.linalg.norm(gr) for gr in grads) < 1e-6


def test_single_layer_matches_logistic_regression():
    x = np.array([0.3, -1.2, 2.0])
    w = np.array([[0.1, 0.2, -0.3], [0.5, -0.4, 0.0]])
    g = Graph.build({0: x})
    (grad,) = backward(g, GcnParams.from_arrays([w]), {0: 1})
    expected = np.outer(softmax(w @ x) - np.array([0.0, 1.0]), x)
    assert np.allclose(grad, expected, atol=1e-14)


def test_missing_labels_rejected():
    g = Graph.build({0: [1.0, 0.0]})
    with pytest.raises(ValueError):
        backward(g, I2, None)
    with pytest.raises(ValueError):
        backward(g, I2, {})


def _separable(n=20, seed=0):
    rng = np.random.default_rng(seed)
    feats, labels = {}, {}
    for u in range(n):
        y = u % 2
        feats[u] = [(2 * y - 1) * (1 + rng.random()), rng.standard_normal()]
        labels[u] = y
    return Graph.build(feats), labels


def test_train_zero_epochs_returns_init():
    g, lab = _separable()
    cfg = TrainConfig(epochs=0, seed=5, hidden=(4,), num_classes=2)
    assert train([(g, lab)], cfg) == init_params((2, 4, 2), 5)


def test_train_separable_reaches_full_accuracy():
    g, lab = _separable()
    params = train([(g, lab)], TrainConfig(epochs=500, learning_rate=0.1, seed=1, hidden=(8,)))
    assert all(predict_node(g, params, u) == y for u, y in lab.items())


def test_train_is_bit_reproducible():
    g, lab = _separable()
    cfg = TrainConfig(epochs=50, seed=3, hidden=(8,), augment_with_subgraphs=True, T=3)
    assert train([(g, lab)], cfg) == train([(g, lab)], cfg)


def test_training_divergence_reports_epoch():
    g, lab = _separable()
    with pytest.raises(TrainingDiverged) as err:
        train([(g, lab)], TrainConfig(epochs=50, learning_rate=1e300, seed=0, hidden=(8,)))
    assert err.value.epoch >= 1


def test_params_reject_bad_chain():
    with pytest.raises(ValueError, match="expects"):
        GcnParams.from_arrays([np.zeros((3, 2)), np.zeros((2, 4))])


def test_permutation_equivariance():
    rng = np.random.default_rng(7)
    params = init_params((2, 5, 3), 0)
    for _ in range(20):
        g = random_graph(rng, max_nodes=7, directed=bool(rng.integers(2)))
        perm = rng.permutation(g.num_nodes)
        relabel = {u: int(perm[i]) for i, u in enumerate(g.nodes)}
        h = Graph.build({relabel[u]: g.feature(u) for u in g.nodes},
                        [(relabel[a], relabel[b]) for a, b in g.edges], directed=g.directed)
        a, b = gcn_forward(g, params), gcn_forward(h, params)
        for u in g.nodes:
            assert np.allclose(a[g.index[u]], b[h.index[relabel[u]]], atol=1e-12)


def test_forward_agrees_with_training_path():
    from graphcert.gnn import _make_batch
    rng = np.random.default_rng(8)
    params = init_params((2, 6, 3), 2)
    for _ in range(10):
        g = random_graph(rng, directed=bool(rng.integers(2)))
        batch = _make_batch([(g, {g.nodes[0]: 0})], TaskKind.NODE)
        h = batch.x
        for k, w in enumerate(params.layers):
            h = batch.prop @ h @ w.T
            if k < params.K - 1:
                h = np.maximum(h, 0)
        assert np.allclose(h, gcn_forward(g, params), atol=1e-12)
