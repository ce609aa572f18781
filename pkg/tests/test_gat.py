import numpy as np
import pytest

from riskprop import autodiff as ad
from riskprop.autodiff import Tensor, backward, grad_check
from riskprop.gat import (
    GATLayerParams,
    build_message_pairs,
    gat_layer_forward,
    gat_stack_forward,
    init_gat_layer,
)

from oracles import dense_adjacency, dense_gat_layer, dense_stack, layers_as_arrays

NO_EDGES = np.zeros((0, 2), dtype=np.int64)


def random_layer(d_in, d_out, heads=1, merge="concat", activation="elu", seed=0):
    return init_gat_layer(np.random.default_rng(seed), d_in, d_out, heads, merge, activation)


def test_single_node_softmax_over_self_loop():
    params = GATLayerParams(
        weights=[Tensor(np.eye(3))], attn=[Tensor(np.zeros(6))], activation="elu"
    )
    x = np.array([[1.5, -0.7, 0.0]])
    out, (dst, src, alphas) = gat_layer_forward(
        params, Tensor(x), NO_EDGES, return_attention=True
    )
    assert dst.tolist() == [0] and src.tolist() == [0]
    np.testing.assert_array_equal(alphas[0], [1.0])
    np.testing.assert_allclose(out.data, np.where(x > 0, x, np.expm1(x)), atol=1e-15)


def test_isolated_nodes_independent_and_permutable():
    params = random_layer(3, 4, heads=2, seed=1)
    x = np.random.default_rng(2).standard_normal((2, 3))
    out = gat_layer_forward(params, Tensor(x), NO_EDGES).data
    flipped = gat_layer_forward(params, Tensor(x[::-1].copy()), NO_EDGES).data
    np.testing.assert_array_equal(out, flipped[::-1])


@pytest.mark.parametrize(
    "heads,merge,activation",
    [(1, "concat", "identity"), (1, "concat", "elu"), (3, "concat", "elu"), (3, "mean", "elu")],
)
def test_matches_dense_reference_on_path_graph(heads, merge, activation):
    rng = np.random.default_rng(4)
    edges = np.array([[0, 1], [1, 2], [2, 3]])
    x = rng.standard_normal((4, 5))
    params = init_gat_layer(rng, 5, 3, heads, merge, activation)
    out = gat_layer_forward(params, Tensor(x), edges).data
    expected = dense_gat_layer(
        [w.data for w in params.weights],
        [a.data for a in params.attn],
        x,
        dense_adjacency(edges, 4),
        params.leaky_slope,
        merge,
        activation,
    )
    np.testing.assert_allclose(out, expected, atol=1e-12, rtol=0)


def test_stack_matches_dense_reference_on_six_node_graph():
    rng = np.random.default_rng(9)
    edges = np.array([[0, 1], [0, 2], [1, 3], [2, 4], [4, 5], [1, 2]])
    x = rng.standard_normal((6, 4))
    layers = [init_gat_layer(rng, 4, 3, 2, "concat", "elu"), init_gat_layer(rng, 6, 2, 1, "concat", "identity")]
    out = gat_stack_forward(layers, Tensor(x), edges).data
    expected = dense_stack(layers_as_arrays(layers), x, dense_adjacency(edges, 6))
    np.testing.assert_allclose(out, expected, atol=1e-12, rtol=0)


def test_attention_rows_sum_to_one():
    rng = np.random.default_rng(7)
    edges = np.array([[0, 1], [0, 2], [0, 3], [1, 2], [3, 4]])
    params = init_gat_layer(rng, 4, 3, 2)
    x = rng.standard_normal((5, 4))
    _, (dst, _, alphas) = gat_layer_forward(params, Tensor(x), edges, return_attention=True)
    for alpha in alphas:
        sums = np.bincount(dst, weights=alpha, minlength=5)
        np.testing.assert_allclose(sums, np.ones(5), atol=1e-12, rtol=0)


def test_permutation_equivariance():
    rng = np.random.default_rng(12)
    edges = np.array([[0, 1], [1, 2], [2, 3], [0, 3], [1, 3]])
    x = rng.standard_normal((5, 4))
    params = random_layer(4, 3, heads=2, seed=5)
    out = gat_layer_forward(params, Tensor(x), edges).data

    perm = np.array([3, 0, 4, 1, 2])  # new id of old node i
    perm_edges = perm[edges]
    perm_x = np.empty_like(x)
    perm_x[perm] = x
    perm_out = gat_layer_forward(params, Tensor(perm_x), perm_edges).data
    np.testing.assert_allclose(perm_out[perm], out, atol=1e-12, rtol=0)


def test_edge_removal_is_local_to_receptive_field():
    # path 0-1-2-3-4-5-6-7; drop edge (3,4); with 2 layers, nodes at
    # distance >= 2 from both endpoints keep bit-identical outputs
    rng = np.random.default_rng(3)
    edges = np.array([[i, i + 1] for i in range(7)])
    pruned = np.array([e for e in edges.tolist() if e != [3, 4]])
    x = rng.standard_normal((8, 3))
    layers = [init_gat_layer(rng, 3, 4, 2, "concat", "elu"), init_gat_layer(rng, 8, 3, 1, "concat", "identity")]
    full = gat_stack_forward(layers, Tensor(x), edges).data
    cut = gat_stack_forward(layers, Tensor(x), pruned).data
    unaffected = [0, 1, 6, 7]  # min(dist to 3, dist to 4) >= 2
    np.testing.assert_array_equal(full[unaffected], cut[unaffected])
    affected = [2, 3, 4, 5]
    assert np.abs(full[affected] - cut[affected]).max() > 0


@pytest.mark.parametrize(
    "heads,merge,activation",
    [(1, "concat", "identity"), (2, "concat", "elu"), (2, "mean", "elu")],
)
def test_layer_gradients_pass_finite_difference_check(heads, merge, activation):
    rng = np.random.default_rng(21)
    edges = np.array([[0, 1], [1, 2], [2, 3], [0, 3]])
    x = rng.standard_normal((4, 3))
    params = init_gat_layer(rng, 3, 2, heads, merge, activation)
    arrays = {}
    for h, (w, a) in enumerate(zip(params.weights, params.attn)):
        arrays[f"W{h}"] = w.data
        arrays[f"a{h}"] = a.data

    def forward():
        out = gat_layer_forward(params, Tensor(x), edges)
        return ad.total_sum(ad.mul(out, out))

    loss = forward()
    backward(loss)
    analytic = {}
    for h, (w, a) in enumerate(zip(params.weights, params.attn)):
        analytic[f"W{h}"] = w.grad.copy()
        analytic[f"a{h}"] = a.grad.copy()
        w.zero_grad()
        a.zero_grad()

    report = grad_check(lambda: forward().item(), arrays, analytic, h=1e-5, tol=1e-4)
    assert report.passed, (report.worst_param, report.max_rel_err)


def test_build_message_pairs_sorted_with_self_loops():
    dst, src = build_message_pairs(np.array([[1, 2], [0, 2]]), 3)
    assert list(zip(dst.tolist(), src.tolist())) == [
        (0, 0), (0, 2), (1, 1), (1, 2), (2, 0), (2, 1), (2, 2),
    ]
