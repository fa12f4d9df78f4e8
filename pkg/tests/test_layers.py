import numpy as np
import pytest

from heg.aggregators import MultiAggregator, agg_mean
from heg.errors import DimensionError
from heg.graph import batch_graphs
from heg.layers import (HegLayer, HegModel, layer_backward, layer_forward,
                        model_backward, model_forward)
from heg.numerics import finite_diff_gradient, max_relative_error
from conftest import continuous_graphs, rng_for


def make_layer(f_in, f_out, seed, kinds=("mean", "std"), activation="none"):
    rng = rng_for(seed)
    agg = MultiAggregator.create(kinds, feature_dim=f_in, output_dim=f_in,
                                 seed=seed + 50)
    return HegLayer(w_root=rng.normal(size=(f_in, f_out)) * 0.3,
                    w_neigh=rng.normal(size=(f_in, f_out)) * 0.3,
                    b_neigh=rng.normal(size=(1, f_out)) * 0.1,
                    aggregator=agg, activation=activation)


def test_forward_matches_manual_computation():
    g = continuous_graphs(seed=30, num_videos=1, feature_dim=4)[0]
    layer = make_layer(4, 3, seed=1, kinds=("mean",))
    X = g.features
    out, _ = layer_forward(layer, g, X)
    for p in range(g.node_count):
        nb = g.neighbor_lists()[p]
        expect = X[p] @ layer.w_root
        if nb.size:
            summary = agg_mean(X[nb]) @ layer.aggregator.w_proj \
                + layer.aggregator.b_proj
            expect = expect + (summary @ layer.w_neigh + layer.b_neigh)[0]
        assert np.allclose(out[p], expect, atol=1e-12)


def test_isolated_nodes_skip_neighbor_term_entirely():
    # single sampled frame: every node is isolated, so not even b_neigh lands
    g = continuous_graphs(seed=31, num_videos=1, frames=4, feature_dim=4)[0]
    assert g.edge_count == 0
    layer = make_layer(4, 3, seed=2)
    layer.b_neigh[:] = 123.0
    out, _ = layer_forward(layer, g, g.features)
    assert np.allclose(out, g.features @ layer.w_root, atol=1e-12)


def test_relu_activation_applied():
    g = continuous_graphs(seed=32, num_videos=1, feature_dim=4)[0]
    layer_none = make_layer(4, 3, seed=3)
    layer_relu = make_layer(4, 3, seed=3, activation="relu")
    out_none, _ = layer_forward(layer_none, g, g.features)
    out_relu, _ = layer_forward(layer_relu, g, g.features)
    assert np.array_equal(out_relu, np.maximum(out_none, 0.0))
    assert (out_none < 0).any()


def test_layer_backward_matches_finite_differences():
    g = continuous_graphs(seed=33, num_videos=1, feature_dim=3)[0]
    rng = rng_for(34)
    for activation in ("none", "relu"):
        layer = make_layer(3, 4, seed=4, kinds=("mean", "median", "std"),
                           activation=activation)
        X = g.features
        U = rng.normal(size=(g.node_count, 4))
        out, trace = layer_forward(layer, g, X)
        grad_X, grads = layer_backward(layer, trace, U)

        def loss(**kw):
            trial_agg = MultiAggregator(
                kinds=layer.aggregator.kinds,
                w_proj=kw.get("w_proj", layer.aggregator.w_proj),
                b_proj=kw.get("b_proj", layer.aggregator.b_proj),
                std_epsilon=layer.aggregator.std_epsilon)
            trial = HegLayer(w_root=kw.get("w_root", layer.w_root),
                             w_neigh=kw.get("w_neigh", layer.w_neigh),
                             b_neigh=kw.get("b_neigh", layer.b_neigh),
                             aggregator=trial_agg, activation=activation)
            return float(np.sum(layer_forward(trial, g, kw.get("X", X))[0] * U))

        pairs = [
            (grad_X, "X", X),
            (grads.w_root, "w_root", layer.w_root),
            (grads.w_neigh, "w_neigh", layer.w_neigh),
            (grads.b_neigh, "b_neigh", layer.b_neigh),
            (grads.w_proj, "w_proj", layer.aggregator.w_proj),
            (grads.b_proj, "b_proj", layer.aggregator.b_proj),
        ]
        for analytic, name, value in pairs:
            numeric = finite_diff_gradient(lambda v: loss(**{name: v}), value)
            assert max_relative_error(analytic, numeric) < 1e-5, name


def test_two_layer_receptive_field_is_two_hops():
    # 5 sampled frames in a chain; nudging frame 0 must not reach frame 3+
    g = continuous_graphs(seed=35, num_videos=1, frames=21, feature_dim=4)[0]
    assert len(g.frame_partition) == 5
    model = HegModel.create(4, ("mean", "std"), seed=5)
    base, _ = model_forward(model, g, g.features)
    bumped = g.features.copy()
    target = g.frame_partition[0][0]
    bumped[target] += 1.0
    moved, _ = model_forward(model, g, bumped)
    delta = np.abs(moved - base).sum(axis=1)
    for pos, part in enumerate(g.frame_partition):
        for node in part:
            if pos <= 2:
                continue  # within reach, may change
            assert delta[node] == 0.0, (pos, node)
    assert delta[target] > 0


def test_model_dims_with_and_without_compression():
    with_c = HegModel.create(10, ("mean",), seed=6, compression=True)
    assert (with_c.feature_dim, with_c.hidden_dim, with_c.output_dim) == (10, 5, 10)
    without = HegModel.create(10, ("mean",), seed=6, compression=False)
    assert (without.feature_dim, without.hidden_dim, without.output_dim) == (10, 10, 10)
    assert with_c.layer2.activation == "none"
    assert with_c.layer1.activation == "relu"


def test_model_create_deterministic():
    a = HegModel.create(6, ("mean", "moment3"), seed=7)
    b = HegModel.create(6, ("mean", "moment3"), seed=7)
    c = HegModel.create(6, ("mean", "moment3"), seed=8)
    assert np.array_equal(a.layer1.w_root, b.layer1.w_root)
    assert np.array_equal(a.layer2.aggregator.w_proj, b.layer2.aggregator.w_proj)
    assert not np.array_equal(a.layer1.w_root, c.layer1.w_root)
    # every weight matrix gets its own stream
    assert not np.array_equal(a.layer1.w_root, a.layer1.w_neigh)


def test_model_backward_matches_finite_differences():
    g = continuous_graphs(seed=36, num_videos=1, feature_dim=4)[0]
    model = HegModel.create(4, ("mean", "std"), seed=9, activation="none")
    rng = rng_for(37)
    U = rng.normal(size=(g.node_count, 4))
    out, trace = model_forward(model, g, g.features)
    grad_X, _ = model_backward(model, trace, U)
    numeric = finite_diff_gradient(
        lambda v: float(np.sum(model_forward(model, g, v)[0] * U)), g.features)
    assert max_relative_error(grad_X, numeric) < 1e-5


def test_forward_works_on_batches():
    gs = continuous_graphs(seed=38, num_videos=3, feature_dim=4)
    batch = batch_graphs(gs)
    model = HegModel.create(4, ("mean",), seed=10)
    whole, _ = model_forward(model, batch, batch.graph.features)
    offset = 0
    for g in gs:
        single, _ = model_forward(model, g, g.features)
        assert np.allclose(whole[offset:offset + g.node_count], single,
                           atol=1e-12)
        offset += g.node_count


def test_layer_shape_validation():
    layer = make_layer(4, 3, seed=11)
    g = continuous_graphs(seed=39, num_videos=1, feature_dim=4)[0]
    with pytest.raises(DimensionError):
        layer_forward(layer, g, g.features[:, :3])
    out, trace = layer_forward(layer, g, g.features)
    with pytest.raises(DimensionError):
        layer_backward(layer, trace, out[:, :2])
