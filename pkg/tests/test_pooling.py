import numpy as np
import pytest

from heg.errors import DimensionError
from heg.numerics import finite_diff_gradient, max_relative_error, softmax_over_rows
from heg.pooling import (POOLING_MODES, PoolingHead, classify,
                         cross_entropy_loss, head_backward, pool,
                         pool_backward)
from conftest import rng_for


def make_head(f, c, seed, mode="feature_gated_attention"):
    head = PoolingHead.create(f, c, seed=seed, mode=mode)
    rng = rng_for(seed + 100)
    head.b_gate = rng.normal(size=(1, f)) * 0.1
    head.b_cls = rng.normal(size=(1, c)) * 0.1
    return head


def two_graph_batch(rng, f=4, sizes=(3, 5)):
    X = rng.normal(size=(sum(sizes), f))
    membership = np.repeat(np.arange(len(sizes)), sizes)
    return X, membership


def test_global_modes_match_numpy():
    rng = rng_for(40)
    X, membership = two_graph_batch(rng)
    groups = [X[:3], X[3:]]
    for mode, ref in (("global_mean", [g.mean(axis=0) for g in groups]),
                      ("global_sum", [g.sum(axis=0) for g in groups]),
                      ("global_max", [g.max(axis=0) for g in groups])):
        head = make_head(4, 2, seed=1, mode=mode)
        pooled, _ = pool(head, X, membership)
        assert pooled.shape == (2, 4)
        assert np.allclose(pooled, np.vstack(ref), atol=1e-12)


def test_attention_pool_is_gated_sum():
    rng = rng_for(41)
    X, membership = two_graph_batch(rng)
    head = make_head(4, 2, seed=2)
    pooled, trace = pool(head, X, membership)
    for k, idx in enumerate([np.arange(3), np.arange(3, 8)]):
        logits = X[idx] @ head.w_gate + head.b_gate
        gates = softmax_over_rows(logits)
        assert np.allclose(trace.gates[k], gates, atol=1e-12)
        assert np.allclose(pooled[k], (gates * X[idx]).sum(axis=0), atol=1e-12)


def test_attention_gate_columns_sum_to_one():
    rng = rng_for(42)
    for _ in range(20):
        sizes = tuple(int(rng.integers(1, 7)) for _ in range(3))
        X, membership = two_graph_batch(rng, f=5, sizes=sizes)
        head = make_head(5, 2, seed=3)
        _, trace = pool(head, X, membership)
        for gates in trace.gates:
            assert np.allclose(gates.sum(axis=0), 1.0, atol=1e-12)
            assert np.all(gates > 0)


def test_single_node_graph_passes_through():
    rng = rng_for(43)
    X = rng.normal(size=(1, 4))
    head = make_head(4, 2, seed=4)
    pooled, trace = pool(head, X, np.zeros(1, dtype=np.int64))
    assert np.allclose(pooled, X, atol=1e-12)
    # softmax over one node is constant 1, so the gate path has no gradient
    u = rng.normal(size=(1, 4))
    grad_X, grad_wg, grad_bg = pool_backward(head, trace, u)
    assert np.allclose(grad_X, u, atol=1e-12)
    assert np.allclose(grad_wg, 0.0, atol=1e-12)
    assert np.allclose(grad_bg, 0.0, atol=1e-12)


def test_pool_backward_matches_finite_differences():
    rng = rng_for(44)
    X, membership = two_graph_batch(rng)
    u = rng.normal(size=(2, 4))
    for mode in POOLING_MODES:
        head = make_head(4, 2, seed=5, mode=mode)
        _, trace = pool(head, X, membership)
        grad_X, grad_wg, grad_bg = pool_backward(head, trace, u)
        numeric_X = finite_diff_gradient(
            lambda v: float(np.sum(pool(head, v, membership)[0] * u)), X)
        assert max_relative_error(grad_X, numeric_X) < 1e-6, mode
        if mode == "feature_gated_attention":
            def loss_wg(w):
                trial = PoolingHead(mode=mode, w_gate=w, b_gate=head.b_gate,
                                    w_cls=head.w_cls, b_cls=head.b_cls)
                return float(np.sum(pool(trial, X, membership)[0] * u))

            assert max_relative_error(
                grad_wg, finite_diff_gradient(loss_wg, head.w_gate)) < 1e-6

            def loss_bg(b):
                trial = PoolingHead(mode=mode, w_gate=head.w_gate, b_gate=b,
                                    w_cls=head.w_cls, b_cls=head.b_cls)
                return float(np.sum(pool(trial, X, membership)[0] * u))

            assert max_relative_error(
                grad_bg, finite_diff_gradient(loss_bg, head.b_gate)) < 1e-6


def test_max_pool_routes_gradient_to_first_argmax():
    head = make_head(2, 2, seed=6, mode="global_max")
    X = np.array([[3.0, 1.0], [3.0, 2.0], [0.0, 2.0]])
    membership = np.zeros(3, dtype=np.int64)
    pooled, trace = pool(head, X, membership)
    assert np.array_equal(pooled, [[3.0, 2.0]])
    grad_X, _, _ = pool_backward(head, trace, np.array([[1.0, 1.0]]))
    # column 0 ties between rows 0 and 1; the first wins
    assert np.array_equal(grad_X, [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])


def test_classify_rows_are_distributions():
    rng = rng_for(45)
    head = make_head(4, 3, seed=7)
    pooled = rng.normal(size=(5, 4)) * 20
    probs, logits = classify(head, pooled)
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-12)
    assert np.allclose(logits, pooled @ head.w_cls + head.b_cls, atol=1e-12)
    assert np.all(probs > 0)


def test_cross_entropy_known_values():
    logits = np.log(np.array([[0.7, 0.2, 0.1], [0.1, 0.8, 0.1]]))
    loss, grad = cross_entropy_loss(logits, np.array([0, 1]))
    assert loss == pytest.approx(-(np.log(0.7) + np.log(0.8)) / 2, abs=1e-12)
    expect = np.array([[0.7 - 1, 0.2, 0.1], [0.1, 0.8 - 1, 0.1]]) / 2
    assert np.allclose(grad, expect, atol=1e-12)


def test_cross_entropy_extreme_logits_stay_finite():
    logits = np.array([[1000.0, -1000.0], [-1000.0, 1000.0]])
    loss, grad = cross_entropy_loss(logits, np.array([1, 0]))
    assert np.isfinite(loss) and loss > 100
    assert np.all(np.isfinite(grad))
    easy, _ = cross_entropy_loss(logits, np.array([0, 1]))
    assert easy == pytest.approx(0.0, abs=1e-12)


def test_cross_entropy_gradient_matches_finite_differences():
    rng = rng_for(46)
    logits = rng.normal(size=(4, 3))
    labels = np.array([0, 2, 1, 2])
    _, grad = cross_entropy_loss(logits, labels)
    numeric = finite_diff_gradient(
        lambda v: cross_entropy_loss(v, labels)[0], logits)
    assert max_relative_error(grad, numeric) < 1e-7


def test_cross_entropy_label_validation():
    logits = np.zeros((2, 3))
    with pytest.raises(ValueError):
        cross_entropy_loss(logits, np.array([0, 3]))
    with pytest.raises(DimensionError):
        cross_entropy_loss(logits, np.array([0]))


def test_head_backward_matches_finite_differences():
    rng = rng_for(47)
    X, membership = two_graph_batch(rng)
    labels = np.array([0, 1])
    for mode in ("feature_gated_attention", "global_mean"):
        head = make_head(4, 2, seed=8, mode=mode)

        def full_loss(X_v=None, w_cls=None, b_cls=None, w_gate=None):
            trial = PoolingHead(
                mode=mode,
                w_gate=head.w_gate if w_gate is None else w_gate,
                b_gate=head.b_gate,
                w_cls=head.w_cls if w_cls is None else w_cls,
                b_cls=head.b_cls if b_cls is None else b_cls)
            pooled_v, _ = pool(trial, X if X_v is None else X_v, membership)
            _, logits = classify(trial, pooled_v)
            return cross_entropy_loss(logits, labels)[0]

        pooled, trace = pool(head, X, membership)
        _, logits = classify(head, pooled)
        _, grad_logits = cross_entropy_loss(logits, labels)
        grad_X, grads = head_backward(head, trace, pooled, grad_logits)
        checks = [
            (grad_X, "X_v", X),
            (grads.w_cls, "w_cls", head.w_cls),
            (grads.b_cls, "b_cls", head.b_cls),
        ]
        if mode == "feature_gated_attention":
            checks.append((grads.w_gate, "w_gate", head.w_gate))
        for analytic, name, value in checks:
            numeric = finite_diff_gradient(
                lambda v: full_loss(**{name: v}), value)
            assert max_relative_error(analytic, numeric) < 1e-6, (mode, name)


def test_pool_rejects_empty_graphs():
    head = make_head(3, 2, seed=9)
    X = np.ones((2, 3))
    membership = np.array([0, 2])  # graph 1 has no nodes
    with pytest.raises(ValueError, match="no nodes"):
        pool(head, X, membership)
