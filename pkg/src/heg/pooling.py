"""Graph-level readout, classifier, and loss.

The attention mode gates each node's features with a per-feature softmax
taken over that graph's nodes: for graph embeddings Xg,

    G = softmax_over_nodes(Xg . w_gate + b_gate)    (column-wise, per graph)
    pooled = sum_i G_i * Xg_i                        (elementwise product)

so every feature column's gates sum to 1 within a graph.  Baseline modes are
plain column-wise mean / sum / max over the graph's nodes.  The classifier
is a linear map plus row softmax; the loss is mean cross-entropy computed
through log-sum-exp so vanishing probabilities cannot produce infinities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .numerics import Matrix, softmax_over_rows, xavier_init

POOLING_MODES = ("feature_gated_attention", "global_mean", "global_sum", "global_max")


@dataclass
class PoolingHead:
    """Readout mode, gate parameters, and the final linear classifier."""

    mode: str
    w_gate: Matrix  # (F_hat, F_hat); unused outside attention mode
    b_gate: Matrix  # (1, F_hat)
    w_cls: Matrix   # (F_hat, num_classes)
    b_cls: Matrix   # (1, num_classes)

    def __post_init__(self):
        if self.mode not in POOLING_MODES:
            raise ValueError(f"pooling mode must be one of {POOLING_MODES}")
        f = self.w_cls.shape[0]
        if self.w_gate.shape != (f, f) or self.b_gate.shape != (1, f):
            raise DimensionError(
                f"gate shapes {self.w_gate.shape}/{self.b_gate.shape} do not "
                f"match embedding width {f}")
        if self.b_cls.shape != (1, self.w_cls.shape[1]):
            raise DimensionError(f"b_cls shape {self.b_cls.shape} invalid")

    @property
    def embedding_dim(self) -> int:
        return self.w_cls.shape[0]

    @property
    def num_classes(self) -> int:
        return self.w_cls.shape[1]

    @classmethod
    def create(cls, embedding_dim: int, num_classes: int, seed: int,
               mode: str = "feature_gated_attention") -> "PoolingHead":
        s = [int(x) for x in np.random.SeedSequence(seed).generate_state(2)]
        return cls(mode=mode,
                   w_gate=xavier_init(embedding_dim, embedding_dim, s[0]),
                   b_gate=np.zeros((1, embedding_dim)),
                   w_cls=xavier_init(embedding_dim, num_classes, s[1]),
                   b_cls=np.zeros((1, num_classes)))


@dataclass
class PoolTrace:
    X: Matrix
    membership: np.ndarray
    graph_nodes: list[np.ndarray]
    pooled: Matrix
    gates: list[Matrix] | None = None    # attention: per-graph gate matrix
    argmax: list[np.ndarray] | None = None  # max: per-graph argmax row per column


@dataclass
class HeadGrads:
    w_gate: Matrix
    b_gate: Matrix
    w_cls: Matrix
    b_cls: Matrix


def _group_nodes(membership: np.ndarray) -> list[np.ndarray]:
    num_graphs = int(membership.max()) + 1 if membership.size else 0
    groups = [np.flatnonzero(membership == k) for k in range(num_graphs)]
    for k, idx in enumerate(groups):
        if idx.size == 0:
            raise ValueError(f"graph {k} in batch has no nodes")
    return groups


def pool(head: PoolingHead, X: Matrix, membership: np.ndarray) -> tuple[Matrix, PoolTrace]:
    """Per-graph pooled vectors, (num_graphs, F_hat)."""
    if X.shape[1] != head.embedding_dim:
        raise DimensionError(
            f"embedding width {X.shape[1]} != head width {head.embedding_dim}")
    if X.shape[0] == 0:
        raise ValueError("pool: empty node set")
    groups = _group_nodes(membership)
    pooled = np.zeros((len(groups), head.embedding_dim))
    trace = PoolTrace(X=X, membership=membership, graph_nodes=groups, pooled=pooled)
    if head.mode == "feature_gated_attention":
        trace.gates = []
        for k, idx in enumerate(groups):
            xg = X[idx]
            gates = softmax_over_rows(xg @ head.w_gate + head.b_gate)
            pooled[k] = (gates * xg).sum(axis=0)
            trace.gates.append(gates)
    elif head.mode == "global_mean":
        for k, idx in enumerate(groups):
            pooled[k] = X[idx].mean(axis=0)
    elif head.mode == "global_sum":
        for k, idx in enumerate(groups):
            pooled[k] = X[idx].sum(axis=0)
    else:  # global_max
        trace.argmax = []
        for k, idx in enumerate(groups):
            xg = X[idx]
            am = xg.argmax(axis=0)  # first max wins on ties
            pooled[k] = xg[am, np.arange(xg.shape[1])]
            trace.argmax.append(am)
    return pooled, trace


def pool_backward(head: PoolingHead, trace: PoolTrace,
                  grad_pooled: Matrix) -> tuple[Matrix, Matrix, Matrix]:
    """Adjoint of pool: (grad_X, grad_w_gate, grad_b_gate).

    Attention: pooled_j = sum_i G_ij X_ij with G column-softmaxed, so the
    gate-logit gradient per graph is u_j * G_rj (X_rj - pooled_j).
    """
    if grad_pooled.shape != trace.pooled.shape:
        raise DimensionError(
            f"grad shape {grad_pooled.shape} != pooled shape {trace.pooled.shape}")
    X = trace.X
    grad_X = np.zeros_like(X)
    grad_w_gate = np.zeros_like(head.w_gate)
    grad_b_gate = np.zeros_like(head.b_gate)
    for k, idx in enumerate(trace.graph_nodes):
        u = grad_pooled[k:k + 1]  # (1, F)
        if head.mode == "feature_gated_attention":
            xg = X[idx]
            gates = trace.gates[k]
            grad_logits = gates * (xg - trace.pooled[k]) * u
            grad_X[idx] += gates * u + grad_logits @ head.w_gate.T
            grad_w_gate += xg.T @ grad_logits
            grad_b_gate += grad_logits.sum(axis=0, keepdims=True)
        elif head.mode == "global_mean":
            grad_X[idx] += u / idx.size
        elif head.mode == "global_sum":
            grad_X[idx] += u
        else:
            am = trace.argmax[k]
            grad_X[idx[am], np.arange(X.shape[1])] += u[0]
    return grad_X, grad_w_gate, grad_b_gate


def classify(head: PoolingHead, pooled: Matrix) -> tuple[Matrix, Matrix]:
    """Class probabilities per graph; returns (probs, logits)."""
    if pooled.shape[1] != head.embedding_dim:
        raise DimensionError(
            f"pooled width {pooled.shape[1]} != head width {head.embedding_dim}")
    logits = pooled @ head.w_cls + head.b_cls
    # row softmax via the column-wise primitive on the transpose
    probs = softmax_over_rows(logits.T).T
    return probs, logits


def cross_entropy_loss(logits: Matrix, labels: np.ndarray) -> tuple[float, Matrix]:
    """Mean negative log-likelihood and its gradient w.r.t. the logits.

    Computed as logsumexp(logits) - logit[true] per row, which stays finite
    even when the true-class probability underflows.  The gradient is
    (probs - onehot) / batch.
    """
    labels = np.asarray(labels, dtype=np.int64)
    n, c = logits.shape
    if labels.shape != (n,):
        raise DimensionError(f"labels shape {labels.shape} != ({n},)")
    if labels.min() < 0 or labels.max() >= c:
        raise ValueError(f"labels must be in [0, {c}), got range "
                         f"[{labels.min()}, {labels.max()}]")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(log_z - shifted[np.arange(n), labels]))
    probs = np.exp(shifted) / np.exp(shifted).sum(axis=1, keepdims=True)
    grad = probs.copy()
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n


def head_backward(head: PoolingHead, trace: PoolTrace, pooled: Matrix,
                  grad_logits: Matrix) -> tuple[Matrix, HeadGrads]:
    """Classifier plus pooling adjoint: (grad wrt node embeddings, head grads)."""
    grad_pooled = grad_logits @ head.w_cls.T
    grad_X, gw_gate, gb_gate = pool_backward(head, trace, grad_pooled)
    grads = HeadGrads(w_gate=gw_gate, b_gate=gb_gate,
                      w_cls=pooled.T @ grad_logits,
                      b_cls=grad_logits.sum(axis=0, keepdims=True))
    return grad_X, grads
