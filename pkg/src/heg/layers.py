"""Per-node layer update and the two-layer bottlenecked model.

Each layer maps node features X (row vectors) to

    x'_p = x_p . w_root + Psi(neighbors of p) . w_neigh + b_neigh

followed by an optional rectifier.  Psi is the multi-aggregation of the
in-neighbor feature rows.  When a node has no neighbors the entire neighbor
term, bias included, is omitted so isolated nodes get no phantom signal.

The two-layer model compresses F -> floor(F/2) -> F when the bottleneck is
enabled, and F -> F -> F otherwise.  All gradient accumulation loops run in
node-index order, which keeps training bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .aggregators import (AggregationTrace, MultiAggregator, multi_aggregate,
                          multi_aggregate_backward)
from .errors import DimensionError
from .graph import GraphBatch, TemporalBipartiteGraph
from .numerics import Matrix, xavier_init

ACTIVATIONS = ("relu", "none")


@dataclass
class HegLayer:
    """One graph layer: separate root and neighbor transforms."""

    w_root: Matrix   # (F, F_out)
    w_neigh: Matrix  # (Fa, F_out)
    b_neigh: Matrix  # (1, F_out)
    aggregator: MultiAggregator
    activation: str = "none"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        if self.aggregator.output_dim != self.w_neigh.shape[0]:
            raise DimensionError(
                f"aggregator output {self.aggregator.output_dim} != "
                f"w_neigh rows {self.w_neigh.shape[0]}")
        if self.w_neigh.shape[1] != self.w_root.shape[1] \
                or self.b_neigh.shape != (1, self.w_root.shape[1]):
            raise DimensionError("w_root, w_neigh and b_neigh output widths differ")

    @property
    def input_dim(self) -> int:
        return self.w_root.shape[0]

    @property
    def output_dim(self) -> int:
        return self.w_root.shape[1]


@dataclass
class LayerTrace:
    X: Matrix
    pre_activation: Matrix
    neighbor_lists: list[np.ndarray]
    agg_traces: list[AggregationTrace | None]   # None for isolated nodes
    agg_outputs: list[Matrix | None]


@dataclass
class LayerGrads:
    w_root: Matrix
    w_neigh: Matrix
    b_neigh: Matrix
    w_proj: Matrix
    b_proj: Matrix


def _core(g) -> TemporalBipartiteGraph:
    return g.graph if isinstance(g, GraphBatch) else g


def layer_forward(layer: HegLayer, g, X: Matrix) -> tuple[Matrix, LayerTrace]:
    """Apply the layer to every node; returns (new features, trace)."""
    if X.shape[1] != layer.input_dim:
        raise DimensionError(
            f"layer input width {X.shape[1]} != expected {layer.input_dim}")
    nbrs = _core(g).neighbor_lists()
    if len(nbrs) != X.shape[0]:
        raise DimensionError(
            f"feature rows {X.shape[0]} != graph nodes {len(nbrs)}")
    pre = X @ layer.w_root
    traces: list[AggregationTrace | None] = [None] * X.shape[0]
    outputs: list[Matrix | None] = [None] * X.shape[0]
    for p, nb in enumerate(nbrs):
        if nb.size == 0:
            continue
        agg_out, tr = multi_aggregate(layer.aggregator, X[nb])
        pre[p] += (agg_out @ layer.w_neigh + layer.b_neigh)[0]
        traces[p] = tr
        outputs[p] = agg_out
    out = np.maximum(pre, 0.0) if layer.activation == "relu" else pre.copy()
    return out, LayerTrace(X=X, pre_activation=pre, neighbor_lists=nbrs,
                           agg_traces=traces, agg_outputs=outputs)


def layer_backward(layer: HegLayer, trace: LayerTrace,
                   grad_out: Matrix) -> tuple[Matrix, LayerGrads]:
    """Exact adjoint of layer_forward: (grad wrt X, parameter grads)."""
    if grad_out.shape != trace.pre_activation.shape:
        raise DimensionError(
            f"grad shape {grad_out.shape} != output shape {trace.pre_activation.shape}")
    if layer.activation == "relu":
        grad_pre = grad_out * (trace.pre_activation > 0)
    else:
        grad_pre = grad_out
    X = trace.X
    grads = LayerGrads(
        w_root=X.T @ grad_pre,
        w_neigh=np.zeros_like(layer.w_neigh),
        b_neigh=np.zeros_like(layer.b_neigh),
        w_proj=np.zeros_like(layer.aggregator.w_proj),
        b_proj=np.zeros_like(layer.aggregator.b_proj))
    grad_X = grad_pre @ layer.w_root.T
    for p, nb in enumerate(trace.neighbor_lists):
        if nb.size == 0:
            continue
        u = grad_pre[p:p + 1]  # (1, F_out)
        grads.w_neigh += trace.agg_outputs[p].T @ u
        grads.b_neigh += u
        gX, gw, gb = multi_aggregate_backward(
            layer.aggregator, trace.agg_traces[p], u @ layer.w_neigh.T)
        grads.w_proj += gw
        grads.b_proj += gb
        grad_X[nb] += gX
    return grad_X, grads


@dataclass
class HegModel:
    """Two stacked layers, optionally bottlenecked in between."""

    layer1: HegLayer
    layer2: HegLayer
    compression_enabled: bool = True

    def __post_init__(self):
        if self.layer2.input_dim != self.layer1.output_dim:
            raise DimensionError(
                f"layer2 input {self.layer2.input_dim} != "
                f"layer1 output {self.layer1.output_dim}")

    @property
    def feature_dim(self) -> int:
        return self.layer1.input_dim

    @property
    def hidden_dim(self) -> int:
        return self.layer1.output_dim

    @property
    def output_dim(self) -> int:
        return self.layer2.output_dim

    @classmethod
    def create(cls, feature_dim: int, kinds, seed: int, compression: bool = True,
               activation: str = "relu", std_epsilon: float = 1e-5) -> "HegModel":
        """Seeded init; derived per-parameter seeds keep layouts reproducible."""
        hidden = feature_dim // 2 if compression else feature_dim
        if hidden < 1:
            raise ValueError(f"feature_dim {feature_dim} too small to compress")
        s = [int(x) for x in np.random.SeedSequence(seed).generate_state(6)]
        layer1 = HegLayer(
            w_root=xavier_init(feature_dim, hidden, s[0]),
            w_neigh=xavier_init(feature_dim, hidden, s[1]),
            b_neigh=np.zeros((1, hidden)),
            aggregator=MultiAggregator.create(kinds, feature_dim, feature_dim,
                                              s[2], std_epsilon),
            activation=activation)
        layer2 = HegLayer(
            w_root=xavier_init(hidden, feature_dim, s[3]),
            w_neigh=xavier_init(hidden, feature_dim, s[4]),
            b_neigh=np.zeros((1, feature_dim)),
            aggregator=MultiAggregator.create(kinds, hidden, hidden,
                                              s[5], std_epsilon),
            activation="none")
        return cls(layer1=layer1, layer2=layer2, compression_enabled=compression)


@dataclass
class ModelTrace:
    trace1: LayerTrace
    trace2: LayerTrace


@dataclass
class ModelGrads:
    layer1: LayerGrads
    layer2: LayerGrads


def model_forward(model: HegModel, g, X: Matrix) -> tuple[Matrix, ModelTrace]:
    """Both layers in sequence; returns (node embeddings, traces)."""
    h, tr1 = layer_forward(model.layer1, g, X)
    out, tr2 = layer_forward(model.layer2, g, h)
    return out, ModelTrace(trace1=tr1, trace2=tr2)


def model_backward(model: HegModel, trace: ModelTrace,
                   grad_out: Matrix) -> tuple[Matrix, ModelGrads]:
    grad_h, g2 = layer_backward(model.layer2, trace.trace2, grad_out)
    grad_X, g1 = layer_backward(model.layer1, trace.trace1, grad_h)
    return grad_X, ModelGrads(layer1=g1, layer2=g2)
