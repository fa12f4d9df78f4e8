"""Minibatch Adam training of the two-layer graph model plus pooling head.

Everything is driven by one integer seed: parameter init, the per-epoch
shuffle, nothing else is stochastic.  Gradients accumulate in node-index
order, so two runs with the same config and data produce bit-identical
parameters and loss logs.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .aggregators import KIND_ORDER, validate_kinds
from .checkpoint import _params, save_checkpoint
from .errors import DataError, NumericError
from .graph import TemporalBipartiteGraph, batch_graphs, build_graph
from .layers import ACTIVATIONS, HegModel, LayerGrads, model_backward, model_forward
from .numerics import (AdamState, adam_step, finite_diff_gradient,
                       max_relative_error)
from .pooling import (POOLING_MODES, HeadGrads, PoolingHead, classify,
                      cross_entropy_loss, head_backward, pool)


@dataclass(frozen=True)
class TrainConfig:
    """Model and optimizer settings for one training run."""

    num_classes: int = 2
    kinds: tuple[str, ...] = KIND_ORDER
    pooling: str = "feature_gated_attention"
    compression: bool = True
    activation: str = "relu"
    std_epsilon: float = 1e-5
    learning_rate: float = 1e-4
    weight_decay: float = 0.5
    batch_size: int = 32
    epochs: int = 200
    seed: int = 0
    stride: int = 5
    tau: int = 16
    box_scale: float = 1.5

    def __post_init__(self):
        validate_kinds(self.kinds)
        if self.pooling not in POOLING_MODES:
            raise ValueError(f"pooling must be one of {POOLING_MODES}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if self.learning_rate <= 0 or self.std_epsilon <= 0:
            raise ValueError("learning_rate and std_epsilon must be > 0")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be >= 1")
        if self.stride < 1 or self.tau < 1 or self.box_scale <= 0:
            raise ValueError("stride, tau must be >= 1 and box_scale > 0")


@dataclass
class TrainResult:
    model: HegModel
    head: PoolingHead
    loss_history: list[float] = field(default_factory=list)


def build_graphs(dataset, stride: int = 5) -> list[TemporalBipartiteGraph]:
    """Assemble one graph per (sequence, feature store) pair."""
    return [build_graph(seq, store.lookup, stride) for seq, store in dataset]


def init_model(config: TrainConfig, feature_dim: int) -> tuple[HegModel, PoolingHead]:
    """Seeded model and head for the given node feature width."""
    model = HegModel.create(feature_dim, config.kinds, config.seed,
                            compression=config.compression,
                            activation=config.activation,
                            std_epsilon=config.std_epsilon)
    head = PoolingHead.create(model.output_dim, config.num_classes,
                              config.seed + 1, mode=config.pooling)
    return model, head


def _grad_dict(mg, hg: HeadGrads) -> dict[str, np.ndarray]:
    def layer(name: str, g: LayerGrads):
        return {f"{name}.w_root": g.w_root, f"{name}.w_proj": g.w_proj,
                f"{name}.b_proj": g.b_proj, f"{name}.w_neigh": g.w_neigh,
                f"{name}.b_neigh": g.b_neigh}

    out = layer("layer1", mg.layer1) | layer("layer2", mg.layer2)
    out |= {"head.w_gate": hg.w_gate, "head.b_gate": hg.b_gate,
            "head.w_cls": hg.w_cls, "head.b_cls": hg.b_cls}
    return out


def _apply_params(model: HegModel, head: PoolingHead,
                  p: dict[str, np.ndarray]) -> tuple[HegModel, PoolingHead]:
    def layer(name, lay):
        agg = replace(lay.aggregator, w_proj=p[f"{name}.w_proj"],
                      b_proj=p[f"{name}.b_proj"])
        return replace(lay, w_root=p[f"{name}.w_root"],
                       w_neigh=p[f"{name}.w_neigh"],
                       b_neigh=p[f"{name}.b_neigh"], aggregator=agg)

    model = replace(model, layer1=layer("layer1", model.layer1),
                    layer2=layer("layer2", model.layer2))
    head = replace(head, w_gate=p["head.w_gate"], b_gate=p["head.b_gate"],
                   w_cls=p["head.w_cls"], b_cls=p["head.b_cls"])
    return model, head


def train_step(model: HegModel, head: PoolingHead,
               graphs: list[TemporalBipartiteGraph],
               ) -> tuple[float, dict[str, np.ndarray]]:
    """Loss and parameter gradients for one minibatch of graphs."""
    batch = batch_graphs(graphs)
    if batch.labels.min() < 0:
        raise DataError("cannot train on unlabelled graphs")
    embeddings, mtrace = model_forward(model, batch, batch.graph.features)
    pooled, ptrace = pool(head, embeddings, batch.membership)
    _, logits = classify(head, pooled)
    loss, grad_logits = cross_entropy_loss(logits, batch.labels)
    grad_embed, hgrads = head_backward(head, ptrace, pooled, grad_logits)
    _, mgrads = model_backward(model, mtrace, grad_embed)
    return loss, _grad_dict(mgrads, hgrads)


def gradient_check(model: HegModel, head: PoolingHead,
                   graphs: list[TemporalBipartiteGraph],
                   h: float = 1e-5) -> dict[str, float]:
    """Analytic-vs-central-difference gradient agreement per parameter.

    Returns the max relative error for every parameter block, keyed by the
    checkpoint parameter names.
    """
    _, grads = train_step(model, head, graphs)
    params = _params(model, head)

    def loss_with(name: str, value: np.ndarray) -> float:
        trial = dict(params)
        trial[name] = value
        m, hd = _apply_params(model, head, trial)
        loss, _ = train_step(m, hd, graphs)
        return loss

    errors = {}
    for name, value in params.items():
        numeric = finite_diff_gradient(lambda v: loss_with(name, v), value, h=h)
        errors[name] = max_relative_error(grads[name], numeric)
    return errors


def train(config: TrainConfig, graphs: list[TemporalBipartiteGraph],
          checkpoint_path=None) -> TrainResult:
    """Full training loop; loss_history holds one mean batch loss per epoch.

    Weight decay touches only the weight matrices, never the bias rows.
    The final partial batch of each epoch is kept.
    """
    if not graphs:
        raise DataError("no graphs to train on")
    model, head = init_model(config, graphs[0].feature_dim)
    states = {
        name: AdamState.initial(
            value, learning_rate=config.learning_rate,
            weight_decay=config.weight_decay if ".w_" in name else 0.0)
        for name, value in _params(model, head).items()
    }
    history: list[float] = []
    for epoch in range(config.epochs):
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence((config.seed, epoch))))
        order = rng.permutation(len(graphs))
        epoch_losses = []
        for start in range(0, len(graphs), config.batch_size):
            chosen = [graphs[i] for i in order[start:start + config.batch_size]]
            loss, grads = train_step(model, head, chosen)
            if not np.isfinite(loss):
                raise NumericError(
                    f"non-finite loss at epoch {epoch} batch {start // config.batch_size}")
            params = _params(model, head)
            new_params = {}
            for name, value in params.items():
                new_params[name], states[name] = adam_step(value, grads[name],
                                                           states[name])
            model, head = _apply_params(model, head, new_params)
            epoch_losses.append(loss)
        history.append(float(np.mean(epoch_losses)))
    if checkpoint_path is not None:
        save_checkpoint(checkpoint_path, model, head, config.seed)
    return TrainResult(model=model, head=head, loss_history=history)
