"""Structural checks for graphs and labels before fitting or scoring."""

from __future__ import annotations

import numpy as np

from .errors import DataError, DimensionError
from .graph import TemporalBipartiteGraph


def check_graph(g: TemporalBipartiteGraph) -> None:
    """Verify structural invariants of a single graph.

    Checks: finite features; every node in exactly one partition; each
    directed edge has its reverse; edges connect only adjacent sampled
    frames; the directed edge count equals twice the sum of products of
    consecutive partition sizes.
    """
    if not np.all(np.isfinite(g.features)):
        raise DataError("graph features contain non-finite values")
    owner = np.full(g.node_count, -1, dtype=np.int64)
    for pos, part in enumerate(g.frame_partition):
        for node in part:
            if not 0 <= node < g.node_count:
                raise DataError(f"partition {pos} references node {node} "
                                f"outside [0, {g.node_count})")
            if owner[node] != -1:
                raise DataError(f"node {node} appears in partitions "
                                f"{owner[node]} and {pos}")
            owner[node] = pos
    if g.node_count and owner.min() < 0:
        raise DataError(f"node {int(np.argmin(owner))} belongs to no partition")
    edges = g.directed_edges
    if edges.size:
        if edges.min() < 0 or edges.max() >= g.node_count:
            raise DataError("edge endpoint outside node range")
        pairs = {(int(u), int(v)) for u, v in edges}
        if len(pairs) != edges.shape[0]:
            raise DataError("duplicate directed edges")
        for u, v in pairs:
            if (v, u) not in pairs:
                raise DataError(f"edge ({u}, {v}) has no reverse")
            if abs(owner[u] - owner[v]) != 1:
                raise DataError(f"edge ({u}, {v}) spans non-adjacent sampled "
                                f"frames {owner[u]} and {owner[v]}")
    sizes = [len(p) for p in g.frame_partition]
    expected = 2 * sum(a * b for a, b in zip(sizes, sizes[1:]))
    if g.edge_count != expected:
        raise DataError(f"directed edge count {g.edge_count} != expected "
                        f"{expected} from partition sizes")


def check_graphs(graphs: list[TemporalBipartiteGraph]) -> int:
    """Validate a graph list for joint use; returns the shared feature width."""
    if not graphs:
        raise DataError("empty graph list")
    width = graphs[0].feature_dim
    for i, g in enumerate(graphs):
        if g.feature_dim != width:
            raise DimensionError(f"graph {i} feature width {g.feature_dim} "
                                 f"!= graph 0 width {width}")
        check_graph(g)
    return width


def check_labels(graphs: list[TemporalBipartiteGraph],
                 num_classes: int | None = None) -> np.ndarray:
    """Collect labels, requiring one per graph and all in range."""
    labels = []
    for i, g in enumerate(graphs):
        if g.label is None or g.label < 0:
            raise DataError(f"graph {i} has no label")
        labels.append(g.label)
    out = np.asarray(labels, dtype=np.int64)
    if num_classes is not None and out.max() >= num_classes:
        raise DataError(f"label {int(out.max())} out of range for "
                        f"{num_classes} classes")
    return out
