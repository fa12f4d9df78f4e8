"""Temporal bidirectional bipartite graphs over sampled frames.

One node per (sampled frame, detection); directed edges both ways between
every object in one sampled frame and every object in the next.  Objects are
deliberately NOT linked by identity across frames: consecutive frames are
connected as complete bipartite sets, nothing else.  An empty sampled frame
therefore breaks connectivity (no skip edges).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, FormatError, IngestionError
from .scene import VideoSequence, sample_frames


@dataclass
class TemporalBipartiteGraph:
    """Flat edge-list graph with per-sampled-frame node partitions."""

    features: np.ndarray                      # (node_count, F) float64
    node_origin: tuple[tuple[int, str], ...]  # (sampled frame position, object_id)
    directed_edges: np.ndarray                # (E, 2) int64 rows (src, dst)
    frame_partition: tuple[tuple[int, ...], ...]
    label: int | None = None
    _in_lists: list[np.ndarray] | None = field(default=None, repr=False, compare=False)

    @property
    def node_count(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def edge_count(self) -> int:
        return self.directed_edges.shape[0]

    def neighbor_lists(self) -> list[np.ndarray]:
        """In-neighbors of every node, ascending, cached after first call."""
        if self._in_lists is None:
            buckets: list[list[int]] = [[] for _ in range(self.node_count)]
            for src, dst in self.directed_edges:
                buckets[int(dst)].append(int(src))
            self._in_lists = [np.array(sorted(b), dtype=np.int64) for b in buckets]
        return self._in_lists


@dataclass
class GraphBatch:
    """Disjoint union of graphs with per-node membership and per-graph labels."""

    graph: TemporalBipartiteGraph
    membership: np.ndarray  # (node_count,) int64 graph index
    labels: np.ndarray      # (num_graphs,) int64, -1 where unlabelled

    @property
    def num_graphs(self) -> int:
        return len(self.labels)


def build_graph(seq: VideoSequence, feature_lookup, stride: int) -> TemporalBipartiteGraph:
    """Build the graph for one video from sampled frames and a feature source.

    `feature_lookup(frame_index, object_id)` must return that detection's
    feature row; all rows must share one width.
    """
    sampled = sample_frames(seq, stride)
    rows: list[np.ndarray] = []
    origin: list[tuple[int, str]] = []
    partitions: list[tuple[int, ...]] = []
    for pos, frame in enumerate(sampled):
        part = []
        for det in seq.detections_on(frame):
            try:
                row = np.asarray(feature_lookup(frame, det.object_id), dtype=np.float64)
            except KeyError as exc:
                raise IngestionError(
                    f"{seq.video_id}: no feature row for frame {frame}, "
                    f"object {det.object_id!r}") from exc
            row = row.reshape(-1)
            if rows and row.shape[0] != rows[0].shape[0]:
                raise DimensionError(
                    f"{seq.video_id}: feature width {row.shape[0]} for frame {frame}, "
                    f"object {det.object_id!r} != {rows[0].shape[0]}")
            part.append(len(rows))
            rows.append(row)
            origin.append((pos, det.object_id))
        partitions.append(tuple(part))

    edges: list[tuple[int, int]] = []
    for left, right in zip(partitions, partitions[1:]):
        for u in left:
            for v in right:
                edges.append((u, v))
                edges.append((v, u))

    dim = rows[0].shape[0] if rows else 0
    features = np.vstack(rows) if rows else np.zeros((0, dim))
    return TemporalBipartiteGraph(
        features=features, node_origin=tuple(origin),
        directed_edges=np.array(edges, dtype=np.int64).reshape(-1, 2),
        frame_partition=tuple(partitions), label=seq.label)


def neighbors(g: TemporalBipartiteGraph, p: int) -> list[int]:
    """All q with a directed edge (q, p), ascending."""
    if not 0 <= p < g.node_count:
        raise ValueError(f"node {p} out of range for {g.node_count} nodes")
    return [int(q) for q in g.neighbor_lists()[p]]


def batch_graphs(gs: list[TemporalBipartiteGraph]) -> GraphBatch:
    """Disjoint union with node re-indexing by offset."""
    if not gs:
        raise ValueError("batch_graphs: empty input")
    dim = gs[0].feature_dim
    for g in gs:
        if g.feature_dim != dim:
            raise DimensionError(
                f"batch_graphs: feature widths differ ({g.feature_dim} != {dim})")
    features = np.vstack([g.features for g in gs]) if gs else np.zeros((0, dim))
    membership, labels, edges, partitions, origin = [], [], [], [], []
    offset = 0
    for k, g in enumerate(gs):
        membership.extend([k] * g.node_count)
        labels.append(-1 if g.label is None else g.label)
        if g.edge_count:
            edges.append(g.directed_edges + offset)
        partitions.extend(tuple(i + offset for i in part) for part in g.frame_partition)
        origin.extend(g.node_origin)
        offset += g.node_count
    merged = TemporalBipartiteGraph(
        features=features, node_origin=tuple(origin),
        directed_edges=np.vstack(edges) if edges else np.zeros((0, 2), dtype=np.int64),
        frame_partition=tuple(partitions), label=None)
    return GraphBatch(graph=merged,
                      membership=np.array(membership, dtype=np.int64),
                      labels=np.array(labels, dtype=np.int64))


def count_stats(g: TemporalBipartiteGraph) -> tuple[int, int, float]:
    """(node count, directed edge count, mean objects per sampled frame)."""
    frames = len(g.frame_partition)
    mean = g.node_count / frames if frames else 0.0
    return g.node_count, g.edge_count, mean


# --- HEGG graph cache files -----------------------------------------------
#
# Little-endian byte layout:
#   magic b"HEGG" | version u32 | node_count u64 | feature_dim u64
#   | edge_count u64 | partition_count u64 | label i64 (-1 = none)
#   | features: node_count*feature_dim float64, row-major
#   | edges: edge_count x (src u64, dst u64)
#   | partitions: per partition, size u64 then size x node index u64
#   | origins: per node, frame position u64, id length u16, id bytes (utf-8)

GRAPH_MAGIC = b"HEGG"
GRAPH_VERSION = 1
_GRAPH_HEADER = struct.Struct("<4sIQQQQq")


def save_graph(path, g: TemporalBipartiteGraph) -> None:
    label = -1 if g.label is None else int(g.label)
    with open(path, "wb") as fh:
        fh.write(_GRAPH_HEADER.pack(GRAPH_MAGIC, GRAPH_VERSION, g.node_count,
                                    g.feature_dim, g.edge_count,
                                    len(g.frame_partition), label))
        fh.write(g.features.astype("<f8").tobytes(order="C"))
        fh.write(g.directed_edges.astype("<u8").tobytes(order="C"))
        for part in g.frame_partition:
            fh.write(struct.pack("<Q", len(part)))
            fh.write(np.array(part, dtype="<u8").tobytes())
        for pos, object_id in g.node_origin:
            raw = object_id.encode("utf-8")
            fh.write(struct.pack("<QH", pos, len(raw)))
            fh.write(raw)


def load_graph(path) -> TemporalBipartiteGraph:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _GRAPH_HEADER.size:
        raise FormatError(f"{path}: truncated header, {len(data)} bytes")
    magic, version, nodes, dim, n_edges, n_parts, label = \
        _GRAPH_HEADER.unpack_from(data, 0)
    if magic != GRAPH_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r} at offset 0")
    if version != GRAPH_VERSION:
        raise FormatError(f"{path}: unsupported version {version} at offset 4")
    off = _GRAPH_HEADER.size

    def take(nbytes: int, what: str) -> bytes:
        nonlocal off
        if off + nbytes > len(data):
            raise FormatError(f"{path}: truncated {what} at offset {off} "
                              f"(need {nbytes}, have {len(data) - off})")
        chunk = data[off:off + nbytes]
        off += nbytes
        return chunk

    features = np.frombuffer(take(nodes * dim * 8, "features"),
                             dtype="<f8").reshape(nodes, dim).copy()
    edges = np.frombuffer(take(n_edges * 2 * 8, "edges"),
                          dtype="<u8").reshape(-1, 2).astype(np.int64)
    partitions = []
    for _ in range(n_parts):
        (size,) = struct.unpack("<Q", take(8, "partition size"))
        idx = np.frombuffer(take(size * 8, "partition"), dtype="<u8")
        partitions.append(tuple(int(i) for i in idx))
    origin = []
    for _ in range(nodes):
        pos, idlen = struct.unpack("<QH", take(10, "origin"))
        origin.append((int(pos), take(idlen, "origin id").decode("utf-8")))
    if off != len(data):
        raise FormatError(f"{path}: {len(data) - off} trailing bytes at offset {off}")
    return TemporalBipartiteGraph(
        features=features, node_origin=tuple(origin), directed_edges=edges,
        frame_partition=tuple(partitions),
        label=None if label < 0 else int(label))
