"""Node feature files: the HEGF binary format and its index sidecar.

A feature file carries one row per detection (what a frozen video backbone
would emit for that object's tube).  Byte layout, little-endian throughout:

    offset  size  field
    0       4     magic b"HEGF"
    4       4     version, u32 (currently 1)
    8       8     row count, u64
    16      8     feature dim, u64
    24      ...   rows * dim float32 values, row-major

The index sidecar (same path + ".idx") is plain text, one line per row in
row order: "frame_index<TAB>object_id<TAB>row".
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, IngestionError

MAGIC = b"HEGF"
VERSION = 1
_HEADER = struct.Struct("<4sIQQ")

INDEX_SUFFIX = ".idx"


@dataclass
class FeatureStore:
    """Feature rows for one video plus the (frame_index, object_id) -> row map."""

    features: np.ndarray  # (rows, dim) float64
    index: dict[tuple[int, str], int]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def lookup(self, frame_index: int, object_id: str) -> np.ndarray:
        key = (frame_index, object_id)
        if key not in self.index:
            raise IngestionError(
                f"no feature row for frame {frame_index}, object {object_id!r}")
        return self.features[self.index[key]]


def write_feature_file(path, features: np.ndarray,
                       index: dict[tuple[int, str], int] | None = None) -> None:
    """Write a HEGF file (values stored as float32) and, if given, its index."""
    a = np.asarray(features, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"features must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("features contain NaN or Inf")
    rows, dim = a.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, rows, dim))
        fh.write(a.astype("<f4").tobytes(order="C"))
    if index is not None:
        _write_index(str(path) + INDEX_SUFFIX, index, rows)


def read_feature_file(path) -> np.ndarray:
    """Read a HEGF file back to a float64 matrix (exact float32 upcast)."""
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise FormatError(f"{path}: truncated header, got {len(header)} of "
                              f"{_HEADER.size} bytes")
        magic, version, rows, dim = _HEADER.unpack(header)
        if magic != MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r} at offset 0")
        if version != VERSION:
            raise FormatError(f"{path}: unsupported version {version} at offset 4")
        expected = rows * dim * 4
        payload = fh.read()
    if len(payload) != expected:
        raise FormatError(f"{path}: expected {expected} payload bytes at offset "
                          f"{_HEADER.size}, got {len(payload)}")
    data = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    return data.reshape(rows, dim)


def write_store(path, store: FeatureStore) -> None:
    write_feature_file(path, store.features, store.index)


def read_store(path) -> FeatureStore:
    features = read_feature_file(path)
    index = _read_index(str(path) + INDEX_SUFFIX, features.shape[0])
    return FeatureStore(features=features, index=index)


def _write_index(path, index: dict[tuple[int, str], int], rows: int) -> None:
    entries = sorted(index.items(), key=lambda kv: kv[1])
    if [row for _, row in entries] != list(range(rows)):
        raise ValueError("index rows must cover 0..rows-1 exactly once")
    with open(path, "w", encoding="utf-8") as fh:
        for (frame_index, object_id), row in entries:
            fh.write(f"{frame_index}\t{object_id}\t{row}\n")


def _read_index(path, rows: int) -> dict[tuple[int, str], int]:
    index: dict[tuple[int, str], int] = {}
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"{path}: missing index sidecar ({exc})") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise FormatError(f"{path}:{lineno}: expected 3 tab-separated fields")
            frame_index, object_id, row = int(parts[0]), parts[1], int(parts[2])
            index[(frame_index, object_id)] = row
    if len(index) != rows:
        raise FormatError(f"{path}: index has {len(index)} entries for {rows} rows")
    return index
