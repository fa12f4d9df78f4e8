"""Checkpoint files for a trained model plus pooling head.

Byte layout, little-endian:

    magic b"HEGC" | version u32 | metadata length u64 | metadata (UTF-8
    JSON, sorted keys) | parameter blocks in the fixed order below.

Each parameter block is: name length u16, name bytes, rows u64, cols u64,
rows*cols float64 values.  Loading verifies the magic, version, and that the
stored blocks match the metadata-implied names and shapes exactly.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .aggregators import MultiAggregator
from .errors import FormatError
from .layers import HegLayer, HegModel
from .pooling import PoolingHead

MAGIC = b"HEGC"
VERSION = 1
_HEADER = struct.Struct("<4sIQ")

_PARAM_ORDER = (
    "layer1.w_root", "layer1.w_proj", "layer1.b_proj", "layer1.w_neigh",
    "layer1.b_neigh", "layer2.w_root", "layer2.w_proj", "layer2.b_proj",
    "layer2.w_neigh", "layer2.b_neigh", "head.w_gate", "head.b_gate",
    "head.w_cls", "head.b_cls")


def _params(model: HegModel, head: PoolingHead) -> dict[str, np.ndarray]:
    return {
        "layer1.w_root": model.layer1.w_root,
        "layer1.w_proj": model.layer1.aggregator.w_proj,
        "layer1.b_proj": model.layer1.aggregator.b_proj,
        "layer1.w_neigh": model.layer1.w_neigh,
        "layer1.b_neigh": model.layer1.b_neigh,
        "layer2.w_root": model.layer2.w_root,
        "layer2.w_proj": model.layer2.aggregator.w_proj,
        "layer2.b_proj": model.layer2.aggregator.b_proj,
        "layer2.w_neigh": model.layer2.w_neigh,
        "layer2.b_neigh": model.layer2.b_neigh,
        "head.w_gate": head.w_gate,
        "head.b_gate": head.b_gate,
        "head.w_cls": head.w_cls,
        "head.b_cls": head.b_cls,
    }


def save_checkpoint(path, model: HegModel, head: PoolingHead, seed: int) -> None:
    meta = {
        "activation": model.layer1.activation,
        "compression": model.compression_enabled,
        "feature_dim": model.feature_dim,
        "hidden_dim": model.hidden_dim,
        "kinds": list(model.layer1.aggregator.kinds),
        "num_classes": head.num_classes,
        "pooling": head.mode,
        "seed": seed,
        "std_epsilon": model.layer1.aggregator.std_epsilon,
    }
    blob = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    params = _params(model, head)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, len(blob)))
        fh.write(blob)
        for name in _PARAM_ORDER:
            a = params[name]
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<QQ", a.shape[0], a.shape[1]))
            fh.write(a.astype("<f8").tobytes(order="C"))


def load_checkpoint(path) -> tuple[HegModel, PoolingHead, dict]:
    """Rebuild (model, head, metadata); rejects any layout mismatch."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, meta_len = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r} at offset 0")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    off = _HEADER.size
    if off + meta_len > len(data):
        raise FormatError(f"{path}: truncated metadata at offset {off}")
    try:
        meta = json.loads(data[off:off + meta_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: corrupt metadata ({exc})") from exc
    off += meta_len

    params: dict[str, np.ndarray] = {}
    for expected_name in _PARAM_ORDER:
        if off + 2 > len(data):
            raise FormatError(f"{path}: truncated at offset {off}, "
                              f"expected block {expected_name!r}")
        (name_len,) = struct.unpack_from("<H", data, off)
        off += 2
        name = data[off:off + name_len].decode("utf-8")
        off += name_len
        if name != expected_name:
            raise FormatError(f"{path}: parameter {name!r} where "
                              f"{expected_name!r} expected")
        if off + 16 > len(data):
            raise FormatError(f"{path}: truncated shape for {name!r}")
        rows, cols = struct.unpack_from("<QQ", data, off)
        off += 16
        nbytes = rows * cols * 8
        if off + nbytes > len(data):
            raise FormatError(f"{path}: truncated data for {name!r} at offset {off}")
        params[name] = np.frombuffer(data, dtype="<f8", count=rows * cols,
                                     offset=off).reshape(rows, cols).copy()
        off += nbytes
    if off != len(data):
        raise FormatError(f"{path}: {len(data) - off} trailing bytes")

    kinds = tuple(meta["kinds"])
    eps = float(meta["std_epsilon"])
    f, hidden = int(meta["feature_dim"]), int(meta["hidden_dim"])
    try:
        model = HegModel(
            layer1=HegLayer(
                w_root=params["layer1.w_root"], w_neigh=params["layer1.w_neigh"],
                b_neigh=params["layer1.b_neigh"],
                aggregator=MultiAggregator(kinds=kinds, w_proj=params["layer1.w_proj"],
                                           b_proj=params["layer1.b_proj"],
                                           std_epsilon=eps),
                activation=meta["activation"]),
            layer2=HegLayer(
                w_root=params["layer2.w_root"], w_neigh=params["layer2.w_neigh"],
                b_neigh=params["layer2.b_neigh"],
                aggregator=MultiAggregator(kinds=kinds, w_proj=params["layer2.w_proj"],
                                           b_proj=params["layer2.b_proj"],
                                           std_epsilon=eps),
                activation="none"),
            compression_enabled=bool(meta["compression"]))
        head = PoolingHead(mode=meta["pooling"], w_gate=params["head.w_gate"],
                           b_gate=params["head.b_gate"], w_cls=params["head.w_cls"],
                           b_cls=params["head.b_cls"])
    except (ValueError, KeyError) as exc:
        raise FormatError(f"{path}: inconsistent checkpoint ({exc})") from exc
    if model.feature_dim != f or model.hidden_dim != hidden \
            or head.num_classes != int(meta["num_classes"]):
        raise FormatError(f"{path}: parameter shapes disagree with metadata")
    return model, head, meta
