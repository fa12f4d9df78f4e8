"""Deterministic synthetic scenes with statistically coded class signal.

Each task draws node features i.i.d. per dimension from a small per-class
value set, so the class signal lives in a chosen sample statistic:

    skew_coded      class 0: {-sqrt(2), +sqrt(2)} equiprobable
                    class 1: {-1, -1, +2} uniform
                    Both have mean 0 and variance 2; only the third central
                    moment differs (0 vs 2), so mean- and std-aggregation
                    carry no class signal in expectation.
    mean_coded      class 0: {-1, +1}; class 1: {0, 2}   (means 0 vs 1)
    variance_coded  class 0: {-1, +1}; class 1: {-2, +2} (variances 1 vs 4)

Generation is deterministic by seed, with one spawned child stream per
video, so per-video generation order never matters.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .features import FeatureStore, read_store, write_store
from .scene import Detection, VideoSequence, read_annotations, write_annotations

TASKS = ("skew_coded", "variance_coded", "mean_coded")

_ROOT2 = math.sqrt(2.0)

# task -> class -> (values, probabilities)
_VALUE_SETS = {
    "skew_coded": {
        0: ((-_ROOT2, _ROOT2), (0.5, 0.5)),
        1: ((-1.0, 2.0), (2.0 / 3.0, 1.0 / 3.0)),
    },
    "mean_coded": {
        0: ((-1.0, 1.0), (0.5, 0.5)),
        1: ((0.0, 2.0), (0.5, 0.5)),
    },
    "variance_coded": {
        0: ((-1.0, 1.0), (0.5, 0.5)),
        1: ((-2.0, 2.0), (0.5, 0.5)),
    },
}


@dataclass(frozen=True)
class SynthSpec:
    """Shape and coding of one generated dataset."""

    num_videos: int
    frames_per_video: int
    objects_min: int
    objects_max: int
    feature_dim: int
    task: str = "skew_coded"
    seed: int = 0
    fps: float = 30.0
    frame_width: int = 256
    frame_height: int = 256

    def __post_init__(self):
        if self.frames_per_video < 2:
            raise ValueError("frames_per_video must be >= 2")
        if self.feature_dim < 1:
            raise ValueError("feature_dim must be >= 1")
        if not 0 < self.objects_min <= self.objects_max:
            raise ValueError("need 0 < objects_min <= objects_max")
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}")
        if self.num_videos < 1:
            raise ValueError("num_videos must be >= 1")


def designed_moments(task: str, label: int) -> tuple[float, float, float]:
    """(mean, variance, third central moment) of the coding distribution."""
    values, probs = _VALUE_SETS[task][label]
    v = np.array(values)
    p = np.array(probs)
    mean = float(v @ p)
    var = float(((v - mean) ** 2) @ p)
    m3 = float(((v - mean) ** 3) @ p)
    return mean, var, m3


def generate(spec: SynthSpec) -> list[tuple[VideoSequence, FeatureStore]]:
    """Generate the full dataset in memory; labels alternate 0/1."""
    children = np.random.SeedSequence(spec.seed).spawn(spec.num_videos)
    return [_generate_video(spec, i, children[i]) for i in range(spec.num_videos)]


def _random_layout(rng: np.random.Generator, spec: SynthSpec,
                   ) -> tuple[list[Detection], dict[tuple[int, str], int]]:
    """Random per-frame detections; index maps (frame, object) to row order."""
    detections: list[Detection] = []
    index: dict[tuple[int, str], int] = {}
    for frame in range(spec.frames_per_video):
        count = int(rng.integers(spec.objects_min, spec.objects_max + 1))
        for obj in range(count):
            cx = float(rng.uniform(0.15, 0.85) * spec.frame_width)
            cy = float(rng.uniform(0.15, 0.85) * spec.frame_height)
            w = float(rng.uniform(12.0, 48.0))
            h = float(rng.uniform(12.0, 48.0))
            object_id = f"o{obj}"
            detections.append(Detection(frame_index=frame, object_id=object_id,
                                        box=(cx, cy, w, h), agent_class=None))
            index[(frame, object_id)] = len(index)
    return detections, index


def _finish_video(spec: SynthSpec, i: int, label: int | None,
                  detections: list[Detection], index: dict,
                  rows: np.ndarray) -> tuple[VideoSequence, FeatureStore]:
    seq = VideoSequence(video_id=f"v{i:05d}", fps=spec.fps,
                        frame_count=spec.frames_per_video,
                        frame_width=spec.frame_width, frame_height=spec.frame_height,
                        detections=tuple(detections), label=label)
    # float32 round-trip now so in-memory and file-loaded features agree bit-for-bit
    features = rows.astype(np.float32).astype(np.float64)
    return seq, FeatureStore(features=features, index=index)


def _generate_video(spec: SynthSpec, i: int,
                    child: np.random.SeedSequence) -> tuple[VideoSequence, FeatureStore]:
    rng = np.random.Generator(np.random.PCG64(child))
    label = i % 2
    values, probs = _VALUE_SETS[spec.task][label]
    detections, index = _random_layout(rng, spec)
    rows = rng.choice(values, size=(len(index), spec.feature_dim), p=probs)
    return _finish_video(spec, i, label, detections, index, rows)


def gaussian_dataset(spec: SynthSpec) -> list[tuple[VideoSequence, FeatureStore]]:
    """Same scene layout as generate() but standard-normal features.

    Continuous features keep gradient checks away from the median-tie and
    relu kinks that the discrete coding tasks would land on.
    """
    children = np.random.SeedSequence(spec.seed).spawn(spec.num_videos)
    out = []
    for i, child in enumerate(children):
        rng = np.random.Generator(np.random.PCG64(child))
        detections, index = _random_layout(rng, spec)
        rows = rng.normal(size=(len(index), spec.feature_dim))
        out.append(_finish_video(spec, i, i % 2, detections, index, rows))
    return out


# --- dataset directories --------------------------------------------------
#
# A dataset directory holds annotations.jsonl, features/<video_id>.hegf
# (plus .idx sidecars), and splits.json mapping split name -> video ids.

def write_dataset(dataset: list[tuple[VideoSequence, FeatureStore]], out_dir,
                  seed: int = 0,
                  fractions: tuple[float, float, float] = (0.7, 0.15, 0.15)) -> None:
    """Write annotations, per-video feature files, and a 3-way split."""
    os.makedirs(out_dir, exist_ok=True)
    feat_dir = os.path.join(out_dir, "features")
    os.makedirs(feat_dir, exist_ok=True)
    write_annotations(os.path.join(out_dir, "annotations.jsonl"),
                      [seq for seq, _ in dataset])
    for seq, store in dataset:
        write_store(os.path.join(feat_dir, f"{seq.video_id}.hegf"), store)
    ids = [seq.video_id for seq, _ in dataset]
    order = np.random.Generator(np.random.PCG64(seed)).permutation(len(ids))
    n_train = round(len(ids) * fractions[0])
    n_val = round(len(ids) * fractions[1])
    splits = {
        "train": sorted(ids[i] for i in order[:n_train]),
        "val": sorted(ids[i] for i in order[n_train:n_train + n_val]),
        "test": sorted(ids[i] for i in order[n_train + n_val:]),
    }
    with open(os.path.join(out_dir, "splits.json"), "w", encoding="utf-8") as fh:
        json.dump(splits, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_dataset(data_dir) -> tuple[list[tuple[VideoSequence, FeatureStore]],
                                    dict[str, list[str]]]:
    """Read a dataset directory back; returns (videos, splits)."""
    seqs = read_annotations(os.path.join(data_dir, "annotations.jsonl"))
    dataset = []
    for seq in seqs:
        store = read_store(os.path.join(data_dir, "features", f"{seq.video_id}.hegf"))
        dataset.append((seq, store))
    splits_path = os.path.join(data_dir, "splits.json")
    if os.path.exists(splits_path):
        with open(splits_path, "r", encoding="utf-8") as fh:
            splits = json.load(fh)
    else:
        splits = {"train": [seq.video_id for seq, _ in dataset], "val": [], "test": []}
    return dataset, splits
