"""Data model for videos, per-frame detections, and tube-window geometry.

Boxes are stored center-format (center_x, center_y, width, height) in pixels.
Annotation files use corner format (x1, y1, x2, y2) and are converted at
ingestion; see `read_annotations` for the line format.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import IngestionError


class SequenceTooShortError(ValueError):
    """Video has fewer frames than the requested tube span."""


@dataclass(frozen=True)
class Detection:
    """One object box on one frame."""

    frame_index: int
    object_id: str
    box: tuple[float, float, float, float]  # (cx, cy, w, h)
    agent_class: str | None = None

    def __post_init__(self):
        cx, cy, w, h = self.box
        if w <= 0 or h <= 0:
            raise ValueError(f"detection box must have positive size, got w={w}, h={h}")
        if self.frame_index < 0:
            raise ValueError(f"frame_index must be >= 0, got {self.frame_index}")


@dataclass(frozen=True)
class VideoSequence:
    """A labelled video: frame geometry plus all of its detections."""

    video_id: str
    fps: float
    frame_count: int
    frame_width: int
    frame_height: int
    detections: tuple[Detection, ...] = ()
    label: int | None = None

    def __post_init__(self):
        for det in self.detections:
            if det.frame_index >= self.frame_count:
                raise ValueError(
                    f"{self.video_id}: detection on frame {det.frame_index} "
                    f">= frame_count {self.frame_count}")
            cx, cy, w, h = det.box
            if cx + w / 2 <= 0 or cx - w / 2 >= self.frame_width \
                    or cy + h / 2 <= 0 or cy - h / 2 >= self.frame_height:
                raise ValueError(
                    f"{self.video_id}: box {det.box} on frame {det.frame_index} "
                    f"does not intersect the {self.frame_width}x{self.frame_height} image")

    def detections_on(self, frame_index: int) -> list[Detection]:
        return [d for d in self.detections if d.frame_index == frame_index]


@dataclass(frozen=True)
class TubeWindow:
    """Geometry of one object's tube: frame span plus scaled, clamped crop box."""

    object_id: str
    frame_range: tuple[int, int]  # [start, end)
    crop_box: tuple[float, float, float, float]
    tau: int
    channels: int = 3


def sample_frames(seq: VideoSequence, stride: int) -> list[int]:
    """Frame indices 0, stride, 2*stride, ... below the frame count."""
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    return list(range(0, seq.frame_count, stride))


def tube_window(det: Detection, seq: VideoSequence, tau: int, scale: float,
                channels: int = 3) -> TubeWindow:
    """Window of tau frames around the detection with a scaled crop box.

    The range [t - tau/2, t + tau/2) is clamped to [0, T); any clipped
    frames are replicated on the opposite side so the span is always tau
    when the video is long enough.  The crop box grows by `scale` about its
    center and is then clamped to the image rectangle.
    """
    if tau < 2 or tau % 2 != 0:
        raise ValueError(f"tau must be even and >= 2, got {tau}")
    if scale <= 0:
        raise ValueError(f"scale must be > 0, got {scale}")
    if seq.frame_count < tau:
        raise SequenceTooShortError(
            f"{seq.video_id}: frame_count {seq.frame_count} < tau {tau}")

    half = tau // 2
    start = det.frame_index - half
    end = det.frame_index + half
    if start < 0:
        end += -start
        start = 0
    if end > seq.frame_count:
        start -= end - seq.frame_count
        end = seq.frame_count
    start = max(start, 0)

    cx, cy, w, h = det.box
    sw, sh = w * scale, h * scale
    x1 = max(0.0, cx - sw / 2)
    y1 = max(0.0, cy - sh / 2)
    x2 = min(float(seq.frame_width), cx + sw / 2)
    y2 = min(float(seq.frame_height), cy + sh / 2)
    crop = ((x1 + x2) / 2, (y1 + y2) / 2, x2 - x1, y2 - y1)
    return TubeWindow(object_id=det.object_id, frame_range=(start, end),
                      crop_box=crop, tau=tau, channels=channels)


# --- annotation ingestion -------------------------------------------------
#
# Line-delimited JSON, one object per line.  Each video starts with a header
# record, followed by its detection records (corner-format boxes):
#
#   {"record": "video", "video_id": "v0", "fps": 30.0, "frame_count": 12,
#    "frame_width": 256, "frame_height": 256, "label": 1}
#   {"record": "detection", "video_id": "v0", "frame_index": 0,
#    "object_id": "o0", "x1": 10.0, "y1": 20.0, "x2": 50.0, "y2": 60.0,
#    "agent_class": "car"}

_VIDEO_FIELDS = ("video_id", "fps", "frame_count", "frame_width", "frame_height", "label")
_DET_FIELDS = ("video_id", "frame_index", "object_id", "x1", "y1", "x2", "y2")


def read_annotations(path) -> list[VideoSequence]:
    """Parse an annotation file into VideoSequences, in file order."""
    headers: dict[str, dict] = {}
    dets: dict[str, list[Detection]] = {}
    order: list[str] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestionError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
            kind = rec.get("record")
            if kind == "video":
                _require(rec, _VIDEO_FIELDS, path, lineno)
                vid = str(rec["video_id"])
                if vid in headers:
                    raise IngestionError(f"{path}:{lineno}: duplicate video header {vid!r}")
                headers[vid] = rec
                dets[vid] = []
                order.append(vid)
            elif kind == "detection":
                _require(rec, _DET_FIELDS, path, lineno)
                vid = str(rec["video_id"])
                if vid not in headers:
                    raise IngestionError(
                        f"{path}:{lineno}: detection for {vid!r} before its video header")
                x1, y1, x2, y2 = (float(rec[k]) for k in ("x1", "y1", "x2", "y2"))
                try:
                    det = Detection(
                        frame_index=int(rec["frame_index"]),
                        object_id=str(rec["object_id"]),
                        box=((x1 + x2) / 2, (y1 + y2) / 2, x2 - x1, y2 - y1),
                        agent_class=rec.get("agent_class"))
                except ValueError as exc:
                    raise IngestionError(f"{path}:{lineno}: {exc}") from exc
                dets[vid].append(det)
            else:
                raise IngestionError(f"{path}:{lineno}: unknown record type {kind!r}")
    seqs = []
    for vid in order:
        h = headers[vid]
        try:
            seqs.append(VideoSequence(
                video_id=vid, fps=float(h["fps"]), frame_count=int(h["frame_count"]),
                frame_width=int(h["frame_width"]), frame_height=int(h["frame_height"]),
                detections=tuple(dets[vid]),
                label=None if h["label"] is None else int(h["label"])))
        except ValueError as exc:
            raise IngestionError(f"{path}: video {vid!r}: {exc}") from exc
    return seqs


def write_annotations(path, seqs: list[VideoSequence]) -> None:
    """Inverse of read_annotations (boxes converted back to corner format)."""
    with open(path, "w", encoding="utf-8") as fh:
        for seq in seqs:
            fh.write(json.dumps({
                "record": "video", "video_id": seq.video_id, "fps": seq.fps,
                "frame_count": seq.frame_count, "frame_width": seq.frame_width,
                "frame_height": seq.frame_height, "label": seq.label},
                sort_keys=True) + "\n")
            for det in seq.detections:
                cx, cy, w, h = det.box
                fh.write(json.dumps({
                    "record": "detection", "video_id": seq.video_id,
                    "frame_index": det.frame_index, "object_id": det.object_id,
                    "x1": cx - w / 2, "y1": cy - h / 2,
                    "x2": cx + w / 2, "y2": cy + h / 2,
                    "agent_class": det.agent_class}, sort_keys=True) + "\n")


def _require(rec: dict, fields, path, lineno: int) -> None:
    missing = [f for f in fields if f not in rec]
    if missing:
        raise IngestionError(f"{path}:{lineno}: missing fields {missing}")
