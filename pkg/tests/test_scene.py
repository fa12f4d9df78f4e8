import pytest

from heg.errors import IngestionError
from heg.scene import (Detection, SequenceTooShortError, VideoSequence,
                       read_annotations, sample_frames, tube_window,
                       write_annotations)
from conftest import rng_for


def make_seq(frame_count=32, dets=(), label=1):
    return VideoSequence(video_id="v0", fps=30.0, frame_count=frame_count,
                         frame_width=256, frame_height=256,
                         detections=tuple(dets), label=label)


def test_detection_rejects_degenerate_boxes():
    with pytest.raises(ValueError):
        Detection(frame_index=0, object_id="a", box=(10, 10, 0, 5))
    with pytest.raises(ValueError):
        Detection(frame_index=-1, object_id="a", box=(10, 10, 5, 5))


def test_sequence_rejects_out_of_range_detections():
    det = Detection(frame_index=40, object_id="a", box=(10, 10, 5, 5))
    with pytest.raises(ValueError, match="frame 40"):
        make_seq(frame_count=32, dets=[det])
    outside = Detection(frame_index=0, object_id="a", box=(400, 10, 5, 5))
    with pytest.raises(ValueError, match="does not intersect"):
        make_seq(dets=[outside])


def test_sample_frames_every_stride():
    seq = make_seq(frame_count=23)
    assert sample_frames(seq, 5) == [0, 5, 10, 15, 20]
    assert sample_frames(seq, 1) == list(range(23))
    with pytest.raises(ValueError):
        sample_frames(seq, 0)


def test_sample_frames_random_lengths():
    rng = rng_for(2)
    for _ in range(50):
        t = int(rng.integers(1, 100))
        stride = int(rng.integers(1, 9))
        frames = sample_frames(make_seq(frame_count=t), stride)
        assert frames[0] == 0
        assert all(f < t for f in frames)
        assert all(b - a == stride for a, b in zip(frames, frames[1:]))


def test_tube_window_centered():
    det = Detection(frame_index=16, object_id="a", box=(100, 100, 20, 40))
    w = tube_window(det, make_seq(), tau=16, scale=1.5)
    assert w.frame_range == (8, 24)
    assert w.frame_range[1] - w.frame_range[0] == 16
    cx, cy, cw, ch = w.crop_box
    assert (cx, cy) == (100, 100)
    assert (cw, ch) == (30, 60)


def test_tube_window_clamps_and_replicates():
    early = Detection(frame_index=2, object_id="a", box=(100, 100, 20, 20))
    w = tube_window(early, make_seq(), tau=16, scale=1.0)
    assert w.frame_range == (0, 16)
    late = Detection(frame_index=30, object_id="a", box=(100, 100, 20, 20))
    w = tube_window(late, make_seq(), tau=16, scale=1.0)
    assert w.frame_range == (16, 32)


def test_tube_window_span_is_always_tau():
    rng = rng_for(3)
    for _ in range(100):
        t = int(rng.integers(16, 80))
        det = Detection(frame_index=int(rng.integers(0, t)), object_id="a",
                        box=(128, 128, 30, 30))
        w = tube_window(det, make_seq(frame_count=t), tau=16, scale=1.5)
        lo, hi = w.frame_range
        assert hi - lo == 16
        assert 0 <= lo and hi <= t


def test_tube_window_crop_clamped_to_image():
    det = Detection(frame_index=16, object_id="a", box=(10, 250, 40, 40))
    w = tube_window(det, make_seq(), tau=16, scale=1.5)
    cx, cy, cw, ch = w.crop_box
    assert cx - cw / 2 >= 0 and cx + cw / 2 <= 256
    assert cy - ch / 2 >= 0 and cy + ch / 2 <= 256


def test_tube_window_validation():
    det = Detection(frame_index=4, object_id="a", box=(100, 100, 20, 20))
    with pytest.raises(ValueError):
        tube_window(det, make_seq(), tau=15, scale=1.0)
    with pytest.raises(SequenceTooShortError):
        tube_window(det, make_seq(frame_count=8), tau=16, scale=1.0)


def test_annotation_round_trip(tmp_path):
    dets = [
        Detection(frame_index=0, object_id="a", box=(40.0, 60.0, 16.0, 24.0),
                  agent_class="car"),
        Detection(frame_index=3, object_id="b", box=(120.5, 80.25, 10.0, 12.5)),
    ]
    seqs = [make_seq(dets=dets, label=1),
            VideoSequence(video_id="v1", fps=24.0, frame_count=8,
                          frame_width=128, frame_height=96,
                          detections=(), label=None)]
    path = tmp_path / "ann.jsonl"
    write_annotations(path, seqs)
    back = read_annotations(path)
    assert len(back) == 2
    assert back[0].video_id == "v0" and back[0].label == 1
    assert back[1].label is None and back[1].fps == 24.0
    for orig, got in zip(seqs[0].detections, back[0].detections):
        assert got.frame_index == orig.frame_index
        assert got.object_id == orig.object_id
        assert got.agent_class == orig.agent_class
        assert got.box == pytest.approx(orig.box, rel=1e-12)


def test_read_annotations_reports_line_numbers(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"record": "video", "video_id": "v0", "fps": 30, '
                    '"frame_count": 8, "frame_width": 64, "frame_height": 64, '
                    '"label": 0}\nnot json\n')
    with pytest.raises(IngestionError, match="bad.jsonl:2"):
        read_annotations(path)


def test_read_annotations_rejects_orphan_detection(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"record": "detection", "video_id": "v9", "frame_index": 0, '
                    '"object_id": "a", "x1": 1, "y1": 1, "x2": 5, "y2": 5}\n')
    with pytest.raises(IngestionError, match="before its video header"):
        read_annotations(path)


def test_read_annotations_rejects_missing_field_and_unknown_record(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"record": "video", "video_id": "v0"}\n')
    with pytest.raises(IngestionError, match="missing"):
        read_annotations(path)
    path.write_text('{"record": "mystery"}\n')
    with pytest.raises(IngestionError, match="mystery"):
        read_annotations(path)


def test_read_annotations_rejects_duplicate_header(tmp_path):
    header = ('{"record": "video", "video_id": "v0", "fps": 30, '
              '"frame_count": 8, "frame_width": 64, "frame_height": 64, '
              '"label": 0}\n')
    path = tmp_path / "bad.jsonl"
    path.write_text(header + header)
    with pytest.raises(IngestionError, match="duplicate"):
        read_annotations(path)
