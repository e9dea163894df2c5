import io
import logging

import numpy as np
import pytest

from eyeaffect.corpus import (AnnotationTrace, FrameRecord, Partition, align_lengths, default_partition,
                              gold_standard, parse_annotations, parse_frames, read_partition,
                              serialize_annotations, serialize_frames, synth_corpus, synth_partition,
                              write_partition)
from eyeaffect.errors import (ArgumentError, FormatError, ParseError, RangeError,
                              SequencingError)

HEADER = b"frame,timestamp,confidence,gaze_angle_x,gaze_angle_y,AU45_r,pupil_diameter\n"


def csv_bytes(*rows):
    return io.BytesIO(HEADER + b"".join(row.encode() + b"\n" for row in rows))

def annotation_csv(n_rows, annotators, value=0.1):
    lines = ["time," + ",".join(annotators)]
    for i in range(n_rows):
        lines.append(f"{i / 25!r}," + ",".join(str(value) for _ in annotators))
    return io.BytesIO(("\n".join(lines) + "\n").encode())

def test_parse_frames_copies_gaze():
    records = parse_frames(csv_bytes("1,0.0,0.98,0.1,-0.2,0.0,3.1", "2,0.04,0.98,0.1,-0.2,0.5,3.2"))
    assert len(records) == 2
    assert records[0].gaze_x == 0.1
    assert records[0].gaze_y == -0.2
    assert records[1].frame_index == 1
    assert records[1].pupil_diameter == 3.2

def test_parse_frames_header_only():
    assert parse_frames(csv_bytes()) == []

def test_parse_frames_bad_cell_names_row_and_column():
    with pytest.raises(ParseError) as excinfo:
        parse_frames(csv_bytes("1,0.0,0.98,abc,-0.2,0.0,3.1"))
    assert excinfo.value.row == 1
    assert excinfo.value.column == "gaze_angle_x"

def test_parse_frames_rejects_non_increasing_index():
    with pytest.raises(SequencingError):
        parse_frames(csv_bytes("2,0.04,0.98,0.1,0.1,0.0,3.1", "1,0.0,0.98,0.1,0.1,0.0,3.1"))

def test_parse_frames_missing_required_column():
    with pytest.raises(FormatError, match="AU45_r"):
        parse_frames(io.BytesIO(b"frame,gaze_angle_x,gaze_angle_y\n1,0.1,0.1\n"))

def test_parse_frames_custom_column_map():
    data = io.BytesIO(b"gx,gy,blink\n0.1,0.2,0.0\n0.2,0.1,1.0\n")
    records = parse_frames(data, {"gaze_x": "gx", "gaze_y": "gy", "blink_intensity": "blink"})
    assert [r.gaze_x for r in records] == [0.1, 0.2]
    assert records[1].timestamp == pytest.approx(0.04)
    assert records[0].pupil_diameter is None

def test_frame_record_rejects_blink_out_of_range():
    with pytest.raises(RangeError):
        FrameRecord(0, 0.0, 1.0, 0.0, 0.0, 6.0)

def test_frame_record_rejects_off_rate_timestamp():
    with pytest.raises(FormatError, match="resampling"):
        FrameRecord(1, 0.05, 1.0, 0.0, 0.0, 0.0)

def test_serialize_frames_round_trip(small_corpus):
    frames, _ = small_corpus
    records = frames["S01"][:50]
    assert parse_frames(io.BytesIO(serialize_frames(records))) == records

def test_serialize_frames_round_trip_with_landmarks():
    angles = np.linspace(0, 2 * np.pi, 8, endpoint=False)
    ring = tuple((float(1.5 * np.cos(a)), float(1.5 * np.sin(a)), 10.0) for a in angles)
    records = [FrameRecord(i, i / 25, 0.9, 0.01 * i, -0.02, 0.3, eye_landmarks=ring) for i in range(3)]
    parsed = parse_frames(io.BytesIO(serialize_frames(records)))
    assert parsed == records

def test_parse_annotations_three_annotators():
    traces = parse_annotations(annotation_csv(100, ["A1", "A2", "A3"]))
    assert len(traces) == 3
    assert all(len(t) == 100 for t in traces)
    assert [t.annotator_id for t in traces] == ["A1", "A2", "A3"]

def test_parse_annotations_value_out_of_range():
    with pytest.raises(RangeError):
        parse_annotations(annotation_csv(5, ["A1"], value=1.5))

def test_parse_annotations_single_annotator():
    assert len(parse_annotations(annotation_csv(10, ["FM1"]))) == 1

def test_parse_annotations_missing_time_column():
    with pytest.raises(FormatError, match="time"):
        parse_annotations(io.BytesIO(b"A1,A2\n0.1,0.2\n"))

def test_parse_annotations_semicolon_separated():
    data = io.BytesIO(b"time;A1;A2\n0.0;0.1;0.2\n0.04;0.1;0.3\n")
    traces = parse_annotations(data, "valence")
    assert traces[1].values.tolist() == [0.2, 0.3]
    assert traces[0].dimension == "valence"

def test_parse_annotations_empty_file():
    with pytest.raises(FormatError):
        parse_annotations(io.BytesIO(b""))

def test_serialize_annotations_round_trip():
    traces = [AnnotationTrace("arousal", "A1", [0.1, -0.25, 0.5]),
              AnnotationTrace("arousal", "A2", [0.0, 0.125, -1.0])]
    parsed = parse_annotations(io.BytesIO(serialize_annotations(traces)))
    for original, back in zip(traces, parsed):
        assert back.annotator_id == original.annotator_id
        assert np.array_equal(back.values, original.values)

def test_default_partition():
    partition = default_partition()
    assert "P16" in partition.train
    assert len(partition.train) == 8
    assert len(partition.validation) == 8
    assert len(partition.test) == 7
    assert not set(partition.validation) & set(partition.test)
    assert len(set(partition.subjects)) == 23

def test_partition_rejects_overlap():
    with pytest.raises(ArgumentError, match="P16"):
        Partition(train=("P16",), validation=("P16",), test=())

def test_partition_file_round_trip(tmp_path):
    path = str(tmp_path / "partition.ini")
    write_partition(default_partition(), path)
    assert read_partition(path) == default_partition()

def test_partition_restricted_to_available():
    partition = default_partition().restricted_to(["P16", "P25", "P99"])
    assert partition.train == ("P16",)
    assert partition.validation == ("P25",)
    assert partition.test == ()

def test_gold_standard_is_framewise_mean():
    traces = [AnnotationTrace("arousal", "A1", [0.0, 0.2, 0.4]),
              AnnotationTrace("arousal", "A2", [0.2, 0.4])]
    gold = gold_standard(traces)
    assert gold.values == pytest.approx([0.1, 0.3])

def test_align_lengths_truncates_and_warns(caplog):
    trace = AnnotationTrace("arousal", "A1", np.zeros(10))
    with caplog.at_level(logging.WARNING):
        common, aligned = align_lengths(8, trace, "S01")
    assert common == 8
    assert len(aligned) == 8
    assert "truncating S01" in caplog.text

def test_synth_corpus_is_deterministic():
    first_frames, first_traces = synth_corpus(3, 2, 16.0, 1.0)
    second_frames, second_traces = synth_corpus(3, 2, 16.0, 1.0)
    for subject in first_frames:
        assert serialize_frames(first_frames[subject]) == serialize_frames(second_frames[subject])
        assert serialize_annotations(first_traces[subject]) == serialize_annotations(second_traces[subject])

def test_synth_corpus_rejects_lag_outside_sweep():
    with pytest.raises(ArgumentError):
        synth_corpus(1, 1, 20.0, 5.0)

def test_synth_corpus_rejects_short_duration():
    with pytest.raises(ArgumentError):
        synth_corpus(1, 1, 10.0, 0.0)

def lag_peak(lag):
    frames, traces = synth_corpus(11, 1, 60.0, lag)
    pupil = np.array([r.pupil_diameter for r in frames["S01"]])
    target = gold_standard(traces["S01"]).values
    n = len(pupil)
    scores = [np.corrcoef(pupil[:n - s], target[s:])[0, 1] for s in range(111)]
    return int(np.argmax(scores))

def test_synth_corpus_planted_lag_at_zero():
    assert lag_peak(0.0) == 0

def test_synth_corpus_planted_lag_two_seconds():
    assert lag_peak(2.0) == 50

def test_synth_partition_splits_two_thirds():
    partition = synth_partition(["S03", "S01", "S02"])
    assert partition.train == ("S01", "S02")
    assert partition.validation == ("S03",)
