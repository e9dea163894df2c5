import logging

import numpy as np
import pytest

from eyeaffect.corpus import FrameRecord
from eyeaffect.errors import ArgumentError, GeometryError, MissingChannelError, ShapeError
from eyeaffect.lld import (BINARY_CHANNELS, NUMERIC_CHANNELS, ThresholdConfig, derive_binary_llds,
                           derive_llds, derive_numeric_llds, pupil_diameter_from_landmarks)


def ring_points(rx, ry, n=8):
    angles = np.linspace(0, 2 * np.pi, n, endpoint=False)
    return [(rx * np.cos(a), ry * np.sin(a), 5.0) for a in angles]

def test_gaze_first_difference(make_frames):
    series = derive_numeric_llds(make_frames([0.1, 0.3]))
    assert series.numeric["d_gaze_x"] == pytest.approx([0.0, 0.2])

def test_constant_pupil_has_zero_delta(make_frames):
    series = derive_numeric_llds(make_frames([0.0] * 5, pupil=[3.2] * 5))
    assert np.all(series.numeric["d_pupil_diam"] == 0.0)

def test_single_frame_deltas_are_zero(make_frames):
    series = derive_numeric_llds(make_frames([0.4], pupil=[2.0]))
    for name in ("d_gaze_x", "d_gaze_y", "d_pupil_diam"):
        assert series.numeric[name].tolist() == [0.0]

def test_numeric_channels_complete(make_frames):
    series = derive_numeric_llds(make_frames([0.0, 0.1, 0.2]))
    assert set(series.numeric) == set(NUMERIC_CHANNELS)
    assert len(series) == 3

def test_missing_pupil_source():
    frames = [FrameRecord(0, 0.0, 1.0, 0.0, 0.0, 0.0)]
    with pytest.raises(MissingChannelError):
        derive_numeric_llds(frames)

def test_pupil_falls_back_to_landmarks():
    points = [(0.0, 0.0, 0.0)] * 20 + ring_points(1.5, 1.5)
    frames = [FrameRecord(0, 0.0, 1.0, 0.0, 0.0, 0.0, eye_landmarks=tuple(map(tuple, points)))]
    assert derive_numeric_llds(frames).numeric["pupil_diam"][0] == pytest.approx(3.0)

def test_pupil_from_circle():
    assert pupil_diameter_from_landmarks(ring_points(1.5, 1.5), range(8)) == pytest.approx(3.0)

def test_pupil_from_coincident_points():
    assert pupil_diameter_from_landmarks([(1.0, 2.0, 3.0)] * 8, range(8)) == 0.0

def test_pupil_from_ellipse_matches_mean_distance():
    points = np.array(ring_points(1.0, 2.0))
    centroid = points.mean(axis=0)
    expected = 2.0 * np.mean(np.sqrt(np.sum((points - centroid) ** 2, axis=1)))
    assert pupil_diameter_from_landmarks(points, range(8)) == pytest.approx(expected, abs=1e-12)

def test_pupil_needs_three_points():
    with pytest.raises(GeometryError):
        pupil_diameter_from_landmarks(ring_points(1.0, 1.0, n=2), range(2))

def test_ring_indices_out_of_range():
    with pytest.raises(GeometryError):
        pupil_diameter_from_landmarks(ring_points(1.0, 1.0), range(20, 28))

def test_eye_closure_threshold(make_frames):
    series = derive_llds(make_frames([0.0] * 3, blink=[0.0, 2.0, 0.0]), ThresholdConfig(closure_threshold=1.0))
    assert series.binary["eye_closure"].tolist() == [False, True, False]

def test_pupil_dilation_and_constriction(make_frames):
    series = derive_llds(make_frames([0.0] * 3, pupil=[3.0, 3.05, 3.0]), ThresholdConfig(pupil_delta=0.01))
    assert series.binary["pupil_dilation"].tolist() == [False, True, False]
    assert series.binary["pupil_constriction"].tolist() == [False, False, True]
    assert not np.any(series.binary["pupil_dilation"] & series.binary["pupil_constriction"])

def test_gaze_approach(make_frames):
    series = derive_llds(make_frames([0.3, 0.2, 0.25]), ThresholdConfig(approach_epsilon=0.0))
    assert series.binary["gaze_approach"].tolist() == [False, True, False]

def test_eyes_fixated_on_small_motion(make_frames):
    series = derive_llds(make_frames([0.0, 0.001, 0.1]), ThresholdConfig(fixation_threshold=0.005))
    assert series.binary["eyes_fixated"].tolist() == [True, True, False]

def test_eyes_fixated_is_scale_homogeneous(make_frames, rng):
    gaze_x = np.cumsum(rng.normal(scale=0.004, size=200))
    gaze_y = np.cumsum(rng.normal(scale=0.004, size=200))
    base = derive_llds(make_frames(gaze_x, gaze_y), ThresholdConfig(fixation_threshold=0.005))
    scaled = derive_llds(make_frames(4.0 * gaze_x, 4.0 * gaze_y),
                         ThresholdConfig(fixation_threshold=4.0 * 0.005))
    assert 0 < base.binary["eyes_fixated"].sum() < 200
    assert np.array_equal(scaled.binary["eyes_fixated"], base.binary["eyes_fixated"])

def test_binary_derivation_is_idempotent(make_frames, rng):
    frames = make_frames(rng.normal(scale=0.1, size=50), rng.normal(scale=0.1, size=50),
                         blink=rng.uniform(0, 3, size=50), pupil=3.0 + rng.normal(scale=0.05, size=50))
    once = derive_binary_llds(derive_numeric_llds(frames))
    twice = derive_binary_llds(once)
    assert set(twice.binary) == set(BINARY_CHANNELS)
    for name in BINARY_CHANNELS:
        assert np.array_equal(twice.binary[name], once.binary[name])
    assert twice.direct_gaze_source == once.direct_gaze_source

def test_dilation_and_constriction_exclusive_at_zero_delta(make_frames, rng):
    pupil = np.repeat(3.0 + rng.normal(scale=0.05, size=20), 3)
    series = derive_llds(make_frames([0.0] * len(pupil), pupil=pupil), ThresholdConfig(pupil_delta=0.0))
    dilation, constriction = series.binary["pupil_dilation"], series.binary["pupil_constriction"]
    assert not np.any(dilation & constriction)
    flat = series.numeric["d_pupil_diam"] == 0.0
    assert flat.sum() >= 40
    assert not np.any((dilation | constriction) & flat)
    assert np.array_equal(dilation | constriction, ~flat)

def test_coded_direct_gaze_is_used(make_frames):
    series = derive_llds(make_frames([0.5, 0.0, 0.5], direct=[True, False, True]))
    assert series.binary["direct_gaze"].tolist() == [True, False, True]
    assert series.direct_gaze_source == "coded"

def test_direct_gaze_heuristic_fallback(make_frames, caplog):
    with caplog.at_level(logging.WARNING):
        series = derive_llds(make_frames([0.5, 0.01, 0.2]))
    assert series.binary["direct_gaze"].tolist() == [False, True, False]
    assert series.direct_gaze_source == "heuristic"
    assert "direct gaze derived" in caplog.text

def test_partially_coded_direct_gaze(make_frames):
    series = derive_llds(make_frames([0.5, 0.01], direct=[True, None]))
    assert series.binary["direct_gaze"].tolist() == [True, True]
    assert series.direct_gaze_source == "mixed"

def test_binary_channels_complete(make_frames):
    series = derive_llds(make_frames([0.0, 0.1, 0.0, 0.2]))
    assert set(series.binary) == set(BINARY_CHANNELS)
    assert all(series.binary[name].dtype == bool for name in BINARY_CHANNELS)

def test_binary_rejects_direct_gaze_length_mismatch(make_frames):
    numeric = derive_numeric_llds(make_frames([0.0, 0.1]))
    with pytest.raises(ShapeError):
        derive_binary_llds(numeric, ThresholdConfig(), [True])

def test_threshold_config_rejects_negative():
    with pytest.raises(ArgumentError):
        ThresholdConfig(pupil_delta=-0.1)

def test_window_is_inclusive(make_frames):
    series = derive_llds(make_frames([0.0, 0.1, 0.2, 0.3, 0.4]))
    window = series.window(1, 3)
    assert len(window) == 3
    assert window.channel("gaze_x") == pytest.approx([0.1, 0.2, 0.3])

def test_unknown_channel(make_frames):
    series = derive_numeric_llds(make_frames([0.0]))
    with pytest.raises(MissingChannelError):
        series.channel("heart_rate")
