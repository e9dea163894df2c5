import numpy as np
import pytest

from eyeaffect import wavelet
from eyeaffect.errors import CatalogError, InsufficientDataError, NumericError
from eyeaffect.features import (EYE_CATALOG, FeatureCatalog, FeatureEntry, FeatureMatrix,
                                assemble_feature_vector, descriptive_stats, event_stats,
                                extract_features, read_feature_csv, window_feature_vector,
                                window_slices, write_feature_csv)
from eyeaffect.lld import derive_llds


@pytest.fixture(scope="module")
def series():
    from eyeaffect.corpus import synth_corpus
    frames, _ = synth_corpus(seed=3, n_subjects=1, duration=16.0, lag=0.0)
    return derive_llds(frames["S01"])

def test_catalog_sizes():
    assert len(EYE_CATALOG) == 292
    assert len(EYE_CATALOG.filter(group="gaze")) == 69
    assert len(EYE_CATALOG.filter(group="pupil")) == 209
    assert len(EYE_CATALOG.filter(group="closure")) == 14
    assert len(EYE_CATALOG.filter(kind="event")) == 26
    assert len(EYE_CATALOG.filter(kind="stat")) == 93
    assert len(EYE_CATALOG.filter(kind="wavelet")) == 173

def test_catalog_names():
    assert "gaze.x.max" in EYE_CATALOG
    assert "gaze.direct.ratio" in EYE_CATALOG
    assert "closure.blink_intensity.iqr12" in EYE_CATALOG
    assert "pupil.wavelet.detail.l3.rms" in EYE_CATALOG
    assert "closure.blink_intensity.min" not in EYE_CATALOG
    assert "gaze.approach.dur_min" not in EYE_CATALOG

def test_catalog_hash_is_stable():
    assert EYE_CATALOG.hash() == FeatureCatalog(EYE_CATALOG.entries).hash()
    assert EYE_CATALOG.hash() != EYE_CATALOG.filter(group="gaze").hash()

def test_catalog_rejects_duplicate_names():
    with pytest.raises(CatalogError):
        FeatureCatalog([FeatureEntry("a", "gaze", "stat"), FeatureEntry("a", "pupil", "stat")])

def test_window_slices_exact_length():
    assert window_slices(200) == [(0, 199)]

def test_window_slices_longer_series():
    slices = window_slices(210)
    assert len(slices) == 11
    assert slices[-1] == (10, 209)

def test_window_slices_too_short():
    with pytest.raises(InsufficientDataError):
        window_slices(199)

def test_window_slices_stride():
    assert window_slices(210, window=200, stride=5) == [(0, 199), (5, 204), (10, 209)]

def test_descriptive_stats_constant_window():
    stats = descriptive_stats([2.0] * 200)
    assert stats["sd"] == 0.0
    assert stats["slope"] == pytest.approx(0.0, abs=1e-12)
    assert stats["skewness"] == 0.0
    assert stats["kurtosis"] == 0.0
    assert stats["rms"] == pytest.approx(2.0)
    assert stats["zcr"] == 0.0

def test_descriptive_stats_ramp():
    values = [2.0 * (i / 25) for i in range(200)]
    stats = descriptive_stats(values, ("slope", "intercept"))
    assert stats["slope"] == pytest.approx(2.0)
    assert stats["intercept"] == pytest.approx(0.0, abs=1e-12)

def test_descriptive_stats_quartiles():
    stats = descriptive_stats([1.0, 5.0, 3.0, 7.0])
    assert stats["median"] == pytest.approx(4.0)
    assert stats["q1"] == pytest.approx(2.5)
    assert stats["q3"] == pytest.approx(5.5)
    assert stats["iqr12"] == pytest.approx(1.5)
    assert stats["iqr23"] == pytest.approx(1.5)
    assert stats["iqr13"] == pytest.approx(3.0)

def test_descriptive_stats_population_moments():
    stats = descriptive_stats([0.0, 0.0, 0.0, 1.0])
    assert stats["skewness"] == pytest.approx(2.0 / np.sqrt(3.0))
    assert stats["kurtosis"] == pytest.approx(7.0 / 3.0)

def test_descriptive_stats_short_window_moments():
    stats = descriptive_stats([0.0, 1.0, 5.0])
    assert stats["skewness"] != 0.0
    assert stats["kurtosis"] == 0.0

def test_descriptive_stats_order_and_shift_invariance(rng):
    values = rng.normal(size=200)
    stats = descriptive_stats(values)
    assert stats["min"] <= stats["q1"] <= stats["median"] <= stats["q3"] <= stats["max"]
    shifted = descriptive_stats(values + 10.0)
    for name in ("sd", "iqr12", "iqr23", "iqr13", "skewness", "kurtosis", "slope"):
        assert shifted[name] == pytest.approx(stats[name], abs=1e-9)

def test_event_stats_runs():
    stats = event_stats([0, 1, 1, 1, 0, 0, 1, 1, 0, 0])
    assert stats["ratio"] == pytest.approx(0.5)
    assert stats["dur_mean"] == pytest.approx(0.1)
    assert stats["dur_max"] == pytest.approx(0.12)
    assert stats["dur_total"] == pytest.approx(0.2)
    assert stats["dur_min"] == pytest.approx(0.08)
    assert stats["dur_median"] == pytest.approx(0.1)

def test_event_stats_all_false():
    stats = event_stats([False] * 200)
    assert all(value == 0.0 for value in stats.values())

def test_event_stats_all_true():
    stats = event_stats([True] * 200)
    assert stats["ratio"] == 1.0
    assert stats["dur_max"] == pytest.approx(8.0)
    assert stats["dur_total"] == pytest.approx(8.0)

def test_assemble_feature_vector_length(series):
    window = series.window(0, 199)
    block = wavelet.wavelet_feature_block(wavelet.dwt_db10(window.channel("pupil_diam")))
    vector, catalog = assemble_feature_vector(window, block)
    assert vector.shape == (292,)
    assert catalog is EYE_CATALOG
    assert np.all(np.isfinite(vector))

def test_assemble_feature_vector_wrong_wavelet_width(series):
    with pytest.raises(CatalogError):
        assemble_feature_vector(series.window(0, 199), [0.0] * 172)

def test_extract_features_matches_single_windows(series):
    matrix = extract_features(series)
    assert len(matrix) == len(series) - 199
    assert matrix.frames[0] == 199
    for row in (0, 57, len(matrix) - 1):
        end = int(matrix.frames[row])
        expected = window_feature_vector(series.window(end - 199, end))
        assert np.allclose(matrix.rows[row], expected, rtol=1e-9, atol=1e-12)

def test_feature_csv_round_trip(series, tmp_path):
    matrix = extract_features(series, stride=50)
    path = str(tmp_path / "S01.csv")
    write_feature_csv(matrix, path)
    loaded = read_feature_csv(path)
    assert loaded.catalog == matrix.catalog
    assert np.array_equal(loaded.rows, matrix.rows)
    assert np.array_equal(loaded.frames, matrix.frames)

def test_feature_csv_keeps_external_columns(tmp_path):
    catalog = FeatureCatalog([FeatureEntry("f0", "external", "external")])
    path = str(tmp_path / "ext.csv")
    write_feature_csv(FeatureMatrix(np.array([[1.0], [2.0]]), catalog, [0, 1]), path)
    assert read_feature_csv(path).catalog.entries[0].group == "external"

def test_feature_matrix_rejects_nan():
    catalog = FeatureCatalog([FeatureEntry("f0", "external", "external")])
    with pytest.raises(NumericError):
        FeatureMatrix(np.array([[np.nan]]), catalog, [0])

def test_feature_matrix_select(series):
    matrix = extract_features(series, stride=100)
    gaze = matrix.select(EYE_CATALOG.mask(group="gaze"))
    assert gaze.rows.shape == (len(matrix), 69)
    assert all(name.startswith("gaze.") for name in gaze.catalog.names)
