import time

import numpy as np
import pytest

from eyeaffect.errors import ArgumentError, CatalogError
from eyeaffect.wavelet import (BLOCK_SIZE, WaveletDecomposition, block_names, coefficient_rows, dwt_db10,
                               idwt_db10, wavelet_feature_block)


def test_constant_signal():
    decomposition = dwt_db10(np.full(200, 3.0))
    for detail in decomposition.detail:
        assert np.max(np.abs(detail)) < 1e-9
    for level, approx in enumerate(decomposition.approximation, start=1):
        assert np.allclose(approx, 3.0 * 2 ** (level / 2), atol=1e-9)

def test_level_lengths():
    decomposition = dwt_db10(np.arange(200.0))
    assert [len(d) for d in decomposition.detail] == [100, 50, 25, 13, 7, 4, 2]
    assert decomposition.levels == 7

def test_energy_preserved_at_level_one(rng):
    signal = rng.normal(size=200)
    decomposition = dwt_db10(signal, levels=1)
    energy = np.sum(decomposition.detail[0] ** 2) + np.sum(decomposition.approximation[0] ** 2)
    assert energy == pytest.approx(np.sum(signal ** 2), abs=1e-8)

def test_inverse_reconstructs_signal(rng):
    signal = rng.normal(size=200)
    decomposition = dwt_db10(signal, levels=1)
    rebuilt = idwt_db10(decomposition.approximation[0], decomposition.detail[0])
    assert np.max(np.abs(rebuilt - signal)) < 1e-8

def test_inverse_of_zero_coefficients():
    assert np.all(idwt_db10(np.zeros(100), np.zeros(100)) == 0.0)

def test_analysis_of_synthesis(rng):
    approx, detail = rng.normal(size=100), rng.normal(size=100)
    decomposition = dwt_db10(idwt_db10(approx, detail), levels=1)
    assert np.max(np.abs(decomposition.approximation[0] - approx)) < 1e-8
    assert np.max(np.abs(decomposition.detail[0] - detail)) < 1e-8

def test_linearity(rng):
    x, y = rng.normal(size=200), rng.normal(size=200)
    combined = dwt_db10(2.0 * x + y)
    dx, dy = dwt_db10(x), dwt_db10(y)
    for level in range(7):
        assert np.allclose(combined.detail[level], 2.0 * dx.detail[level] + dy.detail[level], atol=1e-10)

def test_inverse_rejects_length_mismatch():
    with pytest.raises(ArgumentError):
        idwt_db10(np.zeros(100), np.zeros(99))

def test_too_many_levels():
    with pytest.raises(ArgumentError):
        dwt_db10(np.zeros(200), levels=8)

def test_block_has_173_values(rng):
    block = wavelet_feature_block(dwt_db10(rng.normal(size=200)))
    assert len(block) == BLOCK_SIZE == 173
    assert list(block) == block_names()

def test_deepest_level_has_no_kurtosis():
    names = block_names()
    assert "detail.l7.kurtosis" not in names
    assert "approx.l7.kurtosis" not in names
    assert "detail.l6.kurtosis" in names
    assert not any(name.startswith("approx") and name.endswith("zcr") for name in names)

def test_constant_signal_detail_rms():
    block = wavelet_feature_block(dwt_db10(np.full(200, 1.7)))
    for level in range(1, 8):
        assert abs(block[f"detail.l{level}.rms"]) < 1e-9

def test_block_needs_seven_levels(rng):
    with pytest.raises(CatalogError):
        wavelet_feature_block(dwt_db10(rng.normal(size=200), levels=5))

def test_block_over_many_windows(rng):
    windows = rng.normal(size=(4, 200))
    block = wavelet_feature_block(dwt_db10(windows))
    single = wavelet_feature_block(dwt_db10(windows[2]))
    for name in ("detail.l1.sd", "approx.l4.median", "detail.l7.zcr"):
        assert block[name][2] == pytest.approx(float(single[name]))

def test_coefficient_rows_cover_every_coefficient(rng):
    rows = coefficient_rows(dwt_db10(rng.normal(size=200)))
    assert len(rows) == 2 * (100 + 50 + 25 + 13 + 7 + 4 + 2)
    assert rows[0][:3] == (1, "detail", 0)

def test_coefficient_rows_reject_batches(rng):
    with pytest.raises(ArgumentError):
        coefficient_rows(dwt_db10(rng.normal(size=(2, 200))))

def test_decomposition_of_many_windows_is_fast(rng):
    windows = rng.normal(size=(10000, 200))
    start = time.perf_counter()
    decomposition = dwt_db10(windows)
    assert time.perf_counter() - start < 1.0
    assert isinstance(decomposition, WaveletDecomposition)
    assert decomposition.detail[0].shape == (10000, 100)
