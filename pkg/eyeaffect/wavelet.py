"""db10 discrete wavelet transform of pupil-diameter windows and its statistics block."""
import math
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np
import pywt

from eyeaffect.errors import ArgumentError, CatalogError
from eyeaffect.utils.statistics import window_stats

WAVELET = 'db10'
# Periodization repeats the last sample of odd-length inputs, so every level
# down to length 2 stays valid (200 -> 100, 50, 25, 13, 7, 4, 2).
MODE = 'periodization'
LEVELS = 7

DETAIL_STATS = ('min', 'max', 'median', 'q1', 'q3', 'skewness', 'kurtosis', 'sd',
                'iqr12', 'iqr23', 'iqr13', 'rms', 'zcr')
APPROX_STATS = tuple(s for s in DETAIL_STATS if s != 'zcr')


@dataclass(frozen=True)
class WaveletDecomposition:
    detail: Tuple[np.ndarray, ...]
    approximation: Tuple[np.ndarray, ...]

    @property
    def levels(self) -> int:
        return len(self.detail)


def max_level(length: int) -> int:
    return int(math.floor(math.log2(length))) if length >= 2 else 0


def dwt_db10(signal: np.ndarray, levels: int = LEVELS) -> WaveletDecomposition:
    """Multilevel analysis along the last axis; leading axes are independent signals."""
    approx = np.asarray(signal, dtype=float)
    length = approx.shape[-1] if approx.ndim else 0
    if length < 2:
        raise ArgumentError("wavelet analysis needs at least 2 samples")
    if not 1 <= levels <= max_level(length):
        raise ArgumentError(f"{levels} levels too deep for length {length} (max {max_level(length)})")
    details: List[np.ndarray] = []
    approximations: List[np.ndarray] = []
    for _ in range(levels):
        approx, detail = pywt.dwt(approx, WAVELET, mode=MODE, axis=-1)
        details.append(detail)
        approximations.append(approx)
    return WaveletDecomposition(tuple(details), tuple(approximations))


def idwt_db10(approximation: np.ndarray, detail: np.ndarray) -> np.ndarray:
    """Single-level synthesis; inverts the level-1 pair of ``dwt_db10``."""
    approximation = np.asarray(approximation, dtype=float)
    detail = np.asarray(detail, dtype=float)
    if approximation.shape != detail.shape:
        raise ArgumentError(f"coefficient shapes differ: {approximation.shape} vs {detail.shape}")
    return pywt.idwt(approximation, detail, WAVELET, mode=MODE, axis=-1)


def block_layout(levels: int = LEVELS) -> List[Tuple[str, int, Tuple[str, ...]]]:
    """(coefficient type, level, statistics) in catalog order.

    Kurtosis is dropped at the deepest level and ZCR for approximation
    coefficients.
    """
    layout = []
    for kind, base in (('detail', DETAIL_STATS), ('approx', APPROX_STATS)):
        for level in range(1, levels + 1):
            names = base if level < levels else tuple(s for s in base if s != 'kurtosis')
            layout.append((kind, level, names))
    return layout


def block_names(levels: int = LEVELS) -> List[str]:
    return [f"{kind}.l{level}.{stat}" for kind, level, names in block_layout(levels) for stat in names]


BLOCK_SIZE = len(block_names())
assert BLOCK_SIZE == 78 + 12 + 72 + 11 == 173


def wavelet_feature_block(decomposition: WaveletDecomposition) -> Dict[str, np.ndarray]:
    """The 173 named statistics; arrays carry one value per analysed signal."""
    if decomposition.levels != LEVELS:
        raise CatalogError(f"wavelet block needs {LEVELS} levels, got {decomposition.levels}")
    block: Dict[str, np.ndarray] = {}
    for kind, level, names in block_layout():
        source = decomposition.detail if kind == 'detail' else decomposition.approximation
        values = window_stats(source[level - 1], names)
        for stat in names:
            block[f"{kind}.l{level}.{stat}"] = values[stat]
    return block


def coefficient_rows(decomposition: WaveletDecomposition) -> List[Tuple[int, str, int, float]]:
    """``level,type,index,value`` rows of a single-signal decomposition."""
    rows = []
    for level in range(1, decomposition.levels + 1):
        for kind, source in (('detail', decomposition.detail), ('approx', decomposition.approximation)):
            coefficients = np.asarray(source[level - 1])
            if coefficients.ndim != 1:
                raise ArgumentError("coefficient dump expects a single analysed signal")
            rows.extend((level, kind, i, float(v)) for i, v in enumerate(coefficients))
    return rows
