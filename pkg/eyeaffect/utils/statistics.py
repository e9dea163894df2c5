import warnings
from typing import Dict, Sequence

import numpy as np
from scipy import stats

from eyeaffect.errors import ArgumentError

FRAME_RATE = 25
DEGENERATE_VARIANCE = 1e-12

STAT_NAMES = ('min', 'max', 'mean', 'median', 'q1', 'q3', 'skewness', 'kurtosis', 'sd',
              'iqr12', 'iqr23', 'iqr13', 'slope', 'intercept', 'rms', 'zcr')
EVENT_STAT_NAMES = ('ratio', 'dur_min', 'dur_median', 'dur_mean', 'dur_max', 'dur_total')

_QUANTILE_STATS = {'median', 'q1', 'q3', 'iqr12', 'iqr23', 'iqr13'}


def window_stats(values: np.ndarray, names: Sequence[str], rate: int = FRAME_RATE) -> Dict[str, np.ndarray]:
    """Statistics over the last axis; leading axes index independent windows.

    Quantiles use linear interpolation between order statistics and moments are
    population moments. Near-constant windows report 0 for skewness, kurtosis
    and ZCR; skewness needs 3 values and kurtosis 4.
    """
    unknown = [n for n in names if n not in STAT_NAMES]
    if unknown:
        raise ArgumentError(f"unknown statistics: {', '.join(unknown)}")
    values = np.asarray(values, dtype=float)
    n = values.shape[-1] if values.ndim else 0
    if n == 0:
        raise ArgumentError("statistics need a non-empty window")

    mean = values.mean(axis=-1)
    centered = values - mean[..., None]
    m2 = np.mean(centered ** 2, axis=-1)
    degenerate = m2 < DEGENERATE_VARIANCE

    out: Dict[str, np.ndarray] = {}
    if _QUANTILE_STATS.intersection(names):
        q1, median, q3 = np.quantile(values, [0.25, 0.5, 0.75], axis=-1)
    for name in names:
        if name == 'min':
            out[name] = values.min(axis=-1)
        elif name == 'max':
            out[name] = values.max(axis=-1)
        elif name == 'mean':
            out[name] = mean
        elif name == 'median':
            out[name] = median
        elif name == 'q1':
            out[name] = q1
        elif name == 'q3':
            out[name] = q3
        elif name == 'iqr12':
            out[name] = median - q1
        elif name == 'iqr23':
            out[name] = q3 - median
        elif name == 'iqr13':
            out[name] = q3 - q1
        elif name == 'sd':
            out[name] = np.sqrt(m2)
        elif name == 'skewness':
            with warnings.catch_warnings():
                # near-constant windows are zeroed below
                warnings.simplefilter("ignore", RuntimeWarning)
                skewness = stats.skew(values, axis=-1)
            out[name] = np.where(degenerate | (n < 3), 0.0, skewness)
        elif name == 'kurtosis':
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                kurt = stats.kurtosis(values, axis=-1, fisher=False)
            out[name] = np.where(degenerate | (n < 4), 0.0, kurt)
        elif name in ('slope', 'intercept'):
            t = np.arange(n) / rate
            tc = t - t.mean()
            denom = np.sum(tc ** 2)
            slope = (centered @ tc) / denom if denom > 0 else np.zeros_like(mean)
            out[name] = slope if name == 'slope' else mean - slope * t.mean()
        elif name == 'rms':
            out[name] = np.sqrt(np.mean(values ** 2, axis=-1))
        elif name == 'zcr':
            if n < 2:
                out[name] = np.zeros_like(mean)
            else:
                crossings = np.count_nonzero(centered[..., 1:] * centered[..., :-1] < 0, axis=-1)
                out[name] = np.where(degenerate, 0.0, crossings / (n - 1))
    return out


def run_lengths(flags: np.ndarray) -> np.ndarray:
    """Lengths of the contiguous True runs of a 1-D boolean array."""
    padded = np.concatenate(([False], np.asarray(flags, dtype=bool), [False]))
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    return edges[1::2] - edges[::2]


def run_stats(flags: np.ndarray, names: Sequence[str], rate: int = FRAME_RATE) -> Dict[str, float]:
    unknown = [n for n in names if n not in EVENT_STAT_NAMES]
    if unknown:
        raise ArgumentError(f"unknown event statistics: {', '.join(unknown)}")
    flags = np.asarray(flags, dtype=bool)
    if flags.size == 0:
        raise ArgumentError("event statistics need a non-empty window")
    durations = run_lengths(flags) / rate
    out: Dict[str, float] = {}
    for name in names:
        if name == 'ratio':
            out[name] = float(np.count_nonzero(flags)) / flags.size
        elif durations.size == 0:
            out[name] = 0.0
        elif name == 'dur_min':
            out[name] = float(durations.min())
        elif name == 'dur_median':
            out[name] = float(np.median(durations))
        elif name == 'dur_mean':
            out[name] = float(durations.mean())
        elif name == 'dur_max':
            out[name] = float(durations.max())
        elif name == 'dur_total':
            out[name] = float(durations.sum())
    return out
