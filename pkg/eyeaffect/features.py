"""Sliding-window statistics and event features: the 292-dimensional eye feature set."""
import hashlib
import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view

from eyeaffect import wavelet
from eyeaffect.errors import ArgumentError, CatalogError, InsufficientDataError, NumericError
from eyeaffect.lld import DescriptorSeries
from eyeaffect.utils.statistics import EVENT_STAT_NAMES, STAT_NAMES, run_stats, window_stats

logger = logging.getLogger(__name__)

WINDOW = 200
STRIDE = 1
GROUPS = ('gaze', 'pupil', 'closure')
KINDS = ('stat', 'event', 'wavelet')

NUMERIC_STATS = ('min', 'max', 'mean', 'median', 'q1', 'q3', 'skewness', 'kurtosis', 'sd',
                 'iqr12', 'iqr23', 'iqr13', 'slope', 'intercept')
BLINK_STATS = ('max', 'mean', 'median', 'q3', 'sd', 'iqr12', 'iqr23', 'slope', 'intercept')
SHORT_EVENT_STATS = ('ratio', 'dur_mean', 'dur_max', 'dur_total')
LONG_EVENT_STATS = ('ratio', 'dur_min', 'dur_median', 'dur_mean', 'dur_max')
APPROACH_EVENT_STATS = tuple(s for s in LONG_EVENT_STATS if s != 'dur_min')

# (group, short name, descriptor channel, kind, statistics) in catalog order.
BLOCKS: Tuple[Tuple[str, str, str, str, Tuple[str, ...]], ...] = (
    ('gaze', 'direct', 'direct_gaze', 'event', SHORT_EVENT_STATS),
    ('pupil', 'dilation', 'pupil_dilation', 'event', SHORT_EVENT_STATS),
    ('pupil', 'constriction', 'pupil_constriction', 'event', SHORT_EVENT_STATS),
    ('gaze', 'approach', 'gaze_approach', 'event', APPROACH_EVENT_STATS),
    ('gaze', 'fixated', 'eyes_fixated', 'event', LONG_EVENT_STATS),
    ('closure', 'closure', 'eye_closure', 'event', LONG_EVENT_STATS),
    ('pupil', 'diameter', 'pupil_diam', 'stat', NUMERIC_STATS),
    ('pupil', 'd_diameter', 'd_pupil_diam', 'stat', NUMERIC_STATS),
    ('gaze', 'x', 'gaze_x', 'stat', NUMERIC_STATS),
    ('gaze', 'y', 'gaze_y', 'stat', NUMERIC_STATS),
    ('gaze', 'dx', 'd_gaze_x', 'stat', NUMERIC_STATS),
    ('gaze', 'dy', 'd_gaze_y', 'stat', NUMERIC_STATS),
    ('closure', 'blink_intensity', 'blink_intensity', 'stat', BLINK_STATS),
)
WAVELET_CHANNEL = 'pupil_diam'


@dataclass(frozen=True)
class FeatureEntry:
    name: str
    group: str
    kind: str


class FeatureCatalog:
    def __init__(self, entries: Iterable[FeatureEntry]) -> None:
        self.entries: Tuple[FeatureEntry, ...] = tuple(entries)
        self.names: Tuple[str, ...] = tuple(e.name for e in self.entries)
        if len(set(self.names)) != len(self.names):
            raise CatalogError("feature names must be unique")
        self._index = {name: i for i, name in enumerate(self.names)}

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, name: object) -> bool:
        return name in self._index

    def __eq__(self, other: object) -> bool:
        return isinstance(other, FeatureCatalog) and self.entries == other.entries

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise CatalogError(f"unknown feature: {name}")

    def mask(self, group: Optional[str] = None, kind: Optional[str] = None) -> np.ndarray:
        return np.array([(group is None or e.group == group) and (kind is None or e.kind == kind)
                         for e in self.entries], dtype=bool)

    def filter(self, group: Optional[str] = None, kind: Optional[str] = None) -> 'FeatureCatalog':
        return self.subset(self.mask(group, kind))

    def subset(self, mask: np.ndarray) -> 'FeatureCatalog':
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (len(self),):
            raise CatalogError(f"mask of length {mask.size} does not match catalog of {len(self)}")
        return FeatureCatalog(e for e, keep in zip(self.entries, mask) if keep)

    def hash(self) -> str:
        digest = hashlib.sha256()
        for e in self.entries:
            digest.update(f"{e.name}|{e.group}|{e.kind}\n".encode('utf-8'))
        return digest.hexdigest()


def _build_catalog() -> FeatureCatalog:
    entries = [FeatureEntry(f"{group}.{short}.{stat}", group, kind)
               for group, short, _channel, kind, stat_names in BLOCKS for stat in stat_names]
    entries += [FeatureEntry(f"pupil.wavelet.{name}", 'pupil', 'wavelet') for name in wavelet.block_names()]
    return FeatureCatalog(entries)


EYE_CATALOG = _build_catalog()
assert len(EYE_CATALOG) == 12 + 14 + 84 + 9 + 173 == 292


def catalog() -> FeatureCatalog:
    return EYE_CATALOG


@dataclass(frozen=True)
class FeatureMatrix:
    rows: np.ndarray
    catalog: FeatureCatalog
    frames: np.ndarray

    def __post_init__(self) -> None:
        rows = np.asarray(self.rows, dtype=float)
        if rows.ndim != 2 or rows.shape[1] != len(self.catalog):
            raise CatalogError(f"matrix width {rows.shape[-1]} does not match catalog of {len(self.catalog)}")
        if rows.shape[0] != len(self.frames):
            raise CatalogError("one frame index per row is required")
        if not np.all(np.isfinite(rows)):
            raise NumericError("feature matrix contains NaN or infinite cells")
        object.__setattr__(self, 'rows', rows)
        object.__setattr__(self, 'frames', np.asarray(self.frames, dtype=np.int64))

    def __len__(self) -> int:
        return self.rows.shape[0]

    @property
    def frame_offset(self) -> int:
        return int(self.frames[0]) if len(self.frames) else WINDOW - 1

    def select(self, mask: np.ndarray) -> 'FeatureMatrix':
        return FeatureMatrix(self.rows[:, mask], self.catalog.subset(mask), self.frames)


def window_slices(series_length: int, window: int = WINDOW, stride: int = STRIDE) -> List[Tuple[int, int]]:
    """Inclusive (start, end) pairs of every full window."""
    if window < 1 or stride < 1:
        raise ArgumentError("window and stride must be positive")
    if series_length < window:
        raise InsufficientDataError(f"series of {series_length} frames is shorter than the {window}-frame window")
    return [(end - window + 1, end) for end in range(window - 1, series_length, stride)]


def descriptive_stats(values: Sequence[float], stat_set: Sequence[str] = STAT_NAMES) -> Dict[str, float]:
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size == 0:
        raise ArgumentError("descriptive statistics need a non-empty 1-D window")
    return {name: float(v) for name, v in window_stats(values, stat_set).items()}


def event_stats(flags: Sequence[bool], stat_set: Sequence[str] = EVENT_STAT_NAMES) -> Dict[str, float]:
    return run_stats(np.asarray(flags, dtype=bool), stat_set)


def assemble_feature_vector(window: DescriptorSeries,
                            wavelet_block: Union[Mapping[str, float], Sequence[float]]
                            ) -> Tuple[np.ndarray, FeatureCatalog]:
    if isinstance(wavelet_block, Mapping):
        try:
            wavelet_values = [float(wavelet_block[name]) for name in wavelet.block_names()]
        except KeyError as e:
            raise CatalogError(f"wavelet block lacks {e}")
    else:
        wavelet_values = [float(v) for v in wavelet_block]
    if len(wavelet_values) != wavelet.BLOCK_SIZE:
        raise CatalogError(f"wavelet block has {len(wavelet_values)} values, expected {wavelet.BLOCK_SIZE}")

    vector: List[float] = []
    for _group, _short, channel, kind, stat_names in BLOCKS:
        if kind == 'event':
            values = event_stats(window.channel(channel), stat_names)
        else:
            values = descriptive_stats(window.channel(channel), stat_names)
        vector.extend(values[s] for s in stat_names)
    vector.extend(wavelet_values)
    if len(vector) != len(EYE_CATALOG):
        raise CatalogError(f"assembled {len(vector)} values for a catalog of {len(EYE_CATALOG)}")
    return np.array(vector), EYE_CATALOG


def window_feature_vector(window: DescriptorSeries) -> np.ndarray:
    """Feature vector of one window, including its wavelet block."""
    decomposition = wavelet.dwt_db10(window.channel(WAVELET_CHANNEL))
    vector, _ = assemble_feature_vector(window, wavelet.wavelet_feature_block(decomposition))
    return vector


def extract_features(series: DescriptorSeries, window: int = WINDOW, stride: int = STRIDE) -> FeatureMatrix:
    """Features for every full window, labelled by the window's last frame.

    Numeric statistics and the wavelet block are evaluated for all windows at
    once; results match ``window_feature_vector`` applied window by window.
    """
    slices = window_slices(len(series), window, stride)
    ends = np.array([end for _, end in slices], dtype=np.int64)
    columns: List[np.ndarray] = []
    for _group, _short, channel, kind, stat_names in BLOCKS:
        values = series.channel(channel)
        if kind == 'event':
            per_window = [run_stats(values[start:end + 1], stat_names) for start, end in slices]
            columns.extend(np.array([w[s] for w in per_window]) for s in stat_names)
        else:
            windows = sliding_window_view(values, window)[::stride]
            computed = window_stats(windows, stat_names)
            columns.extend(computed[s] for s in stat_names)
    pupil_windows = sliding_window_view(series.channel(WAVELET_CHANNEL), window)[::stride]
    block = wavelet.wavelet_feature_block(wavelet.dwt_db10(pupil_windows))
    columns.extend(block[name] for name in wavelet.block_names())
    rows = np.column_stack(columns)
    logger.debug(f"extracted {rows.shape[0]} windows x {rows.shape[1]} features", extra={'stage': 'features'})
    return FeatureMatrix(rows, EYE_CATALOG, ends)


def write_feature_csv(matrix: FeatureMatrix, path: str) -> None:
    frame = pd.DataFrame(matrix.rows, columns=list(matrix.catalog.names))
    frame.insert(0, 'frame', matrix.frames)
    frame.to_csv(path, index=False, lineterminator='\n', float_format='%.17g')


def read_feature_csv(path: str) -> FeatureMatrix:
    frame = pd.read_csv(path, float_precision='round_trip')
    if frame.columns[0] != 'frame':
        raise CatalogError(f"{path}: first column must be 'frame'")
    names = list(frame.columns[1:])
    entries = []
    for name in names:
        if name in EYE_CATALOG:
            entries.append(EYE_CATALOG.entries[EYE_CATALOG.index(name)])
        else:
            entries.append(FeatureEntry(name, 'external', 'external'))
    return FeatureMatrix(frame[names].to_numpy(dtype=float), FeatureCatalog(entries),
                         frame['frame'].to_numpy(dtype=np.int64))
