"""Frame and annotation ingestion, subject partitions and synthetic corpora."""
import configparser
import csv
import io
import logging
from dataclasses import dataclass, field
from typing import BinaryIO, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.signal import lfilter

from eyeaffect.errors import (ArgumentError, FormatError, ParseError, RangeError,
                              SequencingError)

logger = logging.getLogger(__name__)

FRAME_RATE = 25
DIMENSIONS = ('arousal', 'valence')
MAX_SYNTH_LAG = 4.4

# OpenFace 2.0 FeatureExtraction column names. Landmark keys are prefixes
# completed with the landmark index.
DEFAULT_COLUMN_MAP: Dict[str, str] = {
    'frame': 'frame',
    'timestamp': 'timestamp',
    'confidence': 'confidence',
    'gaze_x': 'gaze_angle_x',
    'gaze_y': 'gaze_angle_y',
    'blink_intensity': 'AU45_r',
    'pupil_diameter': 'pupil_diameter',
    'direct_gaze': 'direct_gaze',
    'landmark_x': 'eye_lmk_X_',
    'landmark_y': 'eye_lmk_Y_',
    'landmark_z': 'eye_lmk_Z_',
}

_REQUIRED_FIELDS = ('gaze_x', 'gaze_y', 'blink_intensity')
_TRUE_TOKENS = {'1', 'true', 't', 'yes', 'y'}
_FALSE_TOKENS = {'0', 'false', 'f', 'no', 'n'}


@dataclass(frozen=True)
class FrameRecord:
    frame_index: int
    timestamp: float
    confidence: float
    gaze_x: float
    gaze_y: float
    blink_intensity: float
    pupil_diameter: Optional[float] = None
    eye_landmarks: Optional[Tuple[Tuple[float, float, float], ...]] = None
    direct_gaze: Optional[bool] = None

    def __post_init__(self) -> None:
        if self.frame_index < 0:
            raise RangeError(f"frame index must be >= 0, got {self.frame_index}")
        if abs(self.timestamp - self.frame_index / FRAME_RATE) > 1e-9:
            raise FormatError(
                f"frame {self.frame_index}: timestamp {self.timestamp} does not match "
                f"{FRAME_RATE} fps; resampling is not supported")
        if not 0.0 <= self.blink_intensity <= 5.0:
            raise RangeError(f"frame {self.frame_index}: blink intensity {self.blink_intensity} outside [0, 5]")
        if not 0.0 <= self.confidence <= 1.0:
            raise RangeError(f"frame {self.frame_index}: confidence {self.confidence} outside [0, 1]")
        if self.pupil_diameter is not None and self.pupil_diameter <= 0:
            raise RangeError(f"frame {self.frame_index}: pupil diameter must be > 0")


@dataclass(frozen=True)
class AnnotationTrace:
    dimension: str
    annotator_id: str
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if self.dimension not in DIMENSIONS:
            raise ArgumentError(f"unknown affect dimension: {self.dimension}")
        values = np.array(self.values, dtype=float)
        if values.ndim != 1:
            raise FormatError("annotation values must be one-dimensional")
        outside = np.flatnonzero(~((values >= -1.0) & (values <= 1.0)))
        if outside.size:
            row = int(outside[0])
            raise RangeError(
                f"annotator '{self.annotator_id}', row {row + 1}: value {values[row]} outside [-1, 1]")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    def __len__(self) -> int:
        return len(self.values)

    def with_values(self, values: np.ndarray) -> 'AnnotationTrace':
        return AnnotationTrace(self.dimension, self.annotator_id, values)


@dataclass(frozen=True)
class Partition:
    train: Tuple[str, ...]
    validation: Tuple[str, ...]
    test: Tuple[str, ...]

    def __post_init__(self) -> None:
        for name in ('train', 'validation', 'test'):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        seen: Dict[str, str] = {}
        for name in ('train', 'validation', 'test'):
            for subject in getattr(self, name):
                if subject in seen:
                    raise ArgumentError(f"subject {subject} appears in both {seen[subject]} and {name}")
                seen[subject] = name

    @property
    def subjects(self) -> Tuple[str, ...]:
        return self.train + self.validation + self.test

    def split(self, name: str) -> Tuple[str, ...]:
        if name not in ('train', 'validation', 'test'):
            raise ArgumentError(f"unknown split: {name}")
        return getattr(self, name)

    def restricted_to(self, available: Sequence[str]) -> 'Partition':
        keep = set(available)
        return Partition(*(tuple(s for s in getattr(self, n) if s in keep)
                           for n in ('train', 'validation', 'test')))


def default_partition() -> Partition:
    return Partition(
        train=('P16', 'P17', 'P19', 'P21', 'P23', 'P26', 'P30', 'P65'),
        validation=('P25', 'P28', 'P34', 'P37', 'P41', 'P48', 'P56', 'P58'),
        test=('P39', 'P42', 'P43', 'P45', 'P46', 'P62', 'P64'),
    )


def read_partition(path: str) -> Partition:
    parser = configparser.ConfigParser()
    if not parser.read(path, encoding='utf-8'):
        raise FormatError(f"cannot read partition file {path}")
    splits = {}
    for name in ('train', 'validation', 'test'):
        raw = parser.get(name, 'subjects', fallback='')
        splits[name] = tuple(s.strip() for s in raw.split(',') if s.strip())
    return Partition(**splits)


def write_partition(partition: Partition, path: str) -> None:
    parser = configparser.ConfigParser()
    for name in ('train', 'validation', 'test'):
        parser[name] = {'subjects': ','.join(partition.split(name))}
    with open(path, 'w', encoding='utf-8') as f:
        parser.write(f)


def _resolve_columns(column_map: Optional[Dict[str, str]]) -> Dict[str, str]:
    columns = dict(DEFAULT_COLUMN_MAP)
    if column_map:
        unknown = set(column_map) - set(DEFAULT_COLUMN_MAP)
        if unknown:
            raise ArgumentError(f"unknown column map keys: {', '.join(sorted(unknown))}")
        columns.update(column_map)
    return columns


def _numeric_column(df: pd.DataFrame, column: str, required: bool) -> np.ndarray:
    raw = df[column].astype(str).str.strip()
    numeric = pd.to_numeric(raw, errors='coerce')
    empty = raw == ''
    bad = numeric.isna() & ~empty
    if required:
        bad = bad | empty
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise ParseError(row + 1, column, raw.iloc[row])
    return numeric.to_numpy(dtype=float)


def _flag_column(df: pd.DataFrame, column: str) -> List[Optional[bool]]:
    flags: List[Optional[bool]] = []
    for row, token in enumerate(df[column].astype(str).str.strip().str.lower()):
        if token == '':
            flags.append(None)
        elif token in _TRUE_TOKENS:
            flags.append(True)
        elif token in _FALSE_TOKENS:
            flags.append(False)
        else:
            raise ParseError(row + 1, column, token)
    return flags


def _landmark_indices(df: pd.DataFrame, prefix: str) -> List[int]:
    indices = []
    for name in df.columns:
        if name.startswith(prefix) and name[len(prefix):].isdigit():
            indices.append(int(name[len(prefix):]))
    return sorted(indices)


def parse_frames(csv_stream: BinaryIO, column_map: Optional[Dict[str, str]] = None,
                 frame_base: int = 1) -> List[FrameRecord]:
    """Parse an OpenFace-style frame CSV into FrameRecords.

    ``frame_base`` is the value of the frame column on the first video frame
    (OpenFace counts from 1). Missing optional columns yield absent fields.
    """
    columns = _resolve_columns(column_map)
    df = pd.read_csv(csv_stream, dtype=str, skipinitialspace=True,
                     keep_default_na=False, encoding='utf-8')
    df.columns = [str(c).strip() for c in df.columns]

    missing = [columns[k] for k in _REQUIRED_FIELDS if columns[k] not in df.columns]
    if missing:
        raise FormatError(f"frame CSV lacks required columns: {', '.join(missing)}")
    n = len(df)
    if n == 0:
        return []

    if columns['frame'] in df.columns:
        frames = _numeric_column(df, columns['frame'], required=True)
        if np.any(frames != np.round(frames)):
            raise FormatError("frame column must hold integers")
        frame_index = frames.astype(np.int64) - frame_base
    else:
        frame_index = np.arange(n, dtype=np.int64)
    steps = np.diff(frame_index)
    if np.any(steps <= 0):
        row = int(np.flatnonzero(steps <= 0)[0]) + 2
        raise SequencingError(f"frame index is not increasing at row {row}")
    if np.any(steps > 1):
        logger.warning("frame sequence has gaps", extra={'stage': 'ingest'})

    if columns['timestamp'] in df.columns:
        timestamp = _numeric_column(df, columns['timestamp'], required=True)
    else:
        timestamp = frame_index / FRAME_RATE
    if columns['confidence'] in df.columns:
        confidence = _numeric_column(df, columns['confidence'], required=True)
    else:
        confidence = np.ones(n)
    gaze_x = _numeric_column(df, columns['gaze_x'], required=True)
    gaze_y = _numeric_column(df, columns['gaze_y'], required=True)
    blink = _numeric_column(df, columns['blink_intensity'], required=True)

    pupil: Optional[np.ndarray] = None
    if columns['pupil_diameter'] in df.columns:
        pupil = _numeric_column(df, columns['pupil_diameter'], required=False)
    direct: Optional[List[Optional[bool]]] = None
    if columns['direct_gaze'] in df.columns:
        direct = _flag_column(df, columns['direct_gaze'])

    landmarks: Optional[np.ndarray] = None
    indices = _landmark_indices(df, columns['landmark_x'])
    if indices:
        axes = []
        for key in ('landmark_x', 'landmark_y', 'landmark_z'):
            names = [f"{columns[key]}{i}" for i in indices]
            absent = [name for name in names if name not in df.columns]
            if absent:
                raise FormatError(f"incomplete landmark columns: {', '.join(absent[:3])}")
            axes.append(np.column_stack([_numeric_column(df, name, required=True) for name in names]))
        landmarks = np.stack(axes, axis=-1)

    records = []
    for i in range(n):
        pupil_value = None if pupil is None or np.isnan(pupil[i]) else float(pupil[i])
        points = None
        if landmarks is not None:
            points = tuple(tuple(float(v) for v in point) for point in landmarks[i])
        records.append(FrameRecord(
            frame_index=int(frame_index[i]),
            timestamp=float(timestamp[i]),
            confidence=float(confidence[i]),
            gaze_x=float(gaze_x[i]),
            gaze_y=float(gaze_y[i]),
            blink_intensity=float(blink[i]),
            pupil_diameter=pupil_value,
            eye_landmarks=points,
            direct_gaze=None if direct is None else direct[i],
        ))
    return records


def serialize_frames(records: Sequence[FrameRecord], column_map: Optional[Dict[str, str]] = None,
                     frame_base: int = 1) -> bytes:
    columns = _resolve_columns(column_map)
    data: Dict[str, list] = {
        columns['frame']: [r.frame_index + frame_base for r in records],
        columns['timestamp']: [repr(float(r.timestamp)) for r in records],
        columns['confidence']: [repr(float(r.confidence)) for r in records],
        columns['gaze_x']: [repr(float(r.gaze_x)) for r in records],
        columns['gaze_y']: [repr(float(r.gaze_y)) for r in records],
        columns['blink_intensity']: [repr(float(r.blink_intensity)) for r in records],
    }
    if any(r.pupil_diameter is not None for r in records):
        data[columns['pupil_diameter']] = ['' if r.pupil_diameter is None else repr(float(r.pupil_diameter))
                                           for r in records]
    if any(r.direct_gaze is not None for r in records):
        data[columns['direct_gaze']] = ['' if r.direct_gaze is None else str(int(r.direct_gaze))
                                        for r in records]
    with_points = [r for r in records if r.eye_landmarks is not None]
    if with_points:
        if len(with_points) != len(records):
            raise FormatError("landmarks must be present on every frame or on none")
        for i in range(len(records[0].eye_landmarks)):
            for axis, key in enumerate(('landmark_x', 'landmark_y', 'landmark_z')):
                data[f"{columns[key]}{i}"] = [repr(float(r.eye_landmarks[i][axis])) for r in records]
    buffer = io.StringIO()
    pd.DataFrame(data, columns=list(data)).to_csv(buffer, index=False, lineterminator='\n')
    return buffer.getvalue().encode('utf-8')


def parse_annotations(csv_stream: BinaryIO, dimension: str = 'arousal') -> List[AnnotationTrace]:
    raw = csv_stream.read()
    text = raw.decode('utf-8') if isinstance(raw, bytes) else raw
    try:
        # comma or semicolon, sniffed from the header line
        df = pd.read_csv(io.StringIO(text), sep=None, engine='python', dtype=str,
                         skipinitialspace=True, keep_default_na=False)
    except (csv.Error, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise FormatError(f"unreadable annotation CSV: {e}")
    df.columns = [str(c).strip() for c in df.columns]
    time_column = next((c for c in df.columns if c.lower() == 'time'), None)
    if time_column is None:
        raise FormatError("annotation CSV has no 'time' column")
    annotators = [c for c in df.columns if c != time_column]
    if not annotators:
        raise FormatError("annotation CSV has no annotator columns")

    times = _numeric_column(df, time_column, required=True)
    if len(times) > 1 and np.max(np.abs(np.diff(times) - 1.0 / FRAME_RATE)) > 1e-6:
        raise FormatError(f"annotation time column is not sampled at {FRAME_RATE} Hz")
    return [AnnotationTrace(dimension, name, _numeric_column(df, name, required=True))
            for name in annotators]


def serialize_annotations(traces: Sequence[AnnotationTrace]) -> bytes:
    if not traces:
        raise ArgumentError("no traces to serialize")
    length = len(traces[0])
    if any(len(t) != length for t in traces):
        raise FormatError("annotation traces differ in length")
    data = {'time': [repr(i / FRAME_RATE) for i in range(length)]}
    for trace in traces:
        data[trace.annotator_id] = [repr(float(v)) for v in trace.values]
    buffer = io.StringIO()
    pd.DataFrame(data, columns=list(data)).to_csv(buffer, index=False, lineterminator='\n')
    return buffer.getvalue().encode('utf-8')


def gold_standard(traces: Sequence[AnnotationTrace]) -> AnnotationTrace:
    """Frame-wise mean over annotators, truncated to the shortest trace."""
    if not traces:
        raise ArgumentError("gold standard needs at least one trace")
    if len(traces) == 1:
        return traces[0]
    length = min(len(t) for t in traces)
    stacked = np.vstack([t.values[:length] for t in traces])
    return AnnotationTrace(traces[0].dimension, 'gold', stacked.mean(axis=0))


def align_lengths(n_frames: int, trace: AnnotationTrace, subject: str = '') -> Tuple[int, AnnotationTrace]:
    common = min(n_frames, len(trace))
    if common != n_frames or common != len(trace):
        logger.warning(f"truncating {subject or 'subject'} to {common} frames "
                       f"(frames={n_frames}, annotations={len(trace)})",
                       extra={'stage': 'ingest', 'subject': subject})
    return common, trace.with_values(trace.values[:common])


def _smooth_noise(rng: np.random.Generator, n: int, pole: float) -> np.ndarray:
    noise = lfilter([1.0], [1.0, -pole], rng.standard_normal(n))
    return noise / np.std(noise)


def _blink_track(rng: np.random.Generator, n: int) -> np.ndarray:
    intensity = np.clip(0.2 * rng.standard_normal(n), 0.0, None)
    onsets = np.flatnonzero(rng.random(n) < 0.3 / FRAME_RATE)
    for onset in onsets:
        length = int(rng.integers(3, 7))
        intensity[onset:onset + length] = rng.uniform(2.0, 4.0)
    return np.clip(intensity, 0.0, 5.0)


def _gaze_flags(rng: np.random.Generator, n: int) -> np.ndarray:
    flags = np.empty(n, dtype=bool)
    state = bool(rng.random() < 0.5)
    switches = rng.random(n) < 1.0 / (3 * FRAME_RATE)
    for i in range(n):
        if switches[i]:
            state = not state
        flags[i] = state
    return flags


def synth_corpus(seed: int, n_subjects: int, duration: float, lag: float,
                 n_annotators: int = 3, dimension: str = 'arousal'
                 ) -> Tuple[Dict[str, List[FrameRecord]], Dict[str, List[AnnotationTrace]]]:
    """Deterministic desk-scale corpus with a planted annotation lag.

    The pupil diameter is the driver channel: every annotator trace follows
    ``0.8 * tanh`` of the latent that drives the pupil, ``lag`` seconds late.
    Gaze angles, blink intensity and direct gaze are pure noise.
    """
    if duration < 16.0:
        raise ArgumentError("synthetic duration must cover two 8 s windows (>= 16 s)")
    if not 0.0 <= lag <= MAX_SYNTH_LAG:
        raise ArgumentError(f"lag must lie in [0, {MAX_SYNTH_LAG}] s, got {lag}")
    if n_subjects < 1 or n_annotators < 1:
        raise ArgumentError("need at least one subject and one annotator")

    n_frames = int(round(duration * FRAME_RATE))
    lag_frames = int(round(lag * FRAME_RATE))
    frames: Dict[str, List[FrameRecord]] = {}
    traces: Dict[str, List[AnnotationTrace]] = {}
    for idx in range(n_subjects):
        subject = f"S{idx + 1:02d}"
        rng = np.random.default_rng([seed, idx])

        t = np.arange(n_frames + lag_frames) / FRAME_RATE
        periods = rng.uniform(0.8, 20.0, size=12)
        phases = rng.uniform(0.0, 2 * np.pi, size=12)
        latent = np.sin(2 * np.pi * t[:, None] / periods + phases).sum(axis=1)
        latent = (latent - latent.mean()) / latent.std()

        pupil = 3.5 + 0.4 * latent[lag_frames:lag_frames + n_frames]
        target = 0.8 * np.tanh(latent[:n_frames])
        gaze_x = 0.15 * _smooth_noise(rng, n_frames, 0.9)
        gaze_y = 0.1 * _smooth_noise(rng, n_frames, 0.9)
        blink = _blink_track(rng, n_frames)
        direct = _gaze_flags(rng, n_frames)

        frames[subject] = [
            FrameRecord(
                frame_index=i, timestamp=i / FRAME_RATE, confidence=0.98,
                gaze_x=float(gaze_x[i]), gaze_y=float(gaze_y[i]),
                blink_intensity=float(blink[i]), pupil_diameter=float(pupil[i]),
                direct_gaze=bool(direct[i]),
            )
            for i in range(n_frames)
        ]
        traces[subject] = [
            AnnotationTrace(dimension, f"A{k + 1}",
                            np.clip(target + 0.02 * rng.standard_normal(n_frames), -1.0, 1.0))
            for k in range(n_annotators)
        ]
    return frames, traces


def synth_partition(subjects: Sequence[str]) -> Partition:
    """Two thirds of the synthetic subjects train, the rest validate."""
    ordered = sorted(subjects)
    n_train = max(1, int(round(len(ordered) * 2 / 3)))
    return Partition(train=tuple(ordered[:n_train]), validation=tuple(ordered[n_train:]), test=())
