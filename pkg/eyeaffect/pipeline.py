"""Stage plumbing shared by the CLI: run layout, descriptor files, fusion and the run manifest."""
import hashlib
import logging
import os
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from eyeaffect.corpus import AnnotationTrace, align_lengths, gold_standard, parse_annotations
from eyeaffect.errors import AlignmentError, FormatError
from eyeaffect.extensions import cache
from eyeaffect.features import FeatureCatalog, FeatureEntry, FeatureMatrix, extract_features, read_feature_csv
from eyeaffect.lld import BINARY_CHANNELS, NUMERIC_CHANNELS, DescriptorSeries
from eyeaffect.selection import SubjectData
from eyeaffect.utils.file_processor import ensure_dir, file_sha256, read_json, write_json

logger = logging.getLogger(__name__)

MANIFEST_NAME = 'manifest.json'
EXTERNAL_PREFIX = 'ext.'


class RunLayout:
    """Paths of every artifact under one output directory."""

    def __init__(self, root: str) -> None:
        self.root = root

    @property
    def manifest(self) -> str:
        return os.path.join(self.root, MANIFEST_NAME)

    @property
    def partition(self) -> str:
        return os.path.join(self.root, 'partition.ini')

    def llds(self, subject: str) -> str:
        return os.path.join(ensure_dir(os.path.join(self.root, 'llds')), f'{subject}.csv')

    def labels(self, dimension: str, subject: str) -> str:
        return os.path.join(ensure_dir(os.path.join(self.root, 'labels', dimension)), f'{subject}.csv')

    def features_dir(self, kind: str = 'features') -> str:
        return ensure_dir(os.path.join(self.root, kind))

    def selection_dir(self, dimension: str) -> str:
        return ensure_dir(os.path.join(self.root, 'selection', dimension))

    def sweep(self, dimension: str, protocol: str) -> str:
        return os.path.join(self.selection_dir(dimension), f'sweep_{protocol}.csv')

    def selection(self, dimension: str) -> str:
        return os.path.join(self.selection_dir(dimension), 'selection.json')

    def model(self, dimension: str) -> str:
        return os.path.join(ensure_dir(os.path.join(self.root, 'models')), f'{dimension}.json')

    def eval_dir(self) -> str:
        return ensure_dir(os.path.join(self.root, 'eval'))

    def reports_dir(self) -> str:
        return ensure_dir(os.path.join(self.root, 'reports'))


@dataclass
class RunManifest:
    config: Dict[str, Dict[str, object]] = field(default_factory=dict)
    inputs: Dict[str, str] = field(default_factory=dict)
    seed: int = 0
    version: str = ''
    outputs: Dict[str, List[str]] = field(default_factory=dict)
    notes: Dict[str, object] = field(default_factory=dict)

    @classmethod
    def load(cls, path: str) -> 'RunManifest':
        if not os.path.exists(path):
            return cls()
        data = read_json(path)
        return cls(**{k: data.get(k, v) for k, v in asdict(cls()).items()})

    def add_inputs(self, paths: Sequence[str], root: str = '') -> None:
        for path in paths:
            key = os.path.relpath(path, root) if root else path
            self.inputs[key] = file_sha256(path)

    def record(self, stage: str, paths: Sequence[str], root: str = '') -> None:
        relative = [os.path.relpath(p, root) if root else p for p in paths]
        self.outputs[stage] = sorted(set(self.outputs.get(stage, [])) | set(relative))

    def save(self, path: str) -> None:
        write_json(asdict(self), path)


def write_descriptor_csv(series: DescriptorSeries, path: str) -> None:
    frame = pd.DataFrame({name: series.numeric[name] for name in NUMERIC_CHANNELS})
    for name in BINARY_CHANNELS:
        frame[name] = series.binary[name].astype(np.int8)
    frame.insert(0, 'frame', np.arange(len(series)))
    frame.to_csv(path, index=False, lineterminator='\n', float_format='%.17g')


def read_descriptor_csv(path: str) -> DescriptorSeries:
    frame = pd.read_csv(path, float_precision='round_trip')
    missing = [c for c in NUMERIC_CHANNELS + BINARY_CHANNELS if c not in frame.columns]
    if missing:
        raise FormatError(f"{path}: missing descriptor columns {', '.join(missing)}")
    return DescriptorSeries(
        numeric={name: frame[name].to_numpy(dtype=float) for name in NUMERIC_CHANNELS},
        binary={name: frame[name].to_numpy() != 0 for name in BINARY_CHANNELS},
    )


def _series_key(series: DescriptorSeries, window: int, stride: int) -> str:
    digest = hashlib.sha256(f"{window}|{stride}".encode('utf-8'))
    for name in NUMERIC_CHANNELS:
        digest.update(np.ascontiguousarray(series.numeric[name], dtype=float).tobytes())
    for name in BINARY_CHANNELS:
        digest.update(np.packbits(series.binary[name]).tobytes())
    return f"features:{digest.hexdigest()}"


def cached_features(series: DescriptorSeries, window: int, stride: int) -> FeatureMatrix:
    """``extract_features`` behind the configured feature cache."""
    key = _series_key(series, window, stride)
    matrix = cache.get(key)
    if matrix is None:
        matrix = extract_features(series, window, stride)
        cache.set(key, matrix)
    else:
        logger.debug("feature cache hit", extra={'stage': 'features'})
    return matrix


def _missing_ranges(frames: np.ndarray) -> List[Tuple[int, int]]:
    """Contiguous inclusive runs of a sorted frame list."""
    if frames.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(frames) != 1)
    starts = np.concatenate(([frames[0]], frames[breaks + 1]))
    ends = np.concatenate((frames[breaks], [frames[-1]]))
    return [(int(s), int(e)) for s, e in zip(starts, ends)]


def fuse(eye: FeatureMatrix, external: FeatureMatrix) -> FeatureMatrix:
    """Early fusion: eye columns followed by ``ext.``-prefixed external columns.

    Both matrices must cover exactly the same frames; external rows are
    reordered to the eye frame order.
    """
    eye_frames = set(eye.frames.tolist())
    ext_frames = set(external.frames.tolist())
    if len(ext_frames) != len(external):
        raise AlignmentError("external matrix repeats frame indices")
    offending = np.array(sorted(eye_frames ^ ext_frames), dtype=np.int64)
    if offending.size:
        raise AlignmentError(f"eye matrix covers {len(eye)} frames, external {len(external)}",
                             _missing_ranges(offending))
    position = {frame: i for i, frame in enumerate(external.frames.tolist())}
    order = np.array([position[f] for f in eye.frames.tolist()], dtype=np.int64)
    entries = list(eye.catalog.entries) + [
        FeatureEntry(f"{EXTERNAL_PREFIX}{e.name}", 'external', 'external') for e in external.catalog.entries]
    return FeatureMatrix(np.hstack([eye.rows, external.rows[order]]), FeatureCatalog(entries), eye.frames)


def load_gold_standard(path: str, dimension: str, n_frames: Optional[int] = None,
                       subject: str = '') -> Tuple[AnnotationTrace, List[AnnotationTrace]]:
    with open(path, 'rb') as f:
        traces = parse_annotations(f, dimension)
    gold = gold_standard(traces)
    if n_frames is not None:
        _, gold = align_lengths(n_frames, gold, subject)
    return gold, traces


def load_subject_data(layout: RunLayout, subjects: Sequence[str], dimension: str,
                      features_kind: str = 'features', feature_names: Optional[Sequence[str]] = None
                      ) -> List[SubjectData]:
    data = []
    for subject in subjects:
        path = os.path.join(layout.features_dir(features_kind), f'{subject}.csv')
        if not os.path.exists(path):
            raise FormatError(f"no feature matrix for subject {subject}; run the features stage first")
        matrix = read_feature_csv(path)
        if feature_names is not None:
            mask = np.zeros(len(matrix.catalog), dtype=bool)
            mask[[matrix.catalog.index(n) for n in feature_names]] = True
            matrix = matrix.select(mask)
        gold, _ = load_gold_standard(layout.labels(dimension, subject), dimension, subject=subject)
        data.append(SubjectData(subject, matrix, gold))
    return data
