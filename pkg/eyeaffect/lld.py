"""Frame-level low-level descriptors (LLDs) derived from FrameRecords."""
import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, Optional, Sequence

import numpy as np

from eyeaffect.corpus import FrameRecord
from eyeaffect.errors import (ArgumentError, GeometryError, InsufficientDataError,
                              MissingChannelError, ShapeError)

logger = logging.getLogger(__name__)

NUMERIC_CHANNELS = ('gaze_x', 'gaze_y', 'd_gaze_x', 'd_gaze_y',
                    'pupil_diam', 'd_pupil_diam', 'blink_intensity')
BINARY_CHANNELS = ('direct_gaze', 'gaze_approach', 'eyes_fixated',
                   'eye_closure', 'pupil_dilation', 'pupil_constriction')

# Left-eye pupil ring in OpenFace 2.0 eye-landmark numbering.
DEFAULT_RING_INDICES = tuple(range(20, 28))


@dataclass(frozen=True)
class ThresholdConfig:
    closure_threshold: float = 1.0
    fixation_threshold: float = 0.005
    approach_epsilon: float = 0.0
    pupil_delta: float = 0.01
    direct_gaze_angle: float = 0.087

    def __post_init__(self) -> None:
        for name, value in asdict(self).items():
            if value < 0:
                raise ArgumentError(f"threshold {name} must be >= 0, got {value}")

    def as_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass(frozen=True)
class DescriptorSeries:
    numeric: Dict[str, np.ndarray]
    binary: Dict[str, np.ndarray] = field(default_factory=dict)
    # 'coded' when a human-coded column supplied every frame, 'heuristic' for the
    # angle fallback, 'mixed' when only some frames were coded.
    direct_gaze_source: Optional[str] = None

    def __post_init__(self) -> None:
        lengths = {len(v) for v in list(self.numeric.values()) + list(self.binary.values())}
        if len(lengths) > 1:
            raise ShapeError(f"descriptor channels differ in length: {sorted(lengths)}")

    def __len__(self) -> int:
        return len(next(iter(self.numeric.values()))) if self.numeric else 0

    def channel(self, name: str) -> np.ndarray:
        if name in self.numeric:
            return self.numeric[name]
        if name in self.binary:
            return self.binary[name]
        raise MissingChannelError(f"descriptor series has no channel '{name}'")

    def window(self, start: int, end: int) -> 'DescriptorSeries':
        """Inclusive frame range [start, end]."""
        return replace(self,
                       numeric={k: v[start:end + 1] for k, v in self.numeric.items()},
                       binary={k: v[start:end + 1] for k, v in self.binary.items()})


def _first_difference(values: np.ndarray) -> np.ndarray:
    delta = np.zeros_like(values)
    delta[1:] = np.diff(values)
    return delta


def pupil_diameter_from_landmarks(eye_landmarks: Sequence[Sequence[float]],
                                  ring_indices: Sequence[int] = DEFAULT_RING_INDICES) -> float:
    points = np.asarray(eye_landmarks, dtype=float)
    if points.ndim != 2 or points.shape[1] != 3:
        raise GeometryError("eye landmarks must be 3-D points")
    try:
        ring = points[list(ring_indices)]
    except IndexError:
        raise GeometryError(f"ring indices exceed the {len(points)} available landmarks")
    if len(ring) < 3:
        raise GeometryError("pupil ring needs at least 3 points")
    centroid = ring.mean(axis=0)
    return float(2.0 * np.mean(np.linalg.norm(ring - centroid, axis=1)))


def derive_numeric_llds(frames: Sequence[FrameRecord],
                        ring_indices: Sequence[int] = DEFAULT_RING_INDICES) -> DescriptorSeries:
    if not frames:
        raise InsufficientDataError("no frames to derive descriptors from")
    pupil = np.empty(len(frames))
    for i, frame in enumerate(frames):
        if frame.pupil_diameter is not None:
            pupil[i] = frame.pupil_diameter
        elif frame.eye_landmarks is not None:
            pupil[i] = pupil_diameter_from_landmarks(frame.eye_landmarks, ring_indices)
        else:
            raise MissingChannelError(
                f"frame {frame.frame_index}: neither pupil diameter nor eye landmarks available")

    gaze_x = np.array([f.gaze_x for f in frames], dtype=float)
    gaze_y = np.array([f.gaze_y for f in frames], dtype=float)
    numeric = {
        'gaze_x': gaze_x,
        'gaze_y': gaze_y,
        'd_gaze_x': _first_difference(gaze_x),
        'd_gaze_y': _first_difference(gaze_y),
        'pupil_diam': pupil,
        'd_pupil_diam': _first_difference(pupil),
        'blink_intensity': np.array([f.blink_intensity for f in frames], dtype=float),
    }
    return DescriptorSeries(numeric=numeric)


def derive_binary_llds(series: DescriptorSeries, cfg: Optional[ThresholdConfig] = None,
                       direct_gaze_input: Optional[Sequence[Optional[bool]]] = None) -> DescriptorSeries:
    cfg = cfg or ThresholdConfig()
    missing = [c for c in NUMERIC_CHANNELS if c not in series.numeric]
    if missing:
        raise MissingChannelError(f"numeric channels missing: {', '.join(missing)}")
    n = len(series)
    num = series.numeric

    gaze_norm = np.hypot(num['gaze_x'], num['gaze_y'])
    approach = np.zeros(n, dtype=bool)
    approach[1:] = gaze_norm[1:] < gaze_norm[:-1] - cfg.approach_epsilon

    heuristic = gaze_norm < cfg.direct_gaze_angle
    if direct_gaze_input is None:
        direct = heuristic
        source = 'heuristic'
    else:
        if len(direct_gaze_input) != n:
            raise ShapeError(f"direct gaze input has {len(direct_gaze_input)} frames, series has {n}")
        coded = np.array([v is not None for v in direct_gaze_input], dtype=bool)
        direct = np.where(coded, [bool(v) for v in direct_gaze_input], heuristic)
        source = 'coded' if coded.all() else ('heuristic' if not coded.any() else 'mixed')
    if source != 'coded':
        logger.warning(f"direct gaze derived from gaze angle ({source})", extra={'stage': 'lld'})

    binary = {
        'direct_gaze': direct.astype(bool),
        'gaze_approach': approach,
        'eyes_fixated': np.hypot(num['d_gaze_x'], num['d_gaze_y']) < cfg.fixation_threshold,
        'eye_closure': num['blink_intensity'] >= cfg.closure_threshold,
        'pupil_dilation': num['d_pupil_diam'] > cfg.pupil_delta,
        'pupil_constriction': num['d_pupil_diam'] < -cfg.pupil_delta,
    }
    return DescriptorSeries(numeric=dict(num), binary=binary, direct_gaze_source=source)


def derive_llds(frames: Sequence[FrameRecord], cfg: Optional[ThresholdConfig] = None,
                ring_indices: Sequence[int] = DEFAULT_RING_INDICES) -> DescriptorSeries:
    numeric = derive_numeric_llds(frames, ring_indices)
    coded = [f.direct_gaze for f in frames]
    direct_input = None if all(v is None for v in coded) else coded
    return derive_binary_llds(numeric, cfg, direct_input)
