"""Ground-truth time-shifting, mutual-information filtering and the sweep protocols."""
import csv
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import partial
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import rankdata
from sklearn.metrics import mutual_info_score

from eyeaffect.corpus import FRAME_RATE, AnnotationTrace
from eyeaffect.errors import AlignmentError, ArgumentError, DataError, DivergenceError
from eyeaffect.eval import evaluate
from eyeaffect.features import GROUPS, FeatureCatalog, FeatureMatrix
from eyeaffect.model import EpochRecord, ModelConfig, TrainedModel, fit_standardizer, predict, train_blstm

logger = logging.getLogger(__name__)

DEFAULT_BINS = 32
DEFAULT_THRESHOLDS = (0.1, 0.15, 0.2)
SWEEP_FIELDS = ('protocol', 'threshold', 'shift_s', 'n_features', 'val_sse', 'val_ccc')


class Protocol(str, Enum):
    BEFORE = 'before'
    DURING = 'during'
    AFTER = 'after'
    NONE = 'none'


def shift_frames(d_s: float, rate: int = FRAME_RATE) -> int:
    frames = d_s * rate
    count = int(round(frames))
    if count < 0 or abs(frames - count) > 1e-6:
        raise ArgumentError(f"shift of {d_s} s is not a non-negative whole number of frames at {rate} Hz")
    return count


@dataclass(frozen=True)
class ShiftConfig:
    shifts: Tuple[float, ...] = tuple(round(0.2 * i, 10) for i in range(23))
    rate: int = FRAME_RATE

    def __post_init__(self) -> None:
        object.__setattr__(self, 'shifts', tuple(float(s) for s in self.shifts))
        if not self.shifts:
            raise ArgumentError("at least one shift is required")
        for s in self.shifts:
            shift_frames(s, self.rate)

    @classmethod
    def from_range(cls, start: float, stop: float, step: float, rate: int = FRAME_RATE) -> 'ShiftConfig':
        """Inclusive ``start:stop:step`` grid in seconds."""
        if step <= 0 or stop < start:
            raise ArgumentError(f"invalid shift range {start}:{stop}:{step}")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return cls(tuple(round(start + i * step, 10) for i in range(count)), rate)

    def frames(self, d_s: float) -> int:
        return shift_frames(d_s, self.rate)


@dataclass
class SelectionReport:
    protocol: Protocol
    threshold: Optional[float]
    shift: float
    val_ccc: float
    val_sse: float
    n_features: int
    mi_scores: Optional[np.ndarray] = None
    retained: Optional[np.ndarray] = None
    failed: bool = False
    best_epoch: int = 0

    def __post_init__(self) -> None:
        self.protocol = Protocol(self.protocol)
        if self.retained is not None and int(np.count_nonzero(self.retained)) != self.n_features:
            raise ArgumentError("n_features must equal the number of retained features")

    def as_row(self) -> dict:
        return {
            'protocol': self.protocol.value,
            'threshold': 'none' if self.threshold is None else repr(float(self.threshold)),
            'shift_s': repr(float(self.shift)),
            'n_features': self.n_features,
            'val_sse': repr(float(self.val_sse)),
            'val_ccc': repr(float(self.val_ccc)),
        }


@dataclass(frozen=True)
class SubjectData:
    """Feature rows of one subject plus its full-length 25 Hz target trace.

    Row ``r`` of the matrix is labelled by ``trace[matrix.frames[r]]``.
    """
    subject: str
    matrix: FeatureMatrix
    trace: AnnotationTrace

    def __post_init__(self) -> None:
        if len(self.matrix) and int(self.matrix.frames[-1]) >= len(self.trace):
            raise AlignmentError(f"{self.subject}: feature frames run past the annotation trace",
                                 [(len(self.trace), int(self.matrix.frames[-1]))])

    def aligned(self, shift: int = 0, mask: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
        """Rows and targets after shifting the trace back by ``shift`` frames."""
        usable = len(self.trace) - shift
        keep = self.matrix.frames < usable
        rows = self.matrix.rows[keep]
        if mask is not None:
            rows = rows[:, mask]
        return rows, self.trace.values[shift:][self.matrix.frames[keep]]


def shift_labels(trace: AnnotationTrace, d_s: float, rate: int = FRAME_RATE) -> Tuple[AnnotationTrace, int]:
    """Move annotations ``d_s`` seconds earlier: ``y'[t] = y[t + d_s * rate]``.

    Returns the shifted trace and its length; feature rows past that length
    must be dropped by the caller.
    """
    count = shift_frames(d_s, rate)
    if count >= len(trace):
        raise ArgumentError(f"shift of {count} frames leaves nothing of a {len(trace)}-frame trace")
    shifted = trace.with_values(trace.values[count:])
    return shifted, len(shifted)


def _bin_codes(values: np.ndarray, bins: int) -> Tuple[np.ndarray, bool]:
    """Equal-frequency bin index per sample; two-valued data is binned by value."""
    unique, inverse = np.unique(values, return_inverse=True)
    if unique.size <= 2:
        return inverse, unique.size == 1
    ranks = rankdata(values, method='min').astype(np.int64) - 1
    return ranks * bins // values.size, False


def _mutual_information(x: np.ndarray, y_codes: np.ndarray, bins: int) -> Tuple[float, bool]:
    x_codes, degenerate = _bin_codes(x, bins)
    if degenerate:
        return 0.0, True
    return max(0.0, float(mutual_info_score(x_codes, y_codes))), False


def mutual_information(x: Sequence[float], y: Sequence[float], bins: int = DEFAULT_BINS) -> float:
    """Plug-in MI estimate in nats over quantile bins of each variable."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ArgumentError(f"MI needs two 1-D samples of equal length, got {x.shape} and {y.shape}")
    if bins < 2:
        raise ArgumentError("MI needs at least 2 bins")
    if x.size == 0:
        return 0.0
    y_codes, y_degenerate = _bin_codes(y, bins)
    value, x_degenerate = _mutual_information(x, y_codes, bins)
    if x_degenerate or y_degenerate:
        logger.warning("constant variable has a single MI bin; MI reported as 0")
        return 0.0
    return value


def mi_scores(rows: Union[FeatureMatrix, np.ndarray], labels: Union[AnnotationTrace, Sequence[float]],
              bins: int = DEFAULT_BINS) -> np.ndarray:
    """MI of every feature column with the labels."""
    rows = rows.rows if isinstance(rows, FeatureMatrix) else np.asarray(rows, dtype=float)
    labels = np.asarray(labels.values if isinstance(labels, AnnotationTrace) else labels, dtype=float)
    if rows.shape[0] != labels.size:
        raise ArgumentError(f"{rows.shape[0]} feature rows against {labels.size} labels")
    y_codes, y_degenerate = _bin_codes(labels, bins)
    if y_degenerate:
        logger.warning("constant labels carry no information; all MI scores are 0")
        return np.zeros(rows.shape[1])
    scores = np.zeros(rows.shape[1])
    constant = 0
    for j in range(rows.shape[1]):
        scores[j], degenerate = _mutual_information(rows[:, j], y_codes, bins)
        constant += degenerate
    if constant:
        logger.warning(f"{constant} constant feature(s) scored MI 0")
    return scores


def retain_mask(scores: Sequence[float], threshold: Optional[float]) -> np.ndarray:
    """Keep features whose score reaches the threshold; ``None`` keeps all."""
    scores = np.asarray(scores, dtype=float)
    if threshold is None:
        return np.ones(scores.size, dtype=bool)
    return scores >= threshold


def mi_filter(matrix: FeatureMatrix, labels: Union[AnnotationTrace, Sequence[float]], threshold: Optional[float],
              bins: int = DEFAULT_BINS) -> Tuple[np.ndarray, np.ndarray]:
    scores = mi_scores(matrix, labels, bins)
    mask = retain_mask(scores, threshold)
    if not mask.any():
        logger.warning(f"MI threshold {threshold} removes every feature (max score {scores.max():.4f})",
                       extra={'threshold': threshold})
    return mask, scores


def _stack(subjects: Sequence[SubjectData], shift: int, mask: Optional[np.ndarray] = None
           ) -> List[Tuple[np.ndarray, np.ndarray]]:
    return [s.aligned(shift, mask) for s in subjects]


@dataclass
class CellFit:
    """Outcome of training one cell; ``model`` is None when no feature survives."""
    mask: np.ndarray
    scores: np.ndarray
    model: Optional[TrainedModel] = None
    history: List[EpochRecord] = field(default_factory=list)
    val_pairs: List[Tuple[np.ndarray, np.ndarray]] = field(default_factory=list)


def fit_cell(threshold: Optional[float], shift: float, train: Sequence[SubjectData], val: Sequence[SubjectData],
             model_config: ModelConfig, bins: int = DEFAULT_BINS, rate: int = FRAME_RATE) -> CellFit:
    """Shift the labels, filter on training MI, standardise and train."""
    frames = shift_frames(shift, rate)
    train_pairs = _stack(train, frames)
    rows = np.vstack([x for x, _ in train_pairs])
    targets = np.concatenate([y for _, y in train_pairs])
    if targets.size == 0:
        raise ArgumentError(f"shift of {shift} s leaves no training frames")
    scores = mi_scores(rows, targets, bins)
    mask = retain_mask(scores, threshold)
    if not mask.any():
        return CellFit(mask, scores)

    standardizer = fit_standardizer(rows[:, mask], targets)
    train_seqs = [(standardizer.apply(x[:, mask]), standardizer.apply_targets(y)) for x, y in train_pairs]
    val_pairs = [(x, y) for x, y in _stack(val, frames, mask) if y.size]
    if not val_pairs:
        raise ArgumentError("validation set is empty")
    val_seqs = [(standardizer.apply(x), standardizer.apply_targets(y)) for x, y in val_pairs]
    model, history = train_blstm(train_seqs, val_seqs, model_config, standardizer)
    model.shift_s = shift
    return CellFit(mask, scores, model, history, val_pairs)


def evaluate_cell(protocol: Protocol, threshold: Optional[float], shift: float,
                  train: Sequence[SubjectData], val: Sequence[SubjectData], model_config: ModelConfig,
                  bins: int = DEFAULT_BINS, rate: int = FRAME_RATE) -> SelectionReport:
    """Train one (threshold, shift) cell and score it on the validation subjects."""
    context = {'protocol': Protocol(protocol).value, 'threshold': threshold, 'shift_s': shift}
    try:
        fit = fit_cell(threshold, shift, train, val, model_config, bins, rate)
    except DivergenceError as e:
        logger.error(f"{e}; cell marked failed", extra=context)
        return SelectionReport(protocol, threshold, shift, math.nan, math.nan, 0, failed=True)
    n_features = int(fit.mask.sum())
    if fit.model is None:
        logger.warning("empty retained set; cell marked failed", extra=context)
        return SelectionReport(protocol, threshold, shift, math.nan, math.nan, 0, fit.scores, fit.mask, failed=True)

    standardizer = fit.model.standardizer
    predictions = np.concatenate([predict(fit.model, x) for x, _ in fit.val_pairs])
    truth = np.concatenate([y for _, y in fit.val_pairs])
    report = evaluate(predictions, truth, dimension=train[0].trace.dimension,
                      target_mean=standardizer.target_mean, target_sd=standardizer.target_sd)
    logger.info(f"{n_features} features: val CCC {report.ccc:.4f}, SSE {report.sse:.4f}", extra=context)
    return SelectionReport(protocol, threshold, shift, report.ccc, report.sse, n_features, fit.scores, fit.mask,
                           best_epoch=fit.model.best_epoch)


def protocol_cells(mode: Protocol, thresholds: Sequence[float], shifts: ShiftConfig,
                   fixed_threshold: Optional[float] = None, fixed_shift: Optional[float] = None
                   ) -> List[Tuple[Optional[float], float]]:
    """(threshold, shift) grid of a protocol; a ``None`` threshold means no filtering."""
    mode = Protocol(mode)
    if mode is Protocol.BEFORE:
        return [(None, 0.0)] + [(t, 0.0) for t in thresholds]
    if mode is Protocol.DURING:
        chosen = [fixed_threshold] if fixed_threshold is not None else list(thresholds)
        if not chosen:
            raise ArgumentError("DURING needs at least one threshold")
        return [(t, s) for t in chosen for s in shifts.shifts]
    if mode is Protocol.NONE:
        return [(None, s) for s in shifts.shifts]
    if fixed_shift is None:
        raise ArgumentError("AFTER needs a fixed shift")
    return [(None, fixed_shift)] + [(t, fixed_shift) for t in thresholds]


Cell = Tuple[Protocol, Optional[float], float]


def _evaluate_task(task: Cell, train: Sequence[SubjectData], val: Sequence[SubjectData],
                   model_config: ModelConfig, bins: int, rate: int) -> SelectionReport:
    # Module level so a process pool can pickle it.
    mode, threshold, shift = task
    return evaluate_cell(mode, threshold, shift, train, val, model_config, bins, rate)


def _run_tasks(tasks: Sequence[Cell], shifts: ShiftConfig, train: Sequence[SubjectData],
               val: Sequence[SubjectData], model_config: ModelConfig, bins: int,
               mapper: Callable) -> List[SelectionReport]:
    runner = partial(_evaluate_task, train=train, val=val, model_config=model_config, bins=bins,
                     rate=shifts.rate)
    return list(mapper(runner, tasks))


def sweep_protocol(mode: Protocol, thresholds: Sequence[float], shifts: ShiftConfig,
                   train: Sequence[SubjectData], val: Sequence[SubjectData], model_config: ModelConfig,
                   fixed_threshold: Optional[float] = None, fixed_shift: Optional[float] = None,
                   bins: int = DEFAULT_BINS, mapper: Callable = map) -> List[SelectionReport]:
    """Evaluate every cell of one protocol.

    AFTER without ``fixed_shift`` first runs the unfiltered shift sweep and
    uses its best shift. ``mapper`` may be a process pool's ``map``; each cell
    trains with its own seeded generator, so results do not depend on it.
    """
    mode = Protocol(mode)
    if not train:
        raise ArgumentError("no training subjects")
    if mode is Protocol.AFTER and fixed_shift is None:
        none = sweep_protocol(Protocol.NONE, thresholds, shifts, train, val, model_config, bins=bins, mapper=mapper)
        fixed_shift = best_report(none).shift
    cells = protocol_cells(mode, thresholds, shifts, fixed_threshold, fixed_shift)
    logger.info(f"sweeping {len(cells)} cells", extra={'protocol': mode.value, 'stage': 'select'})
    return _run_tasks([(mode, t, s) for t, s in cells], shifts, train, val, model_config, bins, mapper)


def best_report(reports: Iterable[SelectionReport]) -> SelectionReport:
    """Highest CCC; ties go to fewer features, then the smaller shift."""
    candidates = [r for r in reports if not r.failed and np.isfinite(r.val_ccc)]
    if not candidates:
        raise DataError("every sweep cell failed")
    return max(candidates, key=lambda r: (r.val_ccc, -r.n_features, -r.shift))


def run_full_protocol(thresholds: Sequence[float], shifts: ShiftConfig, train: Sequence[SubjectData],
                      val: Sequence[SubjectData], model_config: ModelConfig, bins: int = DEFAULT_BINS,
                      mapper: Callable = map) -> Dict[Protocol, List[SelectionReport]]:
    """BEFORE, DURING at BEFORE's best threshold, NONE, then AFTER at NONE's best shift.

    BEFORE and NONE do not depend on each other and go to ``mapper`` as one
    batch, followed by DURING and AFTER as a second batch.
    """
    def batch(*grids: Tuple[Protocol, List[Tuple[Optional[float], float]]]) -> Dict[Protocol, List[SelectionReport]]:
        tasks = [(mode, t, s) for mode, cells in grids for t, s in cells]
        logger.info(f"sweeping {len(tasks)} cells", extra={'protocol': '+'.join(m.value for m, _ in grids),
                                                           'stage': 'select'})
        reports = _run_tasks(tasks, shifts, train, val, model_config, bins, mapper)
        return {mode: [r for r in reports if r.protocol is mode] for mode, _ in grids}

    if not train:
        raise ArgumentError("no training subjects")
    first = batch((Protocol.BEFORE, protocol_cells(Protocol.BEFORE, thresholds, shifts)),
                  (Protocol.NONE, protocol_cells(Protocol.NONE, thresholds, shifts)))
    best_threshold = best_report(r for r in first[Protocol.BEFORE] if r.threshold is not None).threshold
    best_shift = best_report(first[Protocol.NONE]).shift
    second = batch((Protocol.DURING, protocol_cells(Protocol.DURING, thresholds, shifts,
                                                    fixed_threshold=best_threshold)),
                   (Protocol.AFTER, protocol_cells(Protocol.AFTER, thresholds, shifts, fixed_shift=best_shift)))
    return {Protocol.BEFORE: first[Protocol.BEFORE], Protocol.DURING: second[Protocol.DURING],
            Protocol.NONE: first[Protocol.NONE], Protocol.AFTER: second[Protocol.AFTER]}


def rank_features(matrix: FeatureMatrix, labels: Union[AnnotationTrace, Sequence[float]], top: int = 10,
                  bins: int = DEFAULT_BINS) -> Dict[str, List[Tuple[str, float]]]:
    """Top features by absolute Pearson correlation and by MI with the target."""
    labels = np.asarray(labels.values if isinstance(labels, AnnotationTrace) else labels, dtype=float)
    scores = mi_scores(matrix, labels, bins)
    centered = matrix.rows - matrix.rows.mean(axis=0)
    target = labels - labels.mean()
    norms = np.sqrt(np.sum(centered ** 2, axis=0) * np.sum(target ** 2))
    with np.errstate(invalid='ignore', divide='ignore'):
        correlation = np.where(norms > 0, np.abs(centered.T @ target) / norms, 0.0)
    names = matrix.catalog.names

    def top_of(values: np.ndarray) -> List[Tuple[str, float]]:
        order = np.argsort(-values, kind='stable')[:top]
        return [(names[i], float(values[i])) for i in order]

    return {'pcc': top_of(correlation), 'mi': top_of(scores)}


def retention_by_group(catalog: FeatureCatalog, mask: np.ndarray) -> Dict[str, Tuple[int, int]]:
    """(retained, total) per feature group."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (len(catalog),):
        raise ArgumentError(f"mask of length {mask.size} does not match catalog of {len(catalog)}")
    retention = {}
    for group in GROUPS + tuple(sorted({e.group for e in catalog.entries} - set(GROUPS))):
        in_group = catalog.mask(group=group)
        if in_group.any() or group in GROUPS:
            retention[group] = (int(np.count_nonzero(mask & in_group)), int(np.count_nonzero(in_group)))
    return retention


def write_sweep_csv(reports: Sequence[SelectionReport], path: str) -> None:
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.DictWriter(f, fieldnames=SWEEP_FIELDS, lineterminator='\n')
        writer.writeheader()
        for report in reports:
            writer.writerow(report.as_row())


def read_sweep_csv(path: str) -> List[SelectionReport]:
    with open(path, newline='', encoding='utf-8') as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != SWEEP_FIELDS:
            raise DataError(f"{path}: expected columns {','.join(SWEEP_FIELDS)}")
        reports = []
        for row in reader:
            ccc = float(row['val_ccc'])
            reports.append(SelectionReport(
                protocol=Protocol(row['protocol']),
                threshold=None if row['threshold'] == 'none' else float(row['threshold']),
                shift=float(row['shift_s']),
                val_ccc=ccc,
                val_sse=float(row['val_sse']),
                n_features=int(row['n_features']),
                failed=not math.isfinite(ccc),
            ))
    return reports
