"""Agreement metrics, the group-of-humans baseline and the rank-sum test."""
import csv
import itertools
import logging
import os
from dataclasses import asdict, dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy.stats import mannwhitneyu

from eyeaffect.corpus import AnnotationTrace
from eyeaffect.errors import ArgumentError, ShapeError, UndefinedStatisticError

logger = logging.getLogger(__name__)

EVAL_FIELDS = ('system', 'dimension', 'split', 'sse', 'ccc', 'pcc')


@dataclass(frozen=True)
class EvalReport:
    dimension: str
    ccc: float
    pcc: float
    sse: float
    n_frames: int
    system: str = 'eye'
    split: str = 'validation'

    def as_row(self) -> dict:
        row = asdict(self)
        return {k: row[k] for k in EVAL_FIELDS}


def _pair(x: Sequence[float], y: Sequence[float], minimum: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ArgumentError(f"inputs must be 1-D and of equal length, got {x.shape} and {y.shape}")
    if x.size < minimum:
        raise ArgumentError(f"need at least {minimum} values, got {x.size}")
    return x, y


def ccc(x: Sequence[float], y: Sequence[float]) -> float:
    """Concordance correlation coefficient with population moments.

    Two constant inputs leave the ratio undefined; that case scores 0.
    """
    x, y = _pair(x, y, minimum=2)
    mx, my = x.mean(), y.mean()
    covariance = np.mean((x - mx) * (y - my))
    denominator = x.var() + y.var() + (mx - my) ** 2
    if denominator == 0:
        logger.warning("CCC undefined for identical constant inputs; reporting 0")
        return 0.0
    return float(2 * covariance / denominator)


def pcc(x: Sequence[float], y: Sequence[float]) -> float:
    x, y = _pair(x, y, minimum=2)
    if x.var() == 0 or y.var() == 0:
        raise UndefinedStatisticError("Pearson correlation is undefined for a constant input")
    return float(np.corrcoef(x, y)[0, 1])


def sse(x: Sequence[float], y: Sequence[float]) -> float:
    """Mean squared frame error (per-frame SSE)."""
    x, y = _pair(x, y)
    return float(np.mean((x - y) ** 2))


def evaluate(predictions: Sequence[float], targets: Sequence[float], dimension: str,
             target_mean: float = 0.0, target_sd: float = 1.0,
             system: str = 'eye', split: str = 'validation') -> EvalReport:
    """CCC and PCC on the label scale; SSE on the standardised target scale."""
    predictions, targets = _pair(predictions, targets, minimum=2)
    try:
        correlation = pcc(predictions, targets)
    except UndefinedStatisticError:
        logger.warning("constant predictions; PCC reported as 0", extra={'dimension': dimension})
        correlation = 0.0
    scaled_error = sse((predictions - target_mean) / target_sd, (targets - target_mean) / target_sd)
    return EvalReport(dimension=dimension, ccc=ccc(predictions, targets), pcc=correlation,
                      sse=scaled_error, n_frames=int(targets.size), system=system, split=split)


def human_baseline(traces: Sequence[AnnotationTrace]) -> float:
    """Mean CCC over all unordered annotator pairs."""
    if len(traces) < 2:
        raise ArgumentError("group-of-humans baseline needs at least 2 annotators")
    lengths = {len(t) for t in traces}
    if len(lengths) != 1:
        raise ShapeError(f"annotator traces differ in length: {sorted(lengths)}")
    scores = [ccc(a.values, b.values) for a, b in itertools.combinations(traces, 2)]
    return float(np.mean(scores))


def wilcoxon_rank_sum(a: Sequence[float], b: Sequence[float]) -> Tuple[float, float]:
    """Rank-sum statistic W of ``a`` against ``b`` and its two-sided p-value.

    W follows the R convention (rank sum of ``a`` minus n_a(n_a+1)/2). Small
    tie-free samples get the exact distribution; otherwise the normal
    approximation with continuity and tie correction.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ArgumentError("rank-sum test needs two non-empty samples")
    pooled = np.concatenate([a, b])
    if np.all(pooled == pooled[0]):
        return a.size * b.size / 2.0, 1.0
    has_ties = np.unique(pooled).size != pooled.size
    method = 'exact' if a.size + b.size <= 12 and not has_ties else 'asymptotic'
    result = mannwhitneyu(a, b, alternative='two-sided', use_continuity=True, method=method)
    return float(result.statistic), float(min(1.0, result.pvalue))


def write_eval_rows(reports: Sequence[EvalReport], path: str) -> None:
    """Append rows, writing the header when the file is new."""
    new_file = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, 'a', newline='', encoding='utf-8') as f:
        writer = csv.DictWriter(f, fieldnames=EVAL_FIELDS, lineterminator='\n')
        if new_file:
            writer.writeheader()
        for report in reports:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in report.as_row().items()})


def read_eval_rows(path: str) -> List[dict]:
    with open(path, newline='', encoding='utf-8') as f:
        return [{**row, 'sse': float(row['sse']), 'ccc': float(row['ccc']), 'pcc': float(row['pcc'])}
                for row in csv.DictReader(f)]
