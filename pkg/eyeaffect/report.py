"""Threshold tables, retention tables and CCC-versus-shift line charts."""
import math
from typing import Dict, List, Sequence, Tuple

import pandas as pd

from eyeaffect.selection import Protocol, SelectionReport

TABLE_COLUMNS = ('threshold', 'n_features', 'val_sse', 'val_ccc')
SERIES_COLOURS = {'before': '#1f77b4', 'during': '#d62728', 'after': '#2ca02c', 'none': '#7f7f7f'}


def threshold_table(reports: Sequence[SelectionReport]) -> pd.DataFrame:
    """One row per threshold, the unfiltered row labelled ``none``."""
    rows = [{
        'threshold': 'none' if r.threshold is None else f"{r.threshold:g}",
        'n_features': r.n_features,
        'val_sse': r.val_sse,
        'val_ccc': r.val_ccc,
    } for r in reports]
    return pd.DataFrame(rows, columns=list(TABLE_COLUMNS))


def shift_table(reports: Sequence[SelectionReport]) -> pd.DataFrame:
    rows = [{'shift_s': r.shift, 'threshold': 'none' if r.threshold is None else f"{r.threshold:g}",
             'n_features': r.n_features, 'val_sse': r.val_sse, 'val_ccc': r.val_ccc} for r in reports]
    return pd.DataFrame(rows, columns=['shift_s', 'threshold', 'n_features', 'val_sse', 'val_ccc'])


def markdown_table(frame: pd.DataFrame) -> str:
    """Pipe table; floats to three decimals, NaN cells (failed sweep cells) as ``-``."""
    values = frame.to_numpy(dtype=object)
    values[pd.isna(values)] = None
    table = pd.DataFrame(values, columns=frame.columns)
    return table.to_markdown(index=False, floatfmt='.3f', missingval='-') + '\n'


def retention_table(retention: Dict[str, Tuple[int, int]]) -> pd.DataFrame:
    return pd.DataFrame([{'group': group, 'retained': kept, 'total': total}
                         for group, (kept, total) in retention.items()],
                        columns=['group', 'retained', 'total'])


def sweep_svg(series: Dict[str, List[Tuple[float, float]]], title: str = 'Validation CCC vs ground-truth shift',
              width: int = 640, height: int = 400) -> str:
    """Line chart of (shift seconds, CCC) points, one polyline per protocol."""
    margin = 50
    points = [p for values in series.values() for p in values if not math.isnan(p[1])]
    if not points:
        points = [(0.0, 0.0), (1.0, 1.0)]
    x_lo, x_hi = min(p[0] for p in points), max(p[0] for p in points)
    y_lo, y_hi = min(p[1] for p in points), max(p[1] for p in points)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5

    def sx(x: float) -> float:
        return margin + (x - x_lo) / (x_hi - x_lo) * (width - 2 * margin)

    def sy(y: float) -> float:
        return height - margin - (y - y_lo) / (y_hi - y_lo) * (height - 2 * margin)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="13">{title}</text>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="black"/>',
        f'<text x="{width / 2:.1f}" y="{height - 12}" text-anchor="middle">shift (s)</text>',
        f'<text x="14" y="{height / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 14 {height / 2:.1f})">CCC</text>',
    ]
    for i in range(5):
        xv = x_lo + (x_hi - x_lo) * i / 4
        yv = y_lo + (y_hi - y_lo) * i / 4
        parts.append(f'<text x="{sx(xv):.1f}" y="{height - margin + 15}" text-anchor="middle">{xv:.1f}</text>')
        parts.append(f'<text x="{margin - 5}" y="{sy(yv) + 4:.1f}" text-anchor="end">{yv:.2f}</text>')
    for k, (name, values) in enumerate(series.items()):
        colour = SERIES_COLOURS.get(name.split()[0], '#000000')
        coords = ' '.join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in values if not math.isnan(y))
        parts.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{coords}"/>')
        parts.append(f'<text x="{width - margin - 60}" y="{margin + 14 * k}" fill="{colour}">{name}</text>')
    parts.append('</svg>')
    return '\n'.join(parts) + '\n'


def shift_series(reports: Sequence[SelectionReport]) -> Dict[str, List[Tuple[float, float]]]:
    """CCC-versus-shift points of the protocols that sweep the shift."""
    series: Dict[str, List[Tuple[float, float]]] = {}
    for report in reports:
        if report.protocol in (Protocol.DURING, Protocol.NONE):
            label = report.protocol.value
            if report.protocol is Protocol.DURING and report.threshold is not None:
                label = f"{label} {report.threshold:g}"
            series.setdefault(label, []).append((report.shift, report.val_ccc))
    for values in series.values():
        values.sort()
    return series
