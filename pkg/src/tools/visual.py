# src/tools/visual.py
"""
Learning-curve charts from episode logs.
"""
from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import Any, Dict, List, Optional

import altair as alt
import numpy as np
from loguru import logger

from src.utils.errors import ContractError
from src.utils.logs import EpisodeLogRecord


def learning_curve_rows(
    runs: Mapping[str, Sequence[EpisodeLogRecord]],
    bin_steps: Optional[int] = None,
    kind: str = 'train',
) -> List[Dict[str, Any]]:
    """
    Aggregate per-seed episode returns into one row per step bin.

    Each run is first averaged within a bin (bins of `bin_steps` environment
    steps, or one bin per record when None); the row then carries the mean over
    runs plus the min/max envelope used as the band.

    Args:
        runs: Records per run label, usually one log file per seed.
        bin_steps: Width of a step bin.
        kind: Record kind to plot.

    Returns:
        Rows with `step`, `mean`, `low`, `high` and `runs` keys, sorted by step.
    """
    per_bin: Dict[int, Dict[str, List[float]]] = {}
    for label, records in runs.items():
        for record in records:
            if record.kind != kind:
                continue
            key = record.total_steps if not bin_steps else (record.total_steps // bin_steps + 1) * bin_steps
            per_bin.setdefault(key, {}).setdefault(label, []).append(record.return_)
    rows = []
    for step in sorted(per_bin):
        run_means = [float(np.mean(values)) for values in per_bin[step].values()]
        rows.append({
            'step': step,
            'mean': float(np.mean(run_means)),
            'low': float(np.min(run_means)),
            'high': float(np.max(run_means)),
            'runs': len(run_means),
        })
    return rows


def create_learning_curve(
    rows: List[Dict[str, Any]],
    title: str = 'Learning curve',
    width: int = 500,
    height: int = 300,
) -> alt.LayerChart:
    """
    Mean return line with point markers over a min/max band across runs.
    """
    if not rows:
        raise ContractError('no episode records to plot')
    source = alt.Data(values=rows)
    x_enc = alt.X(field='step', type='quantitative', title='Environment steps')
    band = alt.Chart(source).mark_area(opacity=0.25).encode(
        x=x_enc,
        y=alt.Y(field='low', type='quantitative', title='Episode return'),
        y2=alt.Y2(field='high'),
    )
    line = alt.Chart(source).mark_line(point=True, strokeWidth=2).encode(
        x=x_enc,
        y=alt.Y(field='mean', type='quantitative'),
    )
    return alt.layer(band, line).properties(width=width, height=height, title=title)


def save_chart(chart: alt.TopLevelMixin, output_path: str | Path) -> Path:
    """Render to PNG or SVG, chosen by the file suffix."""
    output_path = Path(output_path)
    fmt = output_path.suffix.lstrip('.').lower() or 'png'
    if fmt not in ('png', 'svg'):
        raise ContractError(f'unsupported image format {fmt!r}; use .png or .svg')
    output_path.parent.mkdir(parents=True, exist_ok=True)
    chart.save(str(output_path), format=fmt)
    logger.info(f'📈 chart written to {output_path}')
    return output_path
