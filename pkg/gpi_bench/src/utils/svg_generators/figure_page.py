import html
import logging
from pathlib import Path
from typing import List, Optional, Sequence, Union

import pandas as pd

from gpi_bench import __version__
from ..results_store import summarize

logger = logging.getLogger(__name__)

PANEL_WIDTH = 520
PANEL_HEIGHT = 340
MARGIN = {'left': 70, 'right': 20, 'top': 40, 'bottom': 60}
PALETTE = ['#1f77b4', '#d62728', '#2ca02c', '#9467bd', '#ff7f0e']
ERROR_BAR_SIGMAS = 3
Y_AXIS_LABEL = 'mean stopping time τ (episodes, lower is better)'


class PlotError(ValueError):
    pass


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _panel_svg(summary: pd.DataFrame, title: str, x_offset: float) -> List[str]:
    algorithms = sorted(summary['algorithm'].unique())
    thresholds = sorted(summary['mu0'].unique())
    plot_w = PANEL_WIDTH - MARGIN['left'] - MARGIN['right']
    plot_h = PANEL_HEIGHT - MARGIN['top'] - MARGIN['bottom']
    left = x_offset + MARGIN['left']
    bottom = MARGIN['top'] + plot_h

    tops = summary['mean_tau'] + ERROR_BAR_SIGMAS * summary['std_tau']
    y_max = float(tops.max()) if len(tops) else 1.0
    y_max = y_max * 1.1 if y_max > 0 else 1.0

    def y_of(value: float) -> float:
        value = min(max(value, 0.0), y_max)
        return bottom - plot_h * value / y_max

    parts = [
        f'<g class="panel" data-title="{html.escape(title)}">',
        f'<text class="panel-title" x="{_fmt(x_offset + PANEL_WIDTH / 2)}" y="22" '
        f'text-anchor="middle" font-weight="bold">{html.escape(title)}</text>',
        f'<line class="axis" x1="{_fmt(left)}" y1="{_fmt(bottom)}" x2="{_fmt(left + plot_w)}" '
        f'y2="{_fmt(bottom)}" stroke="#000"/>',
        f'<line class="axis" x1="{_fmt(left)}" y1="{_fmt(MARGIN["top"])}" x2="{_fmt(left)}" '
        f'y2="{_fmt(bottom)}" stroke="#000"/>',
        f'<text class="axis-label" transform="translate({_fmt(x_offset + 16)},{_fmt(MARGIN["top"] + plot_h / 2)}) '
        f'rotate(-90)" text-anchor="middle" font-size="11">{html.escape(Y_AXIS_LABEL)}</text>',
    ]

    group_w = plot_w / len(thresholds)
    bar_w = group_w * 0.8 / len(algorithms)
    for gi, mu0 in enumerate(thresholds):
        group_left = left + gi * group_w + group_w * 0.1
        parts.append(
            f'<text class="x-tick" x="{_fmt(left + (gi + 0.5) * group_w)}" y="{_fmt(bottom + 18)}" '
            f'text-anchor="middle" font-size="11">μ0 = {mu0:g}</text>')
        for ai, algorithm in enumerate(algorithms):
            cell = summary[(summary['algorithm'] == algorithm) & (summary['mu0'] == mu0)]
            if cell.empty:
                continue
            mean = float(cell['mean_tau'].iloc[0])
            std = float(cell['std_tau'].iloc[0])
            x = group_left + ai * bar_w
            cx = x + bar_w / 2
            top = y_of(mean)
            parts.extend([
                f'<rect class="bar" data-algorithm="{html.escape(algorithm)}" data-mu0="{mu0:g}" '
                f'x="{_fmt(x)}" y="{_fmt(top)}" width="{_fmt(bar_w * 0.9)}" height="{_fmt(bottom - top)}" '
                f'fill="{PALETTE[ai % len(PALETTE)]}"/>',
                f'<line class="error-bar" x1="{_fmt(cx)}" y1="{_fmt(y_of(mean - ERROR_BAR_SIGMAS * std))}" '
                f'x2="{_fmt(cx)}" y2="{_fmt(y_of(mean + ERROR_BAR_SIGMAS * std))}" stroke="#000"/>',
                f'<text class="mean" x="{_fmt(cx)}" y="{_fmt(top - 4)}" text-anchor="middle" '
                f'font-size="9">{mean:.1f}</text>',
            ])

    for ai, algorithm in enumerate(algorithms):
        ly = MARGIN['top'] + 14 * ai
        lx = left + plot_w - 110
        parts.extend([
            f'<rect class="legend" x="{_fmt(lx)}" y="{_fmt(ly)}" width="10" height="10" '
            f'fill="{PALETTE[ai % len(PALETTE)]}"/>',
            f'<text class="legend" x="{_fmt(lx + 14)}" y="{_fmt(ly + 9)}" font-size="11">'
            f'{html.escape(algorithm)}</text>',
        ])
    parts.append('</g>')
    return parts


def emit_plot(tables: Union[pd.DataFrame, Sequence[pd.DataFrame]], out_path: Union[str, Path],
              titles: Optional[Sequence[str]] = None) -> Path:
    """
    Render grouped mean-tau bars with 3-sigma error bars, one panel per results table.

    Args:
        tables: One results table per instance
        out_path: Destination SVG file
        titles: Panel titles, defaults to "panel 1", "panel 2", ...

    Returns:
        Path: The written SVG file
    """
    if isinstance(tables, pd.DataFrame):
        tables = [tables]
    if not tables:
        raise PlotError("No results tables given")
    titles = list(titles) if titles is not None else [f"panel {i + 1}" for i in range(len(tables))]
    if len(titles) != len(tables):
        raise PlotError("Need exactly one title per results table")

    body = []
    for i, (df, title) in enumerate(zip(tables, titles)):
        if df is None or df.empty:
            raise PlotError(f"Results table for '{title}' is empty")
        summary = summarize(df)
        n_algorithms = summary['algorithm'].nunique()
        if n_algorithms < 2:
            raise PlotError(f"Results table for '{title}' has {n_algorithms} algorithm(s); at least 2 are needed")
        body.extend(_panel_svg(summary, title, i * PANEL_WIDTH))

    width = PANEL_WIDTH * len(tables)
    svg = f'''<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{PANEL_HEIGHT}" viewBox="0 0 {width} {PANEL_HEIGHT}" font-family="sans-serif">
<!-- gpi-bench {__version__}: error bars span {ERROR_BAR_SIGMAS} standard deviations -->
<rect width="100%" height="100%" fill="#fff"/>
{chr(10).join(body)}
</svg>
'''
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(svg, encoding='utf-8')
    logger.info(f"Figure written to {out_path}")
    return out_path
