"""Minimal SVG line plots for sweep and CDF diagnostics"""

from pathlib import Path
from typing import Dict, Sequence, Tuple
from xml.sax.saxutils import escape

import numpy as np

WIDTH = 640
HEIGHT = 400
MARGIN = 50
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def _scale(values: np.ndarray, lo: float, hi: float, start: float, end: float) -> np.ndarray:
    span = hi - lo if hi > lo else 1.0
    return start + (values - lo) / span * (end - start)


def line_plot_svg(
    series: Dict[str, Tuple[Sequence[float], Sequence[float]]],
    title: str,
    x_label: str,
    y_label: str,
    config_hash: str = "",
) -> str:
    """
    Render named (x, y) series as polylines over a shared box with axes

    Args:
        series: Label -> (x values, y values)
        title: Plot title
        x_label: Horizontal axis label
        y_label: Vertical axis label
        config_hash: Stamped into a comment for provenance

    Returns:
        SVG document as text
    """
    xs = np.concatenate([np.asarray(x, dtype=float) for x, _ in series.values()])
    ys = np.concatenate([np.asarray(y, dtype=float) for _, y in series.values()])
    x_lo, x_hi = float(xs.min()), float(xs.max())
    y_lo, y_hi = min(0.0, float(ys.min())), float(ys.max())

    left, right = MARGIN, WIDTH - MARGIN
    top, bottom = MARGIN, HEIGHT - MARGIN

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}">',
        f"<!-- config_hash: {escape(config_hash)} -->",
        '<rect width="100%" height="100%" fill="white"/>',
        f'<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="black"/>',
        f'<text x="{WIDTH / 2}" y="{MARGIN / 2}" text-anchor="middle">{escape(title)}</text>',
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 10}" text-anchor="middle">{escape(x_label)}</text>',
        f'<text x="15" y="{HEIGHT / 2}" text-anchor="middle" '
        f'transform="rotate(-90 15 {HEIGHT / 2})">{escape(y_label)}</text>',
        f'<text x="{left}" y="{bottom + 15}" text-anchor="middle">{x_lo:.3g}</text>',
        f'<text x="{right}" y="{bottom + 15}" text-anchor="middle">{x_hi:.3g}</text>',
        f'<text x="{left - 5}" y="{bottom}" text-anchor="end">{y_lo:.3g}</text>',
        f'<text x="{left - 5}" y="{top + 5}" text-anchor="end">{y_hi:.3g}</text>',
    ]

    for index, (label, (x, y)) in enumerate(series.items()):
        color = COLORS[index % len(COLORS)]
        px = _scale(np.asarray(x, dtype=float), x_lo, x_hi, left, right)
        py = _scale(np.asarray(y, dtype=float), y_lo, y_hi, bottom, top)
        points = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{points}"/>'
        )
        legend_y = top + 15 * (index + 1)
        parts.append(
            f'<text x="{right - 5}" y="{legend_y}" text-anchor="end" fill="{color}">'
            f"{escape(label)}</text>"
        )

    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_line_plot(path: Path, *args, **kwargs) -> Path:
    """line_plot_svg written to `path`"""
    path = Path(path)
    path.write_text(line_plot_svg(*args, **kwargs), encoding="utf-8")
    return path
