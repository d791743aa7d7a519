"""Dependency-free SVG emission for the scatter map and distribution plots.

Output is deterministic text: fixed float formatting, fixed element order,
no timestamps, so artifact diffs stay meaningful between runs.
"""

from __future__ import annotations

import math
import os

import numpy as np

PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8", "#ffbb78",
)
EXCLUDED_COLOR = "#999999"

# Highlight overlays cycle through these (color, shape) styles; the first
# two match the red/yellow convention of the source figures.
HIGHLIGHT_STYLES = (
    ("#d62728", "square"),
    ("#ffd700", "triangle"),
    ("#17becf", "diamond"),
)

SERIES_COLORS = {
    "self": "#1f77b4",
    "coauthor": "#ff7f0e",
    "all_pairs": "#2ca02c",
}


def _bounds(coords: np.ndarray) -> tuple[float, float, float, float]:
    x_lo, y_lo = coords.min(axis=0)
    x_hi, y_hi = coords.max(axis=0)
    pad_x = (x_hi - x_lo) * 0.05 or 1.0
    pad_y = (y_hi - y_lo) * 0.05 or 1.0
    return x_lo - pad_x, x_hi + pad_x, y_lo - pad_y, y_hi + pad_y


def _marker(shape: str, x: float, y: float, color: str, size: float = 5.0) -> str:
    s = size
    if shape == "square":
        return (f'<rect x="{x - s:.2f}" y="{y - s:.2f}" width="{2 * s:.2f}" '
                f'height="{2 * s:.2f}" fill="{color}" stroke="#000" stroke-width="0.5"/>')
    if shape == "triangle":
        pts = f"{x:.2f},{y - s:.2f} {x - s:.2f},{y + s:.2f} {x + s:.2f},{y + s:.2f}"
        return f'<polygon points="{pts}" fill="{color}" stroke="#000" stroke-width="0.5"/>'
    if shape == "diamond":
        pts = f"{x:.2f},{y - s:.2f} {x + s:.2f},{y:.2f} {x:.2f},{y + s:.2f} {x - s:.2f},{y:.2f}"
        return f'<polygon points="{pts}" fill="{color}" stroke="#000" stroke-width="0.5"/>'
    raise ValueError(f"unknown marker shape {shape!r}")


def emit_scatter_svg(projection, assignment: dict[str, int],
                     excluded: dict[str, int] | None = None,
                     highlights: dict[str, set] | None = None,
                     meta_line: str | None = None) -> str:
    """Cluster map: one circle per paper colored by label.

    Excluded papers render gray. Highlight layers draw a named author's
    papers with distinct marker shapes on top of the base layer. The
    paper id sets of projection, assignment, and excluded must tile
    exactly; highlight ids must be a subset.
    """
    excluded = excluded or {}
    highlights = highlights or {}
    ids = set(projection.paper_ids)
    labeled = set(assignment) | set(excluded)
    if labeled != ids:
        extra = sorted(labeled - ids)[:3]
        missing = sorted(ids - labeled)[:3]
        raise ValueError(
            f"id sets mismatch (unknown: {extra}, unlabeled: {missing})"
        )
    for name, pids in highlights.items():
        stray = set(pids) - ids
        if stray:
            raise ValueError(f"highlight {name!r} references unknown ids {sorted(stray)[:3]}")

    width, height, legend_w = 800, 600, 200
    coords = np.asarray(projection.coords, dtype=np.float64)
    x_lo, x_hi, y_lo, y_hi = _bounds(coords)

    def sx(x):
        return 30 + (x - x_lo) / (x_hi - x_lo) * (width - 60)

    def sy(y):
        return height - 30 - (y - y_lo) / (y_hi - y_lo) * (height - 60)

    lines = ['<?xml version="1.0" encoding="UTF-8"?>']
    if meta_line is not None:
        lines.append(f"<!-- {meta_line} -->")
    lines.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width + legend_w}" '
        f'height="{height}" viewBox="0 0 {width + legend_w} {height}">'
    )
    lines.append(f'<rect width="{width + legend_w}" height="{height}" fill="#ffffff"/>')

    lines.append('<g id="points">')
    for pid, (x, y) in zip(projection.paper_ids, coords):
        if pid in assignment:
            color = PALETTE[assignment[pid] % len(PALETTE)]
        else:
            color = EXCLUDED_COLOR
        lines.append(
            f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" '
            f'fill="{color}" fill-opacity="0.8"/>'
        )
    lines.append("</g>")

    for h, (name, pids) in enumerate(sorted(highlights.items())):
        color, shape = HIGHLIGHT_STYLES[h % len(HIGHLIGHT_STYLES)]
        lines.append(f'<g id="highlight-{h}" data-name="{name}">')
        pos = {pid: c for pid, c in zip(projection.paper_ids, coords)}
        for pid in sorted(pids):
            x, y = pos[pid]
            lines.append(_marker(shape, sx(x), sy(y), color))
        lines.append("</g>")

    legend_x = width + 20
    lines.append('<g id="legend" font-family="sans-serif" font-size="12">')
    entry_y = 30
    for label in sorted(set(assignment.values())):
        color = PALETTE[label % len(PALETTE)]
        lines.append(
            f'<circle cx="{legend_x}" cy="{entry_y}" r="5" fill="{color}"/>'
            f'<text x="{legend_x + 12}" y="{entry_y + 4}">cluster {label}</text>'
        )
        entry_y += 20
    if excluded:
        lines.append(
            f'<circle cx="{legend_x}" cy="{entry_y}" r="5" fill="{EXCLUDED_COLOR}"/>'
            f'<text x="{legend_x + 12}" y="{entry_y + 4}">excluded</text>'
        )
        entry_y += 20
    for h, (name, _) in enumerate(sorted(highlights.items())):
        color, shape = HIGHLIGHT_STYLES[h % len(HIGHLIGHT_STYLES)]
        lines.append(f'<g transform="translate({legend_x},{entry_y})">'
                     + _marker(shape, 0, 0, color) + "</g>")
        lines.append(f'<text x="{legend_x + 12}" y="{entry_y + 4}">{name}</text>')
        entry_y += 20
    lines.append("</g>")

    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def emit_distribution_plot(dists, bins: int = 40,
                           meta_line: str | None = None) -> str:
    """Overlaid histograms of the distance populations with shared binning.

    Each series becomes a <g data-series data-total> holding one rect per
    non-empty bin (data-count), so totals are checkable from the output.
    """
    series = {name: np.asarray(vals, dtype=np.float64)
              for name, vals in dists.as_dict().items() if len(vals)}
    if not series:
        raise ValueError("all distributions are empty")
    if bins < 1:
        raise ValueError("bins must be >= 1")

    lo = min(float(v.min()) for v in series.values())
    hi = max(float(v.max()) for v in series.values())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5

    counts = {name: np.histogram(v, bins=bins, range=(lo, hi))[0]
              for name, v in series.items()}
    peak = max(int(c.max()) for c in counts.values()) or 1

    width, height = 800, 400
    plot_w, plot_h = width - 80, height - 70
    bin_w = plot_w / bins

    lines = ['<?xml version="1.0" encoding="UTF-8"?>']
    if meta_line is not None:
        lines.append(f"<!-- {meta_line} -->")
    lines.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">'
    )
    lines.append(f'<rect width="{width}" height="{height}" fill="#ffffff"/>')
    lines.append(
        f'<line x1="40" y1="{40 + plot_h}" x2="{40 + plot_w}" y2="{40 + plot_h}" '
        'stroke="#333" stroke-width="1"/>'
    )

    for name in ("self", "coauthor", "all_pairs"):
        if name not in counts:
            continue
        color = SERIES_COLORS[name]
        total = int(counts[name].sum())
        lines.append(f'<g data-series="{name}" data-total="{total}" fill="{color}" '
                     'fill-opacity="0.45">')
        for b, c in enumerate(counts[name]):
            if c == 0:
                continue
            bar_h = plot_h * (int(c) / peak)
            x = 40 + b * bin_w
            y = 40 + plot_h - bar_h
            lines.append(
                f'<rect data-count="{int(c)}" x="{x:.2f}" y="{y:.2f}" '
                f'width="{bin_w:.2f}" height="{bar_h:.2f}"/>'
            )
        lines.append("</g>")

    lines.append('<g id="legend" font-family="sans-serif" font-size="12">')
    entry_y = 20
    for name in ("self", "coauthor", "all_pairs"):
        if name not in counts:
            continue
        lines.append(
            f'<rect x="{width - 150}" y="{entry_y - 10}" width="12" height="12" '
            f'fill="{SERIES_COLORS[name]}" fill-opacity="0.45"/>'
            f'<text x="{width - 132}" y="{entry_y}">{name}</text>'
        )
        entry_y += 18
    lines.append("</g>")
    lines.append(
        f'<text x="40" y="{height - 10}" font-family="sans-serif" '
        f'font-size="11">{lo:.3f}</text>'
        f'<text x="{40 + plot_w - 40}" y="{height - 10}" font-family="sans-serif" '
        f'font-size="11">{hi:.3f}</text>'
    )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def emit_bar_histogram_svg(pairs, log_y: bool = True, title: str = "",
                           meta_line: str | None = None) -> str:
    """Bar chart for (value, count) pairs, count axis optionally log-scaled.

    Used for the papers-per-author distribution, where counts span orders
    of magnitude.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("nothing to plot")
    width, height = 800, 400
    plot_w, plot_h = width - 80, height - 80
    peak = max(c for _, c in pairs)
    scale_top = math.log10(peak) if log_y and peak > 1 else float(peak)

    def bar_height(count: int) -> float:
        if count <= 0:
            return 0.0
        if log_y and peak > 1:
            return plot_h * (math.log10(count) / scale_top) if count > 1 else 2.0
        return plot_h * (count / scale_top)

    bar_w = max(2.0, plot_w / (max(v for v, _ in pairs) + 1))
    lines = ['<?xml version="1.0" encoding="UTF-8"?>']
    if meta_line is not None:
        lines.append(f"<!-- {meta_line} -->")
    lines.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">'
    )
    lines.append(f'<rect width="{width}" height="{height}" fill="#ffffff"/>')
    if title:
        lines.append(f'<text x="40" y="25" font-family="sans-serif" '
                     f'font-size="14">{title}</text>')
    lines.append(
        f'<line x1="40" y1="{40 + plot_h}" x2="{40 + plot_w}" y2="{40 + plot_h}" '
        'stroke="#333" stroke-width="1"/>'
    )
    for value, count in pairs:
        h = bar_height(count)
        x = 40 + value * bar_w
        lines.append(
            f'<rect data-value="{value}" data-count="{count}" x="{x:.2f}" '
            f'y="{40 + plot_h - h:.2f}" width="{bar_w * 0.9:.2f}" height="{h:.2f}" '
            'fill="#1f77b4"/>'
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def write_svg(text: str, path) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)
