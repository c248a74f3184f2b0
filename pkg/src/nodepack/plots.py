"""Standalone SVG emitters for utilization step plots and overhead scatters.

Hand-rolled SVG keeps the output deterministic and dependency-free; these
are static result displays, not an interactive plotting surface.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

WIDTH = 720
HEIGHT = 440
MARGIN_LEFT = 70
MARGIN_RIGHT = 160
MARGIN_TOP = 40
MARGIN_BOTTOM = 50

PALETTE = [
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#9467bd",
    "#ff7f0e",
    "#8c564b",
    "#17becf",
    "#7f7f7f",
]


def _svg_header(title: str) -> list:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">',
        f'<text x="{WIDTH / 2:g}" y="22" text-anchor="middle" font-size="15">'
        f"{escape(title)}</text>",
    ]


def _axis(lines, x_label, y_label):
    x0, y0 = MARGIN_LEFT, HEIGHT - MARGIN_BOTTOM
    x1, y1 = WIDTH - MARGIN_RIGHT, MARGIN_TOP
    lines.append(
        f'<path d="M {x0} {y1} L {x0} {y0} L {x1} {y0}" fill="none" stroke="#000"/>'
    )
    lines.append(
        f'<text x="{(x0 + x1) / 2:g}" y="{HEIGHT - 12}" text-anchor="middle" '
        f'font-size="12">{escape(x_label)}</text>'
    )
    lines.append(
        f'<text x="18" y="{(y0 + y1) / 2:g}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 18 {(y0 + y1) / 2:g})">{escape(y_label)}</text>'
    )


def utilization_svg(series_by_label, title="System utilization over time") -> str:
    """Step plot of one or more utilization series.

    series_by_label is a list of (label, UtilizationSeries) pairs.
    """
    x0, y0 = MARGIN_LEFT, HEIGHT - MARGIN_BOTTOM
    x1, y1 = WIDTH - MARGIN_RIGHT, MARGIN_TOP
    t_max = max(s.breakpoints[-1] for _, s in series_by_label) or 1

    def sx(t):
        return x0 + (x1 - x0) * t / t_max

    def sy(v):
        return y0 - (y0 - y1) * v

    lines = _svg_header(title)
    _axis(lines, "time (s)", "busy slot fraction")
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = sy(frac)
        lines.append(
            f'<line x1="{x0}" y1="{y:g}" x2="{x1}" y2="{y:g}" stroke="#ddd"/>'
        )
        lines.append(
            f'<text x="{x0 - 8}" y="{y + 4:g}" text-anchor="end" font-size="11">'
            f"{frac:g}</text>"
        )
    for tick in range(5):
        t = t_max * tick / 4
        lines.append(
            f'<text x="{sx(t):g}" y="{y0 + 18}" text-anchor="middle" font-size="11">'
            f"{t / 1e6:.0f}</text>"
        )
    for i, (label, series) in enumerate(series_by_label):
        color = PALETTE[i % len(PALETTE)]
        points = []
        prev_v = 0.0
        for bp, busy in zip(series.breakpoints, series.busy_counts):
            v = busy / series.processors
            points.append(f"{sx(bp):g},{sy(prev_v):g}")
            points.append(f"{sx(bp):g},{sy(v):g}")
            prev_v = v
        points.append(f"{sx(series.breakpoints[-1]):g},{sy(prev_v):g}")
        points.append(f"{sx(series.breakpoints[-1]):g},{sy(0):g}")
        lines.append(
            f'<polyline points="{" ".join(points)}" fill="none" stroke="{color}" '
            f'stroke-width="1.5"/>'
        )
        lines.append(
            f'<text x="{x1 + 10}" y="{y1 + 16 * (i + 1)}" font-size="12" '
            f'fill="{color}">{escape(str(label))}</text>'
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def overhead_svg(cells, title="Normalized overhead by task time") -> str:
    """Log-scale scatter of normalized overhead vs task time.

    cells is an iterable with .task_time_s, .normalized, .strategy, .nodes.
    """
    cells = list(cells)
    x0, y0 = MARGIN_LEFT, HEIGHT - MARGIN_BOTTOM
    x1, y1 = WIDTH - MARGIN_RIGHT, MARGIN_TOP
    task_times = sorted({c.task_time_s for c in cells})
    values = [max(float(c.normalized), 1e-4) for c in cells]
    lo = math.floor(math.log10(min(values)))
    hi = math.ceil(math.log10(max(values))) or lo + 1

    def sx(t):
        i = task_times.index(t)
        return x0 + (x1 - x0) * (i + 1) / (len(task_times) + 1)

    def sy(v):
        return y0 - (y0 - y1) * (math.log10(max(v, 1e-4)) - lo) / (hi - lo)

    lines = _svg_header(title)
    _axis(lines, "task time (s)", "overhead / per-core job time")
    for exp in range(lo, hi + 1):
        y = sy(10.0**exp)
        lines.append(
            f'<line x1="{x0}" y1="{y:g}" x2="{x1}" y2="{y:g}" stroke="#ddd"/>'
        )
        lines.append(
            f'<text x="{x0 - 8}" y="{y + 4:g}" text-anchor="end" font-size="11">'
            f"1e{exp}</text>"
        )
    for t in task_times:
        lines.append(
            f'<text x="{sx(t):g}" y="{y0 + 18}" text-anchor="middle" font-size="11">'
            f"{t}</text>"
        )
    node_counts = sorted({c.nodes for c in cells})
    for c in cells:
        color = PALETTE[node_counts.index(c.nodes) % len(PALETTE)]
        x, y = sx(c.task_time_s), sy(float(c.normalized))
        if c.strategy == "M":
            lines.append(
                f'<circle cx="{x:g}" cy="{y:g}" r="5" fill="none" '
                f'stroke="{color}" stroke-width="1.5"/>'
            )
        else:
            lines.append(f'<circle cx="{x:g}" cy="{y:g}" r="5" fill="{color}"/>')
    for i, n in enumerate(node_counts):
        color = PALETTE[i % len(PALETTE)]
        lines.append(
            f'<text x="{x1 + 10}" y="{y1 + 16 * (i + 1)}" font-size="12" '
            f'fill="{color}">{n} nodes</text>'
        )
    lines.append(
        f'<text x="{x1 + 10}" y="{y1 + 16 * (len(node_counts) + 2)}" font-size="11">'
        "open = per-core, filled = per-node</text>"
    )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
