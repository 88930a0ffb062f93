"""Self-contained SVG plots: ROC curves and metric bar charts.

SVG is built as plain text so outputs are deterministic, diffable in tests,
and need no rendering backend.
"""
from __future__ import annotations

from pathlib import Path

from .metrics import MetricReport, RocCurve

__all__ = ["REFERENCE_BASELINES", "roc_svg", "bar_chart_svg", "write_text"]

# Externally published benchmark results for convolutional and support-vector
# classifiers on the same 140k real/fake face corpus. Reference bars only;
# nothing here is ever computed by this package.
REFERENCE_BASELINES: dict[str, MetricReport] = {
    "CNN": MetricReport(accuracy=0.883, precision=0.899, recall=0.863, f1=0.881, auc=0.883),
    "SVM": MetricReport(accuracy=0.817, precision=0.848, recall=0.772, f1=0.808, auc=0.817),
}

_BAR_COLORS = ("#4878a8", "#e0883a", "#6aa45f", "#b85c5c")


def write_text(text: str, path: str | Path) -> None:
    Path(path).write_bytes(text.encode("utf-8"))


def _svg_header(width: int, height: int) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]


def roc_svg(curve: RocCurve, title: str = "ROC curve") -> str:
    """Polyline ROC plot with the chance diagonal for reference."""
    size, margin = 420, 50
    plot = size - 2 * margin

    def sx(fpr: float) -> float:
        return margin + fpr * plot

    def sy(tpr: float) -> float:
        return size - margin - tpr * plot

    out = _svg_header(size, size)
    out.append(f'<text x="{size / 2:.1f}" y="20" text-anchor="middle">{title}</text>')
    out.append(
        f'<rect x="{margin}" y="{margin}" width="{plot}" height="{plot}" '
        'fill="none" stroke="#333"/>'
    )
    for frac in (0.0, 0.5, 1.0):
        out.append(
            f'<text x="{sx(frac):.1f}" y="{size - margin + 18}" text-anchor="middle">{frac:g}</text>'
        )
        out.append(
            f'<text x="{margin - 8}" y="{sy(frac) + 4:.1f}" text-anchor="end">{frac:g}</text>'
        )
    out.append(
        f'<text x="{size / 2:.1f}" y="{size - 10}" text-anchor="middle">'
        "false positive rate</text>"
    )
    out.append(
        f'<text x="14" y="{size / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 14 {size / 2:.1f})">true positive rate</text>'
    )
    out.append(
        f'<line x1="{sx(0):.1f}" y1="{sy(0):.1f}" x2="{sx(1):.1f}" y2="{sy(1):.1f}" '
        'stroke="#999" stroke-dasharray="4 3"/>'
    )
    pts = " ".join(f"{sx(fpr):.2f},{sy(tpr):.2f}" for fpr, tpr, _ in curve.points)
    out.append(f'<polyline class="roc" points="{pts}" fill="none" stroke="#c0392b" stroke-width="2"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def bar_chart_svg(
    title: str,
    groups: list[tuple[str, dict[str, float | None]]],
    metrics: list[str],
) -> str:
    """Grouped percentage bars: one labeled group per model, one bar per metric.

    Undefined (None) values render as an empty slot captioned "n/a".
    """
    if not groups:
        raise ValueError("need at least one group")
    bar_w = 34
    gap = 10
    group_w = len(metrics) * bar_w + (len(metrics) - 1) * 4 + 2 * gap
    margin_left, margin_top, margin_bottom = 56, 46, 58
    plot_h = 260
    width = margin_left + len(groups) * group_w + 20
    height = margin_top + plot_h + margin_bottom

    out = _svg_header(width, height)
    out.append(f'<text x="{width / 2:.1f}" y="24" text-anchor="middle" font-size="14">{title}</text>')
    base_y = margin_top + plot_h
    for pct in range(0, 101, 20):
        y = base_y - plot_h * pct / 100.0
        out.append(
            f'<line x1="{margin_left}" y1="{y:.1f}" x2="{width - 20}" y2="{y:.1f}" '
            'stroke="#ddd"/>'
        )
        out.append(f'<text x="{margin_left - 6}" y="{y + 4:.1f}" text-anchor="end">{pct}%</text>')
    for gi, (label, values) in enumerate(groups):
        gx = margin_left + gi * group_w + gap
        out.append(f'<g class="group" data-label="{label}">')
        for mi, metric in enumerate(metrics):
            x = gx + mi * (bar_w + 4)
            value = values.get(metric)
            color = _BAR_COLORS[mi % len(_BAR_COLORS)]
            if value is None:
                out.append(
                    f'<text x="{x + bar_w / 2:.1f}" y="{base_y - 6:.1f}" '
                    'text-anchor="middle" fill="#999">n/a</text>'
                )
                continue
            h = plot_h * max(0.0, min(1.0, value))
            out.append(
                f'<rect class="bar" data-metric="{metric}" x="{x:.1f}" '
                f'y="{base_y - h:.1f}" width="{bar_w}" height="{h:.1f}" fill="{color}"/>'
            )
            out.append(
                f'<text x="{x + bar_w / 2:.1f}" y="{base_y - h - 4:.1f}" '
                f'text-anchor="middle">{100.0 * value:.1f}</text>'
            )
        out.append(
            f'<text x="{gx + (group_w - 2 * gap) / 2:.1f}" y="{base_y + 18:.1f}" '
            f'text-anchor="middle">{label}</text>'
        )
        out.append("</g>")
    lx = margin_left
    ly = base_y + 38
    for mi, metric in enumerate(metrics):
        color = _BAR_COLORS[mi % len(_BAR_COLORS)]
        out.append(f'<rect x="{lx}" y="{ly - 10}" width="12" height="12" fill="{color}"/>')
        out.append(f'<text x="{lx + 16}" y="{ly}">{metric}</text>')
        lx += 16 + 8 * len(metric) + 24
    out.append("</svg>")
    return "\n".join(out) + "\n"
