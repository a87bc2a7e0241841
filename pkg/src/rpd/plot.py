"""Static SVG learning-curve charts from an aggregate CSV.

Pure string assembly, no randomness: one mean line (<path>) per config,
a +-1 std band (<polygon>) behind it, and a dashed horizontal line per
teacher baseline.
"""

from __future__ import annotations

from .metrics import AggregateRow

WIDTH, HEIGHT = 720, 440
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 160, 30, 50

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#17becf", "#7f7f7f"]


def _fmt_step(x: float) -> str:
    if x >= 1e6:
        return f"{x / 1e6:g}M"
    if x >= 1e3:
        return f"{x / 1e3:g}k"
    return f"{x:g}"


def learning_curve_svg(rows: list[AggregateRow], metric: str = "eval_success",
                       title: str = "") -> str:
    """Render mean +- std curves of `metric` over environment steps."""
    configs: dict[str, list[AggregateRow]] = {}
    for row in rows:
        configs.setdefault(row.config, []).append(row)
    for series in configs.values():
        series.sort(key=lambda r: r.global_step)

    x_max = max((r.global_step for r in rows), default=1)
    y_lo, y_hi = 0.0, 1.0
    for row in rows:
        mean, std = row.stats[metric]
        y_lo = min(y_lo, mean - std)
        y_hi = max(y_hi, mean + std)
    for series in configs.values():
        b = series[0].teacher_baseline
        if b is not None:
            y_lo, y_hi = min(y_lo, b), max(y_hi, b)
    if y_hi - y_lo < 1e-9:
        y_hi = y_lo + 1.0

    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B

    def sx(x: float) -> float:
        return MARGIN_L + plot_w * (x / x_max if x_max else 0.0)

    def sy(y: float) -> float:
        return MARGIN_T + plot_h * (1.0 - (y - y_lo) / (y_hi - y_lo))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        parts.append(f'<text x="{MARGIN_L}" y="20" font-size="14" '
                     f'font-family="sans-serif">{title}</text>')

    # axes
    x0, y0 = MARGIN_L, MARGIN_T + plot_h
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x0 + plot_w}" y2="{y0}" '
                 f'stroke="black"/>')
    parts.append(f'<line x1="{x0}" y1="{MARGIN_T}" x2="{x0}" y2="{y0}" '
                 f'stroke="black"/>')
    for i in range(5):
        xv = x_max * i / 4
        parts.append(f'<text x="{sx(xv):.1f}" y="{y0 + 18}" font-size="11" '
                     f'font-family="sans-serif" text-anchor="middle">'
                     f'{_fmt_step(xv)}</text>')
        yv = y_lo + (y_hi - y_lo) * i / 4
        parts.append(f'<text x="{x0 - 8}" y="{sy(yv) + 4:.1f}" font-size="11" '
                     f'font-family="sans-serif" text-anchor="end">{yv:.2f}</text>')
    parts.append(f'<text x="{x0 + plot_w / 2}" y="{HEIGHT - 10}" font-size="12" '
                 f'font-family="sans-serif" text-anchor="middle">environment steps</text>')

    for ci, (name, series) in enumerate(configs.items()):
        color = PALETTE[ci % len(PALETTE)]
        pts = [(sx(r.global_step), r.stats[metric]) for r in series]
        upper = [(x, sy(r.stats[metric][0] + r.stats[metric][1]))
                 for (x, _), r in zip(pts, series)]
        lower = [(x, sy(r.stats[metric][0] - r.stats[metric][1]))
                 for (x, _), r in zip(pts, series)]
        band = " ".join(f"{x:.2f},{y:.2f}" for x, y in upper + lower[::-1])
        parts.append(f'<polygon points="{band}" fill="{color}" '
                     f'fill-opacity="0.18" stroke="none"/>')
        d = " ".join(f"{'M' if i == 0 else 'L'} {x:.2f} "
                     f"{sy(r.stats[metric][0]):.2f}"
                     for i, ((x, _), r) in enumerate(zip(pts, series)))
        parts.append(f'<path d="{d}" fill="none" stroke="{color}" '
                     f'stroke-width="1.8"/>')
        if series[0].teacher_baseline is not None:
            yb = sy(series[0].teacher_baseline)
            parts.append(f'<line x1="{x0}" y1="{yb:.2f}" x2="{x0 + plot_w}" '
                         f'y2="{yb:.2f}" stroke="{color}" stroke-width="1.2" '
                         f'stroke-dasharray="6,4"/>')
        # legend
        ly = MARGIN_T + 16 + 20 * ci
        lx = WIDTH - MARGIN_R + 12
        parts.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 22}" y2="{ly}" '
                     f'stroke="{color}" stroke-width="1.8"/>')
        parts.append(f'<text x="{lx + 28}" y="{ly + 4}" font-size="12" '
                     f'font-family="sans-serif">{name}</text>')

    parts.append("</svg>")
    return "\n".join(parts)
