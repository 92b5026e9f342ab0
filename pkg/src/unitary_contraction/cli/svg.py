"""Minimal self-contained SVG line plots; the plotted numbers ride along in <metadata>."""
from __future__ import annotations

import json
from xml.sax.saxutils import escape

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")
_W, _H, _PAD = 420, 300, 45


def _panel(x0: int, title: str, series: list, ymax: float) -> list:
    xmax = max((max(xs) for _, xs, _ in series if len(xs)), default=1.0) or 1.0
    ymax = ymax or 1.0

    def px(x):
        return x0 + _PAD + (x / xmax) * (_W - 2 * _PAD)

    def py(y):
        return _H - _PAD - (y / ymax) * (_H - 2 * _PAD)

    out = [
        f'<g class="panel"><text x="{x0 + _W / 2}" y="20" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<line x1="{px(0)}" y1="{py(0)}" x2="{px(xmax)}" y2="{py(0)}" stroke="black"/>',
        f'<line x1="{px(0)}" y1="{py(0)}" x2="{px(0)}" y2="{py(ymax)}" stroke="black"/>',
        f'<text x="{px(xmax)}" y="{py(0) + 16}" text-anchor="end" font-size="10">t = {xmax:g}</text>',
        f'<text x="{px(0) - 4}" y="{py(ymax) + 4}" text-anchor="end" font-size="10">{ymax:.3g}</text>',
        f'<text x="{px(0) - 4}" y="{py(0) + 4}" text-anchor="end" font-size="10">0</text>',
    ]
    for i, (label, xs, ys) in enumerate(series):
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
        color = _PALETTE[i % len(_PALETTE)]
        out.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{pts}">'
            f"<title>{escape(label)}</title></polyline>"
        )
    out.append("</g>")
    return out


def traces_svg(traces, title: str = "") -> str:
    """Two panels: t vs norm_to_identity and t vs dist_to_haar, one line per trace."""
    norm_series, dist_series, data = [], [], []
    for tr in traces:
        label = f"seed {tr.seed} / {tr.label}"
        t = [float(v) for v in tr.column("t")]
        n = [float(v) for v in tr.column("norm_to_identity")]
        d = [float(v) for v in tr.column("dist_to_haar")]
        norm_series.append((label, t, n))
        dist_series.append((label, t, d))
        data.append({"label": label, "t": t, "norm_to_identity": n, "dist_to_haar": d})
    ymax_n = max((max(s[2]) for s in norm_series), default=1.0)
    ymax_d = max((max(s[2]) for s in dist_series), default=1.0)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{2 * _W}" height="{_H + 20}" font-family="sans-serif">',
        f"<metadata>{escape(json.dumps({'title': title, 'series': data}))}</metadata>",
        f'<text x="{_W}" y="{_H + 14}" text-anchor="middle" font-size="12">{escape(title)}</text>',
    ]
    parts += _panel(0, "norm to identity", norm_series, ymax_n)
    parts += _panel(_W, "distance to Haar", dist_series, ymax_d)
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
