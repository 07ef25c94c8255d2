"""Static SVG rendering of EBP-GEXIT charts."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

W, H = 640, 440
LEFT, RIGHT, TOP, BOTTOM = 60, 20, 30, 50


def _ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    return np.linspace(lo, hi, n + 1)


def chart_svg(h, g, title: str = "", verticals: dict | None = None, h_range=None) -> str:
    """g against h as a polyline, with labelled vertical lines (e.g. MAP, UB)."""
    h = np.asarray(h, dtype=float)
    g = np.asarray(g, dtype=float)
    h0, h1 = h_range if h_range is not None else (0.0, float(np.max(h)) if h.size else 1.0)
    g0, g1 = 0.0, max(1.0, float(np.max(g)) if g.size else 1.0)
    pw, ph = W - LEFT - RIGHT, H - TOP - BOTTOM

    def px(v):
        return LEFT + (v - h0) / (h1 - h0) * pw

    def py(v):
        return TOP + (1.0 - (v - g0) / (g1 - g0)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
           f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
           f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for t in _ticks(h0, h1):
        out.append(f'<text x="{px(t):.2f}" y="{H - BOTTOM + 18}" font-size="11" text-anchor="middle">{t:.3g}</text>')
    for t in _ticks(g0, g1):
        out.append(f'<text x="{LEFT - 6}" y="{py(t) + 4:.2f}" font-size="11" text-anchor="end">{t:.3g}</text>')
    out.append(f'<text x="{LEFT + pw / 2:.2f}" y="{H - 12}" font-size="13" text-anchor="middle">h</text>')
    out.append(f'<text x="16" y="{TOP + ph / 2:.2f}" font-size="13" text-anchor="middle">g</text>')
    if title:
        out.append(f'<text x="{LEFT + pw / 2:.2f}" y="20" font-size="14" text-anchor="middle">{escape(title)}</text>')
    if h.size:
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(h, g))
        out.append(f'<polyline points="{pts}" fill="none" stroke="black" stroke-width="1.5"/>')
    colors = ("#c0392b", "#2471a3", "#1e8449", "#7d3c98")
    for i, (label, v) in enumerate(sorted((verticals or {}).items())):
        if v is None or not h0 <= v <= h1:
            continue
        c = colors[i % len(colors)]
        out.append(f'<line x1="{px(v):.2f}" y1="{TOP}" x2="{px(v):.2f}" y2="{TOP + ph}" stroke="{c}" '
                   f'stroke-dasharray="5,4"/>')
        out.append(f'<text x="{px(v) + 4:.2f}" y="{TOP + 14 + 14 * i}" font-size="11" fill="{c}">'
                   f'{escape(label)} {v:.4f}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
