"""Static SVG renderings: polygons in rotation-vector coordinates and
deviation traces on a log time axis."""

from __future__ import annotations

import math
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")
W, H, M = 640, 640, 60


def _nice_ticks(lo: float, hi: float, count: int = 6) -> list[float]:
    span = hi - lo
    if span <= 0:
        return [lo]
    raw = span / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 5, 10) if s * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    return [round(start + i * step, 12) for i in range(int((hi - start) / step) + 1)]


def _frame(xlo, xhi, ylo, yhi, xlabel, ylabel, xticks, yticks, sx, sy) -> list[str]:
    out = [f'<rect x="{M}" y="{M}" width="{W - 2 * M}" height="{H - 2 * M}" fill="white" stroke="#444"/>']
    for t in xticks:
        x = sx(t)
        out.append(f'<line x1="{x:.2f}" y1="{H - M}" x2="{x:.2f}" y2="{H - M + 5}" stroke="#444"/>')
        out.append(f'<text x="{x:.2f}" y="{H - M + 18}" font-size="11" text-anchor="middle">{t:g}</text>')
    for t in yticks:
        y = sy(t)
        out.append(f'<line x1="{M - 5}" y1="{y:.2f}" x2="{M}" y2="{y:.2f}" stroke="#444"/>')
        out.append(f'<text x="{M - 8}" y="{y + 4:.2f}" font-size="11" text-anchor="end">{t:g}</text>')
    out.append(f'<text x="{W / 2}" y="{H - 15}" font-size="13" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="18" y="{H / 2}" font-size="13" text-anchor="middle" '
               f'transform="rotate(-90 18 {H / 2})">{escape(ylabel)}</text>')
    return out


def _wrap(body: list[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
            f'viewBox="0 0 {W} {H}" font-family="sans-serif">')
    return "\n".join([head, *body, "</svg>"]) + "\n"


def polygons_svg(layers: Sequence[tuple[str, np.ndarray]], points: Sequence[tuple[str, np.ndarray]] = ()) -> str:
    """Polygons (vertex arrays, counterclockwise) and point clouds, equal aspect."""
    allpts = [np.asarray(v, dtype=float).reshape(-1, 2) for _, v in list(layers) + list(points)]
    allpts = [p for p in allpts if len(p)]
    if not allpts:
        raise ValueError("nothing to plot")
    P = np.vstack(allpts)
    lo, hi = P.min(axis=0), P.max(axis=0)
    span = max(float(np.max(hi - lo)), 1e-3) * 1.15
    mid = (lo + hi) / 2
    xlo, xhi, ylo, yhi = mid[0] - span / 2, mid[0] + span / 2, mid[1] - span / 2, mid[1] + span / 2
    scale = (W - 2 * M) / span

    def sx(x):
        return M + (x - xlo) * scale

    def sy(y):
        return H - M - (y - ylo) * scale

    body = _frame(xlo, xhi, ylo, yhi, "rotation x", "rotation y",
                  _nice_ticks(xlo, xhi), _nice_ticks(ylo, yhi), sx, sy)
    legend = []
    for i, (name, V) in enumerate(layers):
        V = np.asarray(V, dtype=float).reshape(-1, 2)
        c = PALETTE[i % len(PALETTE)]
        if len(V) == 1:
            body.append(f'<circle cx="{sx(V[0, 0]):.2f}" cy="{sy(V[0, 1]):.2f}" r="4" fill="{c}"/>')
        else:
            pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in V)
            tag = "polyline" if len(V) == 2 else "polygon"
            body.append(f'<{tag} points="{pts}" fill="{c}" fill-opacity="0.15" stroke="{c}" stroke-width="1.5"/>')
        legend.append((name, c))
    for j, (name, Q) in enumerate(points):
        c = PALETTE[(len(layers) + j) % len(PALETTE)]
        for x, y in np.asarray(Q, dtype=float).reshape(-1, 2):
            body.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="1.6" fill="{c}"/>')
        legend.append((name, c))
    for k, (name, c) in enumerate(legend):
        y = M + 16 + 16 * k
        body.append(f'<rect x="{M + 8}" y="{y - 9}" width="10" height="10" fill="{c}"/>')
        body.append(f'<text x="{M + 24}" y="{y}" font-size="12">{escape(name)}</text>')
    return _wrap(body)


def traces_svg(traces: Sequence[tuple[str, np.ndarray, np.ndarray]], bound: float | None = None) -> str:
    """Deviation against n (log axis), with an optional horizontal bound."""
    if not traces:
        raise ValueError("nothing to plot")
    n_all = np.concatenate([np.asarray(n, dtype=float) for _, n, _ in traces])
    d_all = np.concatenate([np.asarray(d, dtype=float) for _, _, d in traces])
    xlo, xhi = math.log10(max(1.0, n_all.min())), math.log10(max(10.0, n_all.max()))
    yhi = float(max(d_all.max(), bound or 0.0)) * 1.1 or 1.0
    ylo = 0.0

    def sx(n):
        return M + (math.log10(max(n, 1.0)) - xlo) / (xhi - xlo) * (W - 2 * M)

    def sy(y):
        return H - M - (y - ylo) / (yhi - ylo) * (H - 2 * M)

    xt = [10.0 ** k for k in range(math.ceil(xlo), math.floor(xhi) + 1)]
    body = _frame(xlo, xhi, ylo, yhi, "n", "deviation", xt, _nice_ticks(ylo, yhi), sx, sy)
    for i, (name, n, d) in enumerate(traces):
        c = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(n, d))
        body.append(f'<polyline points="{pts}" fill="none" stroke="{c}" stroke-width="1.5"/>')
        body.append(f'<text x="{M + 10}" y="{M + 16 + 16 * i}" font-size="12" fill="{c}">{escape(name)}</text>')
    if bound is not None and bound <= yhi:
        y = sy(bound)
        body.append(f'<line x1="{M}" y1="{y:.2f}" x2="{W - M}" y2="{y:.2f}" stroke="#000" stroke-dasharray="6,4"/>')
        body.append(f'<text x="{W - M - 4}" y="{y - 4:.2f}" font-size="11" text-anchor="end">C = {bound:.6g}</text>')
    return _wrap(body)
