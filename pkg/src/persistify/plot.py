"""Static SVG figures written by hand from polylines and text."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .traceio import TraceTable

PLOT_KINDS = ("energy", "cost", "deviation", "trajectory")
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2",
           "#17becf", "#7f7f7f", "#bcbd22")
MAX_POINTS = 2000


def _nice_ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    if not np.isfinite(lo) or not np.isfinite(hi) or hi <= lo:
        return np.array([lo])
    raw = (hi - lo) / n
    mag = 10.0 ** np.floor(np.log10(raw))
    step = mag * min((1, 2, 5, 10), key=lambda m: abs(m * mag - raw))
    start = np.ceil(lo / step) * step
    return np.arange(start, hi + 0.5 * step, step)


def _thin(x: np.ndarray, y: np.ndarray):
    if x.size <= MAX_POINTS:
        return x, y
    idx = np.unique(np.linspace(0, x.size - 1, MAX_POINTS).astype(int))
    return x[idx], y[idx]


class Figure:
    """One panel with linear axes.  Data coordinates map into a fixed frame."""

    def __init__(self, xlim, ylim, title: str = "", xlabel: str = "", ylabel: str = "",
                 width: int = 640, height: int = 400, equal: bool = False):
        self.w, self.h = width, height
        self.left, self.right, self.top, self.bottom = 70, 20, 36, 50
        x0, x1 = map(float, xlim)
        y0, y1 = map(float, ylim)
        if x1 <= x0:
            x0, x1 = x0 - 0.5, x0 + 0.5
        if y1 <= y0:
            y0, y1 = y0 - 0.5, y0 + 0.5
        if equal:
            pw = width - self.left - self.right
            ph = height - self.top - self.bottom
            scale = min(pw / (x1 - x0), ph / (y1 - y0))
            self.right = width - self.left - scale * (x1 - x0)
            self.bottom = height - self.top - scale * (y1 - y0)
        self.xlim, self.ylim = (x0, x1), (y0, y1)
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel
        self.items: list[str] = []
        self.legend: list[tuple[str, str, str]] = []

    def px(self, x):
        x0, x1 = self.xlim
        return self.left + (np.asarray(x, float) - x0) / (x1 - x0) * (self.w - self.left - self.right)

    def py(self, y):
        y0, y1 = self.ylim
        return self.h - self.bottom - (np.asarray(y, float) - y0) / (y1 - y0) * (
            self.h - self.top - self.bottom)

    def line(self, x, y, color="#000", width=1.5, dash: str | None = None, label: str | None = None):
        x, y = _thin(np.asarray(x, float), np.asarray(y, float))
        ok = np.isfinite(x) & np.isfinite(y)
        if ok.sum() == 0:
            return
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(self.px(x[ok]), self.py(y[ok])))
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.items.append(f'<polyline fill="none" stroke="{color}" stroke-width="{width}"'
                          f'{extra} points="{pts}"/>')
        if label:
            self.legend.append((label, color, dash or ""))

    def hline(self, y, color="#444", dash="6,4", label=None):
        self.line(self.xlim, [y, y], color=color, width=1.0, dash=dash, label=label)

    def marker(self, x, y, color="#000", r=3.0):
        self.items.append(f'<circle cx="{float(self.px(x)):.2f}" cy="{float(self.py(y)):.2f}" '
                          f'r="{r}" fill="{color}"/>')

    def _axes(self) -> list[str]:
        L, R = self.left, self.w - self.right
        T, B = self.top, self.h - self.bottom
        out = [f'<rect x="{L}" y="{T}" width="{R - L:.2f}" height="{B - T:.2f}" '
               f'fill="none" stroke="#000" stroke-width="1"/>']
        for v in _nice_ticks(*self.xlim):
            p = float(self.px(v))
            out.append(f'<line x1="{p:.2f}" y1="{B:.2f}" x2="{p:.2f}" y2="{B + 5:.2f}" stroke="#000"/>')
            out.append(f'<text x="{p:.2f}" y="{B + 18:.2f}" text-anchor="middle" '
                       f'font-size="11">{v:g}</text>')
        for v in _nice_ticks(*self.ylim):
            p = float(self.py(v))
            out.append(f'<line x1="{L - 5}" y1="{p:.2f}" x2="{L}" y2="{p:.2f}" stroke="#000"/>')
            out.append(f'<text x="{L - 8}" y="{p + 4:.2f}" text-anchor="end" '
                       f'font-size="11">{v:g}</text>')
        if self.title:
            out.append(f'<text x="{self.w / 2:.1f}" y="20" text-anchor="middle" '
                       f'font-size="14">{escape(self.title)}</text>')
        if self.xlabel:
            out.append(f'<text x="{(L + R) / 2:.1f}" y="{self.h - 12}" text-anchor="middle" '
                       f'font-size="12">{escape(self.xlabel)}</text>')
        if self.ylabel:
            cy = (T + B) / 2
            out.append(f'<text x="16" y="{cy:.1f}" text-anchor="middle" font-size="12" '
                       f'transform="rotate(-90 16 {cy:.1f})">{escape(self.ylabel)}</text>')
        for j, (label, color, dash) in enumerate(self.legend):
            y = T + 14 + 16 * j
            d = f' stroke-dasharray="{dash}"' if dash else ""
            out.append(f'<line x1="{R - 150:.1f}" y1="{y}" x2="{R - 125:.1f}" y2="{y}" '
                       f'stroke="{color}" stroke-width="2"{d}/>')
            out.append(f'<text x="{R - 120:.1f}" y="{y + 4}" font-size="11">{escape(label)}</text>')
        return out

    def svg(self) -> str:
        clip = (f'<clipPath id="frame"><rect x="{self.left}" y="{self.top}" '
                f'width="{self.w - self.left - self.right:.2f}" '
                f'height="{self.h - self.top - self.bottom:.2f}"/></clipPath>')
        body = "\n".join(self.items)
        axes = "\n".join(self._axes())
        return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.w}" height="{self.h}" '
                f'viewBox="0 0 {self.w} {self.h}">\n'
                f'<rect width="100%" height="100%" fill="#fff"/>\n<defs>{clip}</defs>\n'
                f'<g clip-path="url(#frame)">\n{body}\n</g>\n{axes}\n</svg>\n')

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.svg(), encoding="utf-8")
        return path


def _span(*arrays, pad: float = 0.05):
    vals = np.concatenate([np.ravel(a) for a in arrays if np.size(a)]) if arrays else np.zeros(0)
    vals = vals[np.isfinite(vals)] if vals.size else vals
    if vals.size == 0:
        return 0.0, 1.0
    lo, hi = float(vals.min()), float(vals.max())
    d = (hi - lo) * pad or 0.5
    return lo - d, hi + d


def energy_figure(tr: TraceTable, e_min: float | None = None, e_chg: float | None = None) -> Figure:
    E = tr.robot("E")
    bounds = [v for v in (e_min, e_chg) if v is not None]
    fig = Figure(_span(tr.t, pad=0.0), _span(E, np.array(bounds)), "Energy", "t", "E")
    for i in range(tr.n_robots):
        fig.line(tr.t, E[:, i], PALETTE[i % len(PALETTE)], 1.2, label=f"robot {i}")
    if e_min is not None:
        fig.hline(e_min, label="E_min")
    if e_chg is not None:
        fig.hline(e_chg, dash="2,3", label="E_chg")
    return fig


def cost_figure(tr: TraceTable) -> Figure:
    fig = Figure(_span(tr.t, pad=0.0), _span(tr.metric), "Task metric", "t", tr.metric_name)
    fig.line(tr.t, tr.metric, PALETTE[0], 1.5)
    return fig


def deviation_figure(traces: Sequence[TraceTable], labels: Sequence[str] | None = None) -> Figure:
    labels = list(labels or [f"trace {j}" for j in range(len(traces))])
    fig = Figure(_span(*[tr.t for tr in traces], pad=0.0), _span(*[tr.C for tr in traces]),
                 "Cumulative deviation", "t", "C(t)")
    for j, tr in enumerate(traces):
        fig.line(tr.t, tr.C, PALETTE[j % len(PALETTE)], 1.8, label=labels[j])
    return fig


def field_contours(field, lower, upper, t: float, level: float, resolution: int = 120):
    """Polylines of ``I(., t) = level`` over the workspace box."""
    import contourpy

    xs = np.linspace(lower[0], upper[0], resolution)
    ys = np.linspace(lower[1], upper[1], resolution)
    gx, gy = np.meshgrid(xs, ys)
    I = field.evaluate(np.column_stack([gx.ravel(), gy.ravel()]), t)[0].reshape(gx.shape)
    gen = contourpy.contour_generator(gx, gy, I)
    return gen.lines(level)


def trajectory_figure(tr: TraceTable, field=None, workspace=None, level: float | None = None,
                      t_field: float | None = None) -> Figure:
    X1, X2 = tr.robot("x1"), tr.robot("x2")
    if workspace is not None:
        xlim = (workspace.lower[0], workspace.upper[0])
        ylim = (workspace.lower[1], workspace.upper[1])
    else:
        xlim, ylim = _span(X1), _span(X2)
    fig = Figure(xlim, ylim, "Trajectories", "x1", "x2", width=600, height=460, equal=True)
    if field is not None and workspace is not None and level is not None:
        when = float(tr.t[-1]) if t_field is None else t_field
        for seg in field_contours(field, workspace.lower, workspace.upper, when, level):
            fig.line(seg[:, 0], seg[:, 1], "#b8860b", 1.0, dash="4,3")
    for i in range(tr.n_robots):
        c = PALETTE[i % len(PALETTE)]
        fig.line(X1[:, i], X2[:, i], c, 1.0, label=f"robot {i}")
        fig.marker(X1[-1, i], X2[-1, i], c)
    return fig
