"""Dependency-free SVG charts for traces and sweeps.

Output is plain text with fixed number formatting, so identical input gives
byte-identical files.
"""
from __future__ import annotations

from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .engine import RunTrace
from .sweep import SweepResult

__all__ = ["line_chart", "bar_chart", "heatmap", "emit_plots"]

W, H = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 40, 50
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def _num(v: float) -> str:
    return f"{v:.4g}"


def _px(v: float) -> str:
    return f"{v:.2f}"


def _span(lo: float, hi: float) -> tuple[float, float]:
    if not np.isfinite(lo) or not np.isfinite(hi):
        return 0.0, 1.0
    if hi == lo:
        pad = abs(lo) * 0.05 or 0.5
        return lo - pad, hi + pad
    return lo, hi


class _Frame:
    def __init__(self, xr, yr):
        self.x0, self.x1 = _span(*xr)
        self.y0, self.y1 = _span(*yr)

    def x(self, v):
        return LEFT + (v - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)

    def y(self, v):
        return H - BOTTOM - (v - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)


def _doc(body: list[str], title: str, xlabel: str, ylabel: str) -> str:
    head = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2}" y="22" text-anchor="middle" font-family="sans-serif" font-size="15">{escape(title)}</text>',
        f'<text x="{W / 2}" y="{H - 10}" text-anchor="middle" font-family="sans-serif" font-size="12">{escape(xlabel)}</text>',
        f'<text x="16" y="{H / 2}" text-anchor="middle" font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {H / 2})">{escape(ylabel)}</text>',
    ]
    return "\n".join(head + body + ["</svg>"]) + "\n"


def _axes(fr: _Frame, xticks: Sequence[float] | None = None) -> list[str]:
    out = [
        f'<line x1="{LEFT}" y1="{H - BOTTOM}" x2="{W - RIGHT}" y2="{H - BOTTOM}" stroke="black"/>',
        f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{H - BOTTOM}" stroke="black"/>',
    ]
    for v in np.linspace(fr.y0, fr.y1, 5):
        y = _px(fr.y(v))
        out.append(f'<line x1="{LEFT - 4}" y1="{y}" x2="{LEFT}" y2="{y}" stroke="black"/>')
        out.append(
            f'<text x="{LEFT - 6}" y="{y}" text-anchor="end" dominant-baseline="middle" '
            f'font-family="sans-serif" font-size="10">{_num(v)}</text>'
        )
    ticks = np.linspace(fr.x0, fr.x1, 5) if xticks is None else xticks
    for v in ticks:
        x = _px(fr.x(v))
        out.append(f'<line x1="{x}" y1="{H - BOTTOM}" x2="{x}" y2="{H - BOTTOM + 4}" stroke="black"/>')
        out.append(
            f'<text x="{x}" y="{H - BOTTOM + 16}" text-anchor="middle" font-family="sans-serif" '
            f'font-size="10">{_num(v)}</text>'
        )
    return out


def line_chart(series, title: str, xlabel: str, ylabel: str) -> str:
    """``series`` is a list of ``(label, xs, ys)``."""
    series = [(lbl, np.asarray(xs, float), np.asarray(ys, float)) for lbl, xs, ys in series]
    if not series or all(len(xs) == 0 for _, xs, _ in series):
        raise ValueError("nothing to plot")
    allx = np.concatenate([xs for _, xs, _ in series])
    ally = np.concatenate([ys for _, _, ys in series])
    fr = _Frame((allx.min(), allx.max()), (ally.min(), ally.max()))
    body = _axes(fr)
    for k, (label, xs, ys) in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{_px(fr.x(a))},{_px(fr.y(b))}" for a, b in zip(xs, ys))
        body.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        if label:
            body.append(
                f'<text x="{W - RIGHT - 4}" y="{TOP + 12 + 14 * k}" text-anchor="end" fill="{color}" '
                f'font-family="sans-serif" font-size="11">{escape(label)}</text>'
            )
    return _doc(body, title, xlabel, ylabel)


def bar_chart(labels: Sequence[float], values: Sequence[float], title: str, xlabel: str, ylabel: str) -> str:
    values = np.asarray(values, float)
    if values.size == 0:
        raise ValueError("nothing to plot")
    top = float(np.nanmax(values)) if np.any(np.isfinite(values)) else 1.0
    fr = _Frame((0, len(values)), (0.0, max(top, 0.0) or 1.0))
    body = [
        f'<line x1="{LEFT}" y1="{H - BOTTOM}" x2="{W - RIGHT}" y2="{H - BOTTOM}" stroke="black"/>',
        f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{H - BOTTOM}" stroke="black"/>',
    ]
    for v in np.linspace(fr.y0, fr.y1, 5):
        body.append(
            f'<text x="{LEFT - 6}" y="{_px(fr.y(v))}" text-anchor="end" dominant-baseline="middle" '
            f'font-family="sans-serif" font-size="10">{_num(v)}</text>'
        )
    width = (fr.x(1) - fr.x(0)) * 0.7
    for k, (lbl, v) in enumerate(zip(labels, values)):
        cx = fr.x(k + 0.5)
        if np.isfinite(v):
            y = fr.y(v)
            body.append(
                f'<rect x="{_px(cx - width / 2)}" y="{_px(y)}" width="{_px(width)}" '
                f'height="{_px(H - BOTTOM - y)}" fill="{PALETTE[0]}"/>'
            )
        body.append(
            f'<text x="{_px(cx)}" y="{H - BOTTOM + 16}" text-anchor="middle" font-family="sans-serif" '
            f'font-size="10">{_num(float(lbl))}</text>'
        )
    return _doc(body, title, xlabel, ylabel)


def heatmap(xvals, yvals, grid, title: str, xlabel: str, ylabel: str) -> str:
    """Grayscale cells; ``grid[i, j]`` sits at ``(xvals[i], yvals[j])``, darker is larger."""
    grid = np.asarray(grid, float)
    if grid.size == 0:
        raise ValueError("nothing to plot")
    finite = grid[np.isfinite(grid)]
    lo, hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    nx, ny = grid.shape
    cw = (W - LEFT - RIGHT) / nx
    ch = (H - TOP - BOTTOM) / ny
    body = []
    for i in range(nx):
        for j in range(ny):
            v = grid[i, j]
            if np.isfinite(v):
                level = 0.0 if hi == lo else (v - lo) / (hi - lo)
                g = int(round(255 * (1 - level)))
                fill = f"rgb({g},{g},{g})"
            else:
                fill = "rgb(255,200,200)"
            x = LEFT + i * cw
            y = H - BOTTOM - (j + 1) * ch
            body.append(
                f'<rect x="{_px(x)}" y="{_px(y)}" width="{_px(cw)}" height="{_px(ch)}" fill="{fill}">'
                f"<title>{_num(float(xvals[i]))}, {_num(float(yvals[j]))}: {_num(float(v))}</title></rect>"
            )
    for i, xv in enumerate(xvals):
        body.append(
            f'<text x="{_px(LEFT + (i + 0.5) * cw)}" y="{H - BOTTOM + 16}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="10">{_num(float(xv))}</text>'
        )
    for j, yv in enumerate(yvals):
        body.append(
            f'<text x="{LEFT - 6}" y="{_px(H - BOTTOM - (j + 0.5) * ch)}" text-anchor="end" '
            f'dominant-baseline="middle" font-family="sans-serif" font-size="10">{_num(float(yv))}</text>'
        )
    return _doc(body, title, xlabel, ylabel)


def _write(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


def _trace_plots(traces: Sequence[RunTrace], out: Path, stem: str, label: str) -> list[Path]:
    ng = [(f"rep {k}" if len(traces) > 1 else "", tr.column("t"), tr.n_actual) for k, tr in enumerate(traces) if len(tr)]
    err = [(f"rep {k}" if len(traces) > 1 else "", tr.column("t"), tr.errors) for k, tr in enumerate(traces) if len(tr)]
    if not ng:
        return []
    suffix = f" ({label})" if label else ""
    return [
        _write(out / f"ng{stem}.svg", line_chart(ng, f"Neuron growth{suffix}", "step t", "N_actual")),
        _write(out / f"error{stem}.svg", line_chart(err, f"Regulator error{suffix}", "step t", "E")),
    ]


def emit_plots(result, out_dir) -> list[Path]:
    """Write SVGs for a :class:`RunTrace` or a :class:`SweepResult`.

    A trace gives an NG line and an error line. A single-axis sweep gives
    those two per axis point plus a mean-NG bar chart. A two-axis sweep
    gives one mean-NG heatmap.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create plot directory {out}: {exc}") from exc
    if isinstance(result, RunTrace):
        if not len(result):
            raise ValueError("empty trace")
        return _trace_plots([result], out, "", "")
    if not isinstance(result, SweepResult):
        raise TypeError(f"cannot plot {type(result).__name__}")
    if not result.cells:
        raise ValueError("empty sweep")
    name1 = result.spec.axis1[0]
    if result.two_axis:
        name2, vals2 = result.spec.axis2
        svg = heatmap(
            result.spec.axis1[1], vals2, result.grid("mean_ng"), f"Mean NG over {name1} x {name2}", name1, name2
        )
        return [_write(out / "mean_ng_heatmap.svg", svg)]
    paths: list[Path] = []
    for c in result.cells:
        paths += _trace_plots(c.traces, out, f"_{name1}_{c.i:02d}", f"{name1}={_num(c.axis1_value)}")
    bars = bar_chart(
        result.spec.axis1[1], [c.mean_ng for c in result.cells], f"Mean NG per {name1}", name1, "mean N_actual"
    )
    paths.append(_write(out / "mean_ng_bar.svg", bars))
    return paths
