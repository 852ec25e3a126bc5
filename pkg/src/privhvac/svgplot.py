"""Minimal deterministic SVG line plots.

Hand-rolled so that output bytes depend only on the data: fixed canvas,
fixed palette, shortest-stable float formatting, no timestamps or ids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

_PALETTE = ("#1f6fb4", "#d35400", "#2e8b57", "#8e44ad", "#c0392b", "#555555")
_W, _H = 640, 480
_ML, _MR, _MT, _MB = 70, 20, 40, 55


@dataclass(frozen=True)
class PlotSeries:
    """One labelled line with optional symmetric error bars."""

    label: str
    x: np.ndarray
    y: np.ndarray
    err: np.ndarray | None = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))
        if self.err is not None:
            object.__setattr__(self, "err", np.asarray(self.err, dtype=float))
        if self.x.shape != self.y.shape or self.x.ndim != 1:
            raise ValueError("x and y must be matching 1-D arrays")
        if self.err is not None and self.err.shape != self.x.shape:
            raise ValueError("err must match x")


def _num(v: float) -> str:
    return format(float(v), ".6g")


def _coord(v: float) -> str:
    return format(float(v), ".2f")


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if not math.isfinite(lo) or not math.isfinite(hi):
        return []
    if hi <= lo:
        hi = lo + (abs(lo) if lo != 0 else 1.0)
    span = hi - lo
    raw = span / max(n - 1, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return ticks


def _log_ticks(lo: float, hi: float) -> list[float]:
    ticks = [10.0 ** e for e in range(math.floor(math.log10(lo)),
                                      math.ceil(math.log10(hi)) + 1)]
    return [t for t in ticks if lo / 1.001 <= t <= hi * 1.001] or [lo, hi]


def line_plot(path, series, *, title: str = "", xlabel: str = "",
              ylabel: str = "", logx: bool = False):
    """Write an SVG line chart; NaN points are dropped per series."""
    series = list(series)
    xs, ys = [], []
    for s in series:
        keep = np.isfinite(s.x) & np.isfinite(s.y)
        if logx:
            keep &= s.x > 0
        xs.append(s.x[keep])
        ys.append(s.y[keep])
        if s.err is not None:
            keep_err = np.isfinite(s.err[keep])
            ys.append(s.y[keep][keep_err] + s.err[keep][keep_err])
            ys.append(s.y[keep][keep_err] - s.err[keep][keep_err])
    all_x = np.concatenate(xs) if xs else np.array([])
    all_y = np.concatenate(ys) if ys else np.array([])
    if all_x.size == 0:
        raise ValueError("nothing to plot")

    x_lo, x_hi = float(all_x.min()), float(all_x.max())
    y_lo, y_hi = float(all_y.min()), float(all_y.max())
    if y_hi <= y_lo:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad
    if logx:
        if x_hi <= x_lo:
            x_lo, x_hi = x_lo / 2, x_hi * 2
        fx_lo, fx_hi = math.log10(x_lo), math.log10(x_hi)
        x_ticks = _log_ticks(x_lo, x_hi)
        to_fx = lambda v: math.log10(v)
    else:
        if x_hi <= x_lo:
            x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
        xpad = 0.02 * (x_hi - x_lo)
        x_lo, x_hi = x_lo - xpad, x_hi + xpad
        fx_lo, fx_hi = x_lo, x_hi
        x_ticks = _nice_ticks(x_lo, x_hi)
        to_fx = lambda v: v
    y_ticks = _nice_ticks(y_lo, y_hi)

    px = lambda v: _ML + (to_fx(v) - fx_lo) / (fx_hi - fx_lo) * (_W - _ML - _MR)
    py = lambda v: _H - _MB - (v - y_lo) / (y_hi - y_lo) * (_H - _MT - _MB)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" '
           f'height="{_H}" viewBox="0 0 {_W} {_H}">',
           f'<rect width="{_W}" height="{_H}" fill="white"/>',
           '<g font-family="sans-serif" font-size="12" fill="#222">']
    if title:
        out.append(f'<text x="{_W // 2}" y="22" text-anchor="middle" '
                   f'font-size="15">{_esc(title)}</text>')
    # frame
    out.append(f'<rect x="{_ML}" y="{_MT}" width="{_W - _ML - _MR}" '
               f'height="{_H - _MT - _MB}" fill="none" stroke="#222"/>')
    for t in x_ticks:
        x = px(t)
        out.append(f'<line x1="{_coord(x)}" y1="{_H - _MB}" x2="{_coord(x)}" '
                   f'y2="{_H - _MB + 5}" stroke="#222"/>')
        out.append(f'<text x="{_coord(x)}" y="{_H - _MB + 18}" '
                   f'text-anchor="middle">{_num(t)}</text>')
    for t in y_ticks:
        y = py(t)
        out.append(f'<line x1="{_ML - 5}" y1="{_coord(y)}" x2="{_ML}" '
                   f'y2="{_coord(y)}" stroke="#222"/>')
        out.append(f'<text x="{_ML - 8}" y="{_coord(y + 4)}" '
                   f'text-anchor="end">{_num(t)}</text>')
        out.append(f'<line x1="{_ML}" y1="{_coord(y)}" x2="{_W - _MR}" '
                   f'y2="{_coord(y)}" stroke="#ddd"/>')
    if xlabel:
        out.append(f'<text x="{_W // 2}" y="{_H - 12}" '
                   f'text-anchor="middle">{_esc(xlabel)}</text>')
    if ylabel:
        out.append(f'<text x="18" y="{_H // 2}" text-anchor="middle" '
                   f'transform="rotate(-90 18 {_H // 2})">{_esc(ylabel)}</text>')

    for idx, s in enumerate(series):
        color = _PALETTE[idx % len(_PALETTE)]
        keep = np.isfinite(s.x) & np.isfinite(s.y)
        if logx:
            keep &= s.x > 0
        sx, sy = s.x[keep], s.y[keep]
        serr = s.err[keep] if s.err is not None else None
        if sx.size == 0:
            continue
        pts = " ".join(f"{_coord(px(a))},{_coord(py(b))}"
                       for a, b in zip(sx, sy))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                   'stroke-width="1.5"/>')
        for j, (a, b) in enumerate(zip(sx, sy)):
            if serr is not None and math.isfinite(serr[j]) and serr[j] > 0:
                out.append(f'<line x1="{_coord(px(a))}" y1="{_coord(py(b - serr[j]))}" '
                           f'x2="{_coord(px(a))}" y2="{_coord(py(b + serr[j]))}" '
                           f'stroke="{color}"/>')
            out.append(f'<circle cx="{_coord(px(a))}" cy="{_coord(py(b))}" '
                       f'r="3" fill="{color}"/>')

    ly = _MT + 14
    for idx, s in enumerate(series):
        color = _PALETTE[idx % len(_PALETTE)]
        lx = _W - _MR - 150
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 24}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="1.5"/>')
        out.append(f'<text x="{lx + 30}" y="{ly}">{_esc(s.label)}</text>')
        ly += 16
    out.append("</g></svg>")
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8", newline="\n")


def plot_tradeoff(dir_path, records):
    """Standard pair of sweep plots; returns the file paths written."""
    dir_path = Path(dir_path)
    feas = [r for r in records if r.feasible]
    if not feas:
        return []
    delta = np.array([r.delta for r in feas])
    mi = np.array([r.mi_bits for r in feas])
    acc = np.array([r.accuracy_mean for r in feas])
    acc_sd = np.array([r.accuracy_std for r in feas])
    cost = np.array([r.realized_cost_diff_mean for r in feas])
    cost_sd = np.array([r.realized_cost_diff_std for r in feas])

    p1 = dir_path / "privacy_vs_budget.svg"
    line_plot(p1, [PlotSeries("information leakage (bits)", delta, mi),
                   PlotSeries("attack accuracy", delta, acc, acc_sd)],
              title="Privacy against the cost budget",
              xlabel="cost budget (delta)", ylabel="bits / accuracy", logx=True)
    p2 = dir_path / "utility_vs_privacy.svg"
    line_plot(p2, [PlotSeries("realized cost increase", mi, cost, cost_sd)],
              title="Control cost against information leakage",
              xlabel="information leakage (bits)", ylabel="cost increase ($)")
    return [p1, p2]


def _esc(s: str) -> str:
    return (s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;"))
