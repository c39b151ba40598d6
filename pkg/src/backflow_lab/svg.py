"""Tiny SVG writer for line plots and density maps (no plotting dependency)."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"]


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if not hi > lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10.0 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step) * step
    return [round(first + i * step, 12) for i in range(int((hi - first) / step + 1e-9) + 1)]


class Plot:
    """One set of axes.  Data coordinates map linearly onto the inner box."""

    def __init__(self, xlim, ylim, width=640, height=420, title="", xlabel="", ylabel=""):
        if not (xlim[1] > xlim[0] and ylim[1] > ylim[0]):
            raise ValueError("degenerate plot limits")
        self.xlim, self.ylim = tuple(map(float, xlim)), tuple(map(float, ylim))
        self.w, self.h = width, height
        self.margin = (70, 20, 40, 50)  # left, right, top, bottom
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel
        self.items: list[str] = []
        self.legend: list[tuple[str, str, str]] = []

    def X(self, x):
        l, r, _, _ = self.margin
        return l + (np.asarray(x, dtype=float) - self.xlim[0]) / (self.xlim[1] - self.xlim[0]) * (self.w - l - r)

    def Y(self, y):
        _, _, t, b = self.margin
        return self.h - b - (np.asarray(y, dtype=float) - self.ylim[0]) / (self.ylim[1] - self.ylim[0]) * (self.h - t - b)

    def line(self, xs, ys, color=PALETTE[0], width=1.5, dash="", label=""):
        xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
        ok = np.isfinite(xs) & np.isfinite(ys)
        pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(self.X(xs[ok]), self.Y(ys[ok])))
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.items.append(f'<polyline fill="none" stroke="{color}" stroke-width="{width}"{extra} points="{pts}"/>')
        if label:
            self.legend.append((label, color, dash))

    def markers(self, xs, ys, color=PALETTE[0], r=2.5):
        for a, b in zip(self.X(xs), self.Y(ys)):
            if np.isfinite(a) and np.isfinite(b):
                self.items.append(f'<circle cx="{_fmt(a)}" cy="{_fmt(b)}" r="{r}" fill="{color}"/>')

    def hline(self, y, color="#888888"):
        self.line(self.xlim, [y, y], color=color, width=0.8, dash="4,3")

    def density(self, values, xlim, ylim, cmap="diverging", vmax=None):
        """values[i, j] at x index i, y index j; cells drawn as rectangles."""
        v = np.asarray(values, dtype=float)
        nx, ny = v.shape
        vmax = vmax or float(np.max(np.abs(v))) or 1.0
        xe = self.X(np.linspace(xlim[0], xlim[1], nx + 1))
        ye = self.Y(np.linspace(ylim[0], ylim[1], ny + 1))
        for i in range(nx):
            for j in range(ny):
                col = colour(v[i, j], vmax, cmap)
                self.items.append(
                    f'<rect x="{_fmt(xe[i])}" y="{_fmt(ye[j + 1])}" width="{_fmt(xe[i + 1] - xe[i] + 0.3)}" '
                    f'height="{_fmt(ye[j] - ye[j + 1] + 0.3)}" fill="{col}"/>')

    def _axes(self) -> list[str]:
        l, r, t, b = self.margin
        out = [f'<rect x="{l}" y="{t}" width="{self.w - l - r}" height="{self.h - t - b}" '
               'fill="none" stroke="black" stroke-width="1"/>']
        for xt in nice_ticks(*self.xlim):
            px = _fmt(self.X(xt))
            out.append(f'<line x1="{px}" y1="{self.h - b}" x2="{px}" y2="{self.h - b + 5}" stroke="black"/>')
            out.append(f'<text x="{px}" y="{self.h - b + 18}" font-size="11" text-anchor="middle">{_fmt(xt)}</text>')
        for yt in nice_ticks(*self.ylim):
            py = _fmt(self.Y(yt))
            out.append(f'<line x1="{l - 5}" y1="{py}" x2="{l}" y2="{py}" stroke="black"/>')
            out.append(f'<text x="{l - 8}" y="{py}" font-size="11" text-anchor="end" dy="4">{_fmt(yt)}</text>')
        if self.xlabel:
            out.append(f'<text x="{(l + self.w - r) / 2}" y="{self.h - 8}" font-size="13" '
                       f'text-anchor="middle">{escape(self.xlabel)}</text>')
        if self.ylabel:
            out.append(f'<text x="16" y="{(t + self.h - b) / 2}" font-size="13" text-anchor="middle" '
                       f'transform="rotate(-90 16 {(t + self.h - b) / 2})">{escape(self.ylabel)}</text>')
        if self.title:
            out.append(f'<text x="{self.w / 2}" y="24" font-size="14" text-anchor="middle">{escape(self.title)}</text>')
        for k, (label, color, dash) in enumerate(self.legend):
            y = t + 16 + 16 * k
            extra = f' stroke-dasharray="{dash}"' if dash else ""
            out.append(f'<line x1="{self.w - r - 150}" y1="{y}" x2="{self.w - r - 125}" y2="{y}" '
                       f'stroke="{color}" stroke-width="2"{extra}/>')
            out.append(f'<text x="{self.w - r - 120}" y="{y + 4}" font-size="11">{escape(label)}</text>')
        return out

    def render(self) -> str:
        l, r, t, b = self.margin
        clip = (f'<clipPath id="box"><rect x="{l}" y="{t}" width="{self.w - l - r}" '
                f'height="{self.h - t - b}"/></clipPath>')
        body = "\n".join(self.items)
        return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.w}" height="{self.h}" '
                f'viewBox="0 0 {self.w} {self.h}">\n<defs>{clip}</defs>\n'
                f'<rect width="100%" height="100%" fill="white"/>\n'
                f'<g clip-path="url(#box)">\n{body}\n</g>\n' + "\n".join(self._axes()) + "\n</svg>\n")

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.render())


def colour(v: float, vmax: float, cmap: str = "diverging") -> str:
    u = max(-1.0, min(1.0, v / vmax))
    if cmap == "diverging":
        # blue (negative) - white - red (positive)
        if u >= 0:
            rgb = (255, int(255 * (1 - u)), int(255 * (1 - u)))
        else:
            rgb = (int(255 * (1 + u)), int(255 * (1 + u)), 255)
    else:
        g = int(255 * (1 - abs(u)))
        rgb = (g, g, 255 - int(0.5 * (255 - g)))
    return "#%02x%02x%02x" % rgb


def padded(lo: float, hi: float, frac: float = 0.05) -> tuple[float, float]:
    if not math.isfinite(lo) or not math.isfinite(hi):
        return 0.0, 1.0
    if hi <= lo:
        return lo - 0.5 - abs(lo) * frac, hi + 0.5 + abs(hi) * frac
    pad = (hi - lo) * frac
    return lo - pad, hi + pad
