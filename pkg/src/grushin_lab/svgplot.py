"""Minimal SVG line plots: one or more series plus optional horizontal reference lines."""

from __future__ import annotations

from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


@dataclass
class Series:
    label: str
    x: list
    y: list


@dataclass
class LinePlot:
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    series: list = field(default_factory=list)
    hlines: list = field(default_factory=list)  # (label, y)
    width: int = 640
    height: int = 420

    def add(self, label, x, y) -> "LinePlot":
        if len(x) != len(y):
            raise ValueError("x and y must have the same length")
        self.series.append(Series(label, [float(v) for v in x], [float(v) for v in y]))
        return self

    def hline(self, label, y) -> "LinePlot":
        self.hlines.append((label, float(y)))
        return self

    def _ranges(self):
        xs = [v for s in self.series for v in s.x]
        ys = [v for s in self.series for v in s.y] + [y for _, y in self.hlines]
        if not xs:
            xs = [0.0, 1.0]
        if not ys:
            ys = [0.0, 1.0]
        x0, x1 = min(xs), max(xs)
        y0, y1 = min(ys), max(ys)
        if x1 == x0:
            x0, x1 = x0 - 0.5, x1 + 0.5
        if y1 == y0:
            y0, y1 = y0 - 0.5, y1 + 0.5
        pad = 0.05 * (y1 - y0)
        return x0, x1, y0 - pad, y1 + pad

    def to_svg(self) -> str:
        W, H = self.width, self.height
        ml, mr, mt, mb = 70, 20, 40, 50
        x0, x1, y0, y1 = self._ranges()

        def px(x):
            return ml + (x - x0) / (x1 - x0) * (W - ml - mr)

        def py(y):
            return H - mb - (y - y0) / (y1 - y0) * (H - mt - mb)

        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
            f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
            f'<line x1="{ml}" y1="{H - mb}" x2="{W - mr}" y2="{H - mb}" stroke="black"/>',
            f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{H - mb}" stroke="black"/>',
        ]
        for t in np.linspace(x0, x1, 5):
            out.append(f'<text x="{px(t):.2f}" y="{H - mb + 18}" font-size="11" text-anchor="middle">{t:.4g}</text>')
        for t in np.linspace(y0, y1, 5):
            out.append(f'<text x="{ml - 6}" y="{py(t) + 4:.2f}" font-size="11" text-anchor="end">{t:.4g}</text>')
        if self.title:
            out.append(f'<text x="{W / 2}" y="22" font-size="14" text-anchor="middle">{escape(self.title)}</text>')
        if self.xlabel:
            out.append(f'<text x="{W / 2}" y="{H - 10}" font-size="12" text-anchor="middle">{escape(self.xlabel)}</text>')
        if self.ylabel:
            out.append(
                f'<text x="16" y="{H / 2}" font-size="12" text-anchor="middle" '
                f'transform="rotate(-90 16 {H / 2})">{escape(self.ylabel)}</text>'
            )
        for label, y in self.hlines:
            out.append(
                f'<line x1="{ml}" y1="{py(y):.2f}" x2="{W - mr}" y2="{py(y):.2f}" '
                f'stroke="gray" stroke-dasharray="6,4"/>'
            )
            out.append(f'<text x="{W - mr - 4}" y="{py(y) - 4:.2f}" font-size="11" text-anchor="end">{escape(label)}</text>')
        for i, s in enumerate(self.series):
            c = COLORS[i % len(COLORS)]
            pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(s.x, s.y))
            out.append(f'<polyline points="{pts}" fill="none" stroke="{c}" stroke-width="2"/>')
            for x, y in zip(s.x, s.y):
                out.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="3" fill="{c}"/>')
            out.append(f'<text x="{ml + 10}" y="{mt + 14 * (i + 1)}" font-size="11" fill="{c}">{escape(s.label)}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_svg())
