"""Minimal deterministic SVG 1.1 writer for scatter and line charts.

Coordinates are written with fixed precision so identical data produce
byte-identical files. Nothing external is referenced.
"""
import math
from xml.sax.saxutils import escape, quoteattr

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _f(v):
    return f"{v:.2f}"


def nice_limits(lo, hi, pad=0.05):
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError("limits must be finite")
    if hi <= lo:
        lo, hi = lo - 0.5, hi + 0.5
    span = hi - lo
    return lo - pad * span, hi + pad * span


def _ticks(lo, hi, count=5):
    step = (hi - lo) / count
    mag = 10.0 ** math.floor(math.log10(step))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= step), default=10 * mag)
    first = math.ceil(lo / step) * step
    out = []
    t = first
    while t <= hi + 1e-12 * step:
        out.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return out


class Panel:
    """A plotting area mapping data units linearly onto a pixel viewport."""

    def __init__(self, x, y, width, height, xlim, ylim, *, title="", xlabel="", ylabel=""):
        self.x, self.y, self.width, self.height = x, y, width, height
        self.xlim, self.ylim = xlim, ylim
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel
        self.items = []

    def px(self, u, v):
        (x0, x1), (y0, y1) = self.xlim, self.ylim
        return (self.x + (u - x0) / (x1 - x0) * self.width,
                self.y + self.height - (v - y0) / (y1 - y0) * self.height)

    def scatter(self, points, color, radius=1.2, opacity=0.5):
        dots = "".join(
            f'<circle cx="{_f(a)}" cy="{_f(b)}" r="{radius}"/>'
            for a, b in (self.px(u, v) for u, v in points))
        self.items.append(f'<g fill="{color}" fill-opacity="{opacity}">{dots}</g>')

    def line(self, points, color, *, width=1.5, dash=None, closed=False):
        coords = " ".join(f"{_f(a)},{_f(b)}" for a, b in (self.px(u, v) for u, v in points))
        tag = "polygon" if closed else "polyline"
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        self.items.append(f'<{tag} points="{coords}" fill="none" stroke="{color}" '
                          f'stroke-width="{width}"{dash_attr}/>')

    def markers(self, points, color, size=3.0):
        for u, v in points:
            a, b = self.px(u, v)
            self.items.append(f'<rect x="{_f(a - size)}" y="{_f(b - size)}" width="{_f(2 * size)}" '
                              f'height="{_f(2 * size)}" fill="{color}"/>')

    def render(self, tick_format="{:g}"):
        out = [f'<rect x="{_f(self.x)}" y="{_f(self.y)}" width="{_f(self.width)}" '
               f'height="{_f(self.height)}" fill="white" stroke="black"/>']
        bottom = self.y + self.height
        for t in _ticks(*self.xlim):
            a, _ = self.px(t, self.ylim[0])
            out.append(f'<line x1="{_f(a)}" y1="{_f(bottom)}" x2="{_f(a)}" y2="{_f(bottom + 4)}" stroke="black"/>')
            out.append(f'<text x="{_f(a)}" y="{_f(bottom + 16)}" text-anchor="middle">'
                       f'{escape(tick_format.format(t))}</text>')
        for t in _ticks(*self.ylim):
            _, b = self.px(self.xlim[0], t)
            out.append(f'<line x1="{_f(self.x - 4)}" y1="{_f(b)}" x2="{_f(self.x)}" y2="{_f(b)}" stroke="black"/>')
            out.append(f'<text x="{_f(self.x - 6)}" y="{_f(b + 4)}" text-anchor="end">'
                       f'{escape(tick_format.format(t))}</text>')
        clip = f"clip{int(self.x)}_{int(self.y)}"
        out.append(f'<clipPath id="{clip}"><rect x="{_f(self.x)}" y="{_f(self.y)}" '
                   f'width="{_f(self.width)}" height="{_f(self.height)}"/></clipPath>')
        out.append(f'<g clip-path="url(#{clip})">' + "".join(self.items) + "</g>")
        if self.title:
            out.append(f'<text x="{_f(self.x + self.width / 2)}" y="{_f(self.y - 8)}" '
                       f'text-anchor="middle">{escape(self.title)}</text>')
        if self.xlabel:
            out.append(f'<text x="{_f(self.x + self.width / 2)}" y="{_f(bottom + 34)}" '
                       f'text-anchor="middle">{escape(self.xlabel)}</text>')
        if self.ylabel:
            cx, cy = self.x - 44, self.y + self.height / 2
            out.append(f'<text x="{_f(cx)}" y="{_f(cy)}" text-anchor="middle" '
                       f'transform="rotate(-90 {_f(cx)} {_f(cy)})">{escape(self.ylabel)}</text>')
        return "\n".join(out)


class Figure:
    def __init__(self, width, height):
        self.width, self.height = width, height
        self.panels = []
        self.extras = []

    def add_panel(self, panel):
        self.panels.append(panel)
        return panel

    def legend(self, x, y, entries):
        """``entries`` is a list of ``(label, color, dash)``."""
        for k, (label, color, dash) in enumerate(entries):
            yy = y + 16 * k
            dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
            self.extras.append(f'<line x1="{_f(x)}" y1="{_f(yy)}" x2="{_f(x + 20)}" y2="{_f(yy)}" '
                               f'stroke="{color}" stroke-width="2"{dash_attr}/>')
            self.extras.append(f'<text x="{_f(x + 26)}" y="{_f(yy + 4)}">{escape(label)}</text>')

    def to_string(self, tick_format="{:g}"):
        head = ('<?xml version="1.0" encoding="UTF-8" standalone="no"?>\n'
                f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{self.width}" '
                f'height="{self.height}" viewBox="0 0 {self.width} {self.height}" '
                f'font-family={quoteattr("sans-serif")} font-size="11">')
        body = [p.render(tick_format) for p in self.panels] + self.extras
        return head + "\n" + "\n".join(body) + "\n</svg>\n"

    def save(self, path, tick_format="{:g}"):
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(self.to_string(tick_format))
