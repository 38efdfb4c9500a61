"""Deterministic standalone SVG rendering for DET curves, score distributions and ratio plots.

Every coordinate is written with two decimals, element ids are derived from
the element position, and nothing depends on time or hashing, so identical
inputs give byte-identical documents.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from ..metrics import FairnessReport
from .plotdata import DetCurvePoints, DistributionSummary, ScatterData
from .probit import probit

PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)
DASHES = (None, "5,3", "2,2", "8,3,2,3")
DET_TICKS_PERCENT = (0.1, 0.5, 1, 2, 5, 10, 20, 40)
FONT = "font-family=\"Helvetica, Arial, sans-serif\""


def _f(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


@dataclass
class Style:
    width: int = 720
    height: int = 560
    margin_left: int = 70
    margin_right: int = 190
    margin_top: int = 40
    margin_bottom: int = 60
    title: str = ""
    det_limits_percent: tuple[float, float] = (0.1, 40.0)
    panel_columns: int = 4


@dataclass
class DetSeries:
    points: DetCurvePoints
    label: str
    color: str | None = None
    dash: str | None = None
    width: float = 1.5


class _Doc:
    def __init__(self, width: int, height: int, title: str = ""):
        self.width = width
        self.height = height
        self.parts: list[str] = []
        self.defs: list[str] = []
        self._ids = 0
        if title:
            self.text(width / 2, 22, title, size=15, anchor="middle", weight="bold")

    def next_id(self, prefix: str) -> str:
        self._ids += 1
        return f"{prefix}{self._ids}"

    def add(self, element: str) -> None:
        self.parts.append(element)

    def line(self, x1, y1, x2, y2, stroke="#000", width=1.0, dash=None, extra=""):
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.add(
            f'<line x1="{_f(x1)}" y1="{_f(y1)}" x2="{_f(x2)}" y2="{_f(y2)}" '
            f'stroke="{stroke}" stroke-width="{width}"{d}{extra}/>'
        )

    def text(self, x, y, content, size=11, anchor="start", weight=None, rotate=None, fill="#000"):
        w = f' font-weight="{weight}"' if weight else ""
        r = f' transform="rotate({rotate} {_f(x)} {_f(y)})"' if rotate is not None else ""
        self.add(
            f'<text x="{_f(x)}" y="{_f(y)}" {FONT} font-size="{size}" '
            f'text-anchor="{anchor}" fill="{fill}"{w}{r}>{escape(str(content))}</text>'
        )

    def polyline(self, xs, ys, stroke, width=1.5, dash=None, clip=None, label=None):
        pts = " ".join(f"{_f(x)},{_f(y)}" for x, y in zip(xs, ys))
        d = f' stroke-dasharray="{dash}"' if dash else ""
        c = f' clip-path="url(#{clip})"' if clip else ""
        t = f"<title>{escape(label)}</title>" if label else ""
        self.add(
            f'<polyline points="{pts}" fill="none" stroke="{stroke}" '
            f'stroke-width="{width}"{d}{c}>{t}</polyline>'
        )

    def marker(self, x, y, shape, color, size=5.0, title=None, clip=None):
        c = f' clip-path="url(#{clip})"' if clip else ""
        t = f"<title>{escape(title)}</title>" if title else ""
        if shape == "triangle":
            pts = f"{_f(x)},{_f(y - size)} {_f(x - size)},{_f(y + size * 0.8)} {_f(x + size)},{_f(y + size * 0.8)}"
            self.add(f'<polygon points="{pts}" fill="{color}" stroke="#000" stroke-width="0.5"{c}>{t}</polygon>')
        elif shape == "cross":
            self.add(
                f'<path d="M{_f(x - size)},{_f(y - size)} L{_f(x + size)},{_f(y + size)} '
                f'M{_f(x - size)},{_f(y + size)} L{_f(x + size)},{_f(y - size)}" '
                f'stroke="{color}" stroke-width="2"{c}>{t}</path>'
            )
        else:
            self.add(
                f'<circle cx="{_f(x)}" cy="{_f(y)}" r="{_f(size * 0.8)}" fill="{color}" '
                f'stroke="#000" stroke-width="0.5"{c}>{t}</circle>'
            )

    def clip_rect(self, x, y, w, h) -> str:
        cid = self.next_id("clip")
        self.defs.append(
            f'<clipPath id="{cid}"><rect x="{_f(x)}" y="{_f(y)}" width="{_f(w)}" height="{_f(h)}"/></clipPath>'
        )
        return cid

    def render(self) -> str:
        head = (
            '<?xml version="1.0" encoding="UTF-8" standalone="no"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{self.width}" '
            f'height="{self.height}" viewBox="0 0 {self.width} {self.height}">\n'
            f'<rect x="0" y="0" width="{self.width}" height="{self.height}" fill="#fff"/>\n'
        )
        defs = "<defs>\n" + "\n".join(self.defs) + "\n</defs>\n" if self.defs else ""
        return head + defs + "\n".join(self.parts) + "\n</svg>\n"


def _decimate(px: np.ndarray, py: np.ndarray, cell: float = 0.5):
    """Drop consecutive points that fall into the same ``cell``-sized pixel bucket."""
    if px.shape[0] <= 2:
        return px, py
    qx = np.round(px / cell)
    qy = np.round(py / cell)
    keep = np.ones(px.shape[0], dtype=bool)
    keep[1:] = (qx[1:] != qx[:-1]) | (qy[1:] != qy[:-1])
    keep[-1] = True
    return px[keep], py[keep]


def _legend(doc: _Doc, x: float, y: float, entries) -> None:
    """``entries``: (label, color, dash, shape) tuples; shape None draws a line sample."""
    for i, (label, color, dash, shape) in enumerate(entries):
        yy = y + 16 * i
        if shape is None:
            doc.line(x, yy - 4, x + 22, yy - 4, stroke=color, width=2, dash=dash)
        else:
            doc.marker(x + 11, yy - 4, shape, color, size=4)
        doc.text(x + 28, yy, label, size=10)


def render_det(series: Sequence[DetSeries], style: Style | None = None) -> str:
    """DET plot on normal-deviate axes with percentage ticks."""
    style = style or Style(title="DET curves")
    if not series:
        raise ValueError("render_det needs at least one curve")
    lo_pct, hi_pct = style.det_limits_percent
    zmin, zmax = probit(lo_pct / 100), probit(hi_pct / 100)
    doc = _Doc(style.width, style.height, style.title)
    x0, y0 = style.margin_left, style.margin_top
    w = style.width - style.margin_left - style.margin_right
    h = style.height - style.margin_top - style.margin_bottom

    def sx(z):
        return x0 + (z - zmin) / (zmax - zmin) * w

    def sy(z):
        return y0 + h - (z - zmin) / (zmax - zmin) * h

    doc.add(f'<rect x="{_f(x0)}" y="{_f(y0)}" width="{_f(w)}" height="{_f(h)}" fill="none" stroke="#000"/>')
    for pct in DET_TICKS_PERCENT:
        if not lo_pct <= pct <= hi_pct:
            continue
        z = probit(pct / 100)
        label = f"{pct:g}"
        doc.line(sx(z), y0, sx(z), y0 + h, stroke="#ddd", width=0.8)
        doc.line(x0, sy(z), x0 + w, sy(z), stroke="#ddd", width=0.8)
        doc.text(sx(z), y0 + h + 16, label, size=10, anchor="middle")
        doc.text(x0 - 6, sy(z) + 4, label, size=10, anchor="end")
    doc.text(x0 + w / 2, y0 + h + 40, "False positive rate (%)", size=12, anchor="middle")
    doc.text(x0 - 45, y0 + h / 2, "False negative rate (%)", size=12, anchor="middle", rotate=-90)
    clip = doc.clip_rect(x0, y0, w, h)

    entries = []
    for i, s in enumerate(series):
        color = s.color or PALETTE[i % len(PALETTE)]
        px, py = _decimate(sx(s.points.x), sy(s.points.y))
        doc.polyline(px, py, color, width=s.width, dash=s.dash, clip=clip, label=s.label)
        for m in s.points.markers:
            shape = {"overall_min": "triangle", "sg_min": "cross"}.get(m.kind, "circle")
            doc.marker(sx(m.x), sy(m.y), shape, color, clip=clip, title=f"{s.label} {m.kind}: {m.label}")
        entries.append((s.label, color, s.dash, None))
    entries.append(("overall min threshold", "#444", None, "triangle"))
    entries.append(("subgroup min threshold", "#444", None, "cross"))
    entries.append(("EER", "#444", None, "circle"))
    _legend(doc, x0 + w + 16, y0 + 10, entries)
    return doc.render()


def _nice_ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    start = math.ceil(lo / step) * step
    ticks = []
    v = start
    while v <= hi + 1e-12 * step:
        ticks.append(round(v, 12))
        v += step
    return ticks


def render_distributions(
    panels: Sequence[tuple[str, Sequence[DistributionSummary]]],
    style: Style | None = None,
    reference: Sequence[DistributionSummary] = (),
) -> str:
    """Small multiples of score densities, one panel per subgroup.

    Each panel draws its nontarget (label 0) and target (label 1) KDE curves,
    or the histogram when the KDE was skipped; ``reference`` distributions
    (normally the pooled ones) are overlaid dashed in grey.
    """
    style = style or Style(title="Score distributions")
    if not panels:
        raise ValueError("render_distributions needs at least one panel")
    cols = max(1, min(style.panel_columns, len(panels)))
    rows = math.ceil(len(panels) / cols)
    pw, ph = 240, 190
    top = 40 if style.title else 10
    width = cols * pw + 20
    height = top + rows * ph + 40
    doc = _Doc(width, height, style.title)

    all_x = []
    for _, dists in list(panels) + [("", reference)]:
        for d in dists:
            all_x.extend((float(d.bin_edges[0]), float(d.bin_edges[-1])))
            if d.kde_grid is not None:
                all_x.extend((float(d.kde_grid[0]), float(d.kde_grid[-1])))
    xmin, xmax = min(all_x), max(all_x)
    if xmax == xmin:
        xmin, xmax = xmin - 1, xmax + 1

    def curve_of(d: DistributionSummary):
        if d.kde is not None:
            return d.kde_grid, d.kde
        xs = np.repeat(d.bin_edges, 2)[1:-1]
        ys = np.repeat(d.density, 2)
        return xs, ys

    label_colors = {0: "#d62728", 1: "#1f77b4"}
    for idx, (title, dists) in enumerate(panels):
        r, c = divmod(idx, cols)
        px0 = 10 + c * pw + 30
        py0 = top + r * ph + 18
        w = pw - 45
        h = ph - 70
        ymax = 0.0
        for d in list(dists) + list(reference):
            ymax = max(ymax, float(np.max(curve_of(d)[1])))
        ymax = ymax * 1.05 if ymax > 0 else 1.0

        def sx(v, px0=px0, w=w):
            return px0 + (np.asarray(v) - xmin) / (xmax - xmin) * w

        def sy(v, py0=py0, h=h, ymax=ymax):
            return py0 + h - np.asarray(v) / ymax * h

        doc.add(f'<rect x="{_f(px0)}" y="{_f(py0)}" width="{_f(w)}" height="{_f(h)}" fill="none" stroke="#000"/>')
        doc.text(px0 + w / 2, py0 - 5, title, size=11, anchor="middle", weight="bold")
        for t in _nice_ticks(xmin, xmax, 4):
            doc.line(sx(t), py0 + h, sx(t), py0 + h + 3)
            doc.text(sx(t), py0 + h + 14, f"{t:g}", size=9, anchor="middle")
        for d in reference:
            xs, ys = curve_of(d)
            doc.polyline(sx(xs), sy(ys), "#888", width=1.0, dash="4,3", label=f"overall label={d.label}")
        for d in dists:
            xs, ys = curve_of(d)
            color = label_colors.get(d.label, "#000")
            doc.polyline(sx(xs), sy(ys), color, width=1.5, label=f"{title} label={d.label} n={d.n}")
        stats = []
        for d in sorted(dists, key=lambda d: d.label):
            skew = "n/a" if d.skewness is None else f"{d.skewness:.2f}"
            stats.append(f"{'tar' if d.label == 1 else 'non'} mean {d.mean:.2f} skew {skew}")
        for j, line in enumerate(stats):
            doc.text(px0 + 2, py0 + h + 26 + 10 * j, line, size=8, fill="#444")

    doc.text(12, height - 10, "red: nontarget trials, blue: target trials, grey dashed: all trials", size=10)
    return doc.render()


def _axis_frame(doc: _Doc, x0, y0, w, h, xlo, xhi, ylo, yhi, xlabel, ylabel):
    def sx(v):
        return x0 + (v - xlo) / (xhi - xlo) * w

    def sy(v):
        return y0 + h - (v - ylo) / (yhi - ylo) * h

    doc.add(f'<rect x="{_f(x0)}" y="{_f(y0)}" width="{_f(w)}" height="{_f(h)}" fill="none" stroke="#000"/>')
    for t in _nice_ticks(xlo, xhi):
        doc.line(sx(t), y0 + h, sx(t), y0 + h + 4)
        doc.text(sx(t), y0 + h + 16, f"{t:g}", size=10, anchor="middle")
    for t in _nice_ticks(ylo, yhi):
        doc.line(x0 - 4, sy(t), x0, sy(t))
        doc.text(x0 - 6, sy(t) + 4, f"{t:g}", size=10, anchor="end")
    doc.text(x0 + w / 2, y0 + h + 40, xlabel, size=12, anchor="middle")
    doc.text(x0 - 45, y0 + h / 2, ylabel, size=12, anchor="middle", rotate=-90)
    return sx, sy


def render_scatter(data: ScatterData, style: Style | None = None) -> str:
    """Ratio of model A (x) against model B (y) per subgroup, with the identity diagonal."""
    style = style or Style(title="Detection cost ratio at the overall minimum", width=760, height=600, margin_right=230)
    if not data.points:
        raise ValueError("render_scatter needs at least one point")
    doc = _Doc(style.width, style.height, style.title)
    x0, y0 = style.margin_left, style.margin_top
    w = style.width - style.margin_left - style.margin_right
    h = style.height - style.margin_top - style.margin_bottom
    top = max(1.0, max(max(p.x, p.y) for p in data.points)) * 1.08
    sx, sy = _axis_frame(doc, x0, y0, w, h, 0.0, top, 0.0, top, f"ratio, {data.label_a}", f"ratio, {data.label_b}")
    doc.line(sx(0), sy(0), sx(top), sy(top), stroke="#888", dash="5,3")
    doc.line(sx(1), sy(0), sx(1), sy(top), stroke="#ccc")
    doc.line(sx(0), sy(1), sx(top), sy(1), stroke="#ccc")
    colors = {"above": "#1f77b4", "below": "#d62728", "on": "#444"}
    for p in data.points:
        color = colors[p.side]
        doc.marker(sx(p.x), sy(p.y), p.shape, color, title=f"{p.name}: {p.x:.4f} / {p.y:.4f}")
        doc.text(sx(p.x) + 7, sy(p.y) - 6, p.name, size=9, fill="#333")
    entries = [
        (data.legend[0] if data.legend else "above", colors["above"], None, "circle"),
        (data.legend[1] if len(data.legend) > 1 else "below", colors["below"], None, "circle"),
        ("female", "#444", None, "triangle"),
        ("male", "#444", None, "cross"),
        ("identity y = x", "#888", "5,3", None),
    ]
    _legend(doc, x0 + w + 16, y0 + 10, entries)
    if len(data.legend) > 2:
        doc.text(x0 + w + 16, y0 + 10 + 16 * len(entries), data.legend[2], size=10)
    return doc.render()


def render_ratio_chart(report: FairnessReport, style: Style | None = None) -> str:
    """Dot chart of each subgroup's ratio to the overall minimum cost, with the parity line at 1."""
    style = style or Style(
        title=f"Detection cost ratios: {report.model_name}", margin_left=130, margin_right=40, margin_top=56
    )
    rows = sorted(report.subgroups, key=lambda s: (s.ratio_overall_min, s.name))
    if not rows:
        raise ValueError("report has no subgroups")
    height = max(style.height, style.margin_top + style.margin_bottom + 22 * len(rows))
    doc = _Doc(style.width, height, style.title)
    x0, y0 = style.margin_left, style.margin_top
    w = style.width - style.margin_left - style.margin_right
    h = height - style.margin_top - style.margin_bottom
    top = max(1.0, max(max(s.ratio_overall_min, s.ratio_sg_min) for s in rows)) * 1.08

    def sx(v):
        return x0 + v / top * w

    doc.add(f'<rect x="{_f(x0)}" y="{_f(y0)}" width="{_f(w)}" height="{_f(h)}" fill="none" stroke="#000"/>')
    for t in _nice_ticks(0.0, top):
        doc.line(sx(t), y0 + h, sx(t), y0 + h + 4)
        doc.text(sx(t), y0 + h + 16, f"{t:g}", size=10, anchor="middle")
    doc.line(sx(1.0), y0, sx(1.0), y0 + h, stroke="#888", dash="5,3")
    doc.text(x0 + w / 2, y0 + h + 40, "ratio to overall minimum cost", size=12, anchor="middle")
    step = h / len(rows)
    for i, s in enumerate(reversed(rows)):
        y = y0 + step * (i + 0.5)
        color = "#d62728" if s.ratio_overall_min > 1 else "#1f77b4"
        doc.text(x0 - 8, y + 4, s.name, size=10, anchor="end")
        doc.line(x0, y, x0 + w, y, stroke="#eee")
        doc.marker(sx(s.ratio_overall_min), y, "circle", color, title=f"{s.name}: {s.ratio_overall_min:.4f}")
    doc.text(
        x0 + w, y0 - 10,
        f"fairness index: {report.fairness_index_sum_of_ratios:.2f} (sum of ratios), "
        f"{report.fairness_index_literal:.2f} (literal)",
        size=10, anchor="end",
    )
    return doc.render()


def render_svg(data, style: Style | None = None) -> str:
    """Dispatch on the plot data type."""
    if isinstance(data, ScatterData):
        return render_scatter(data, style)
    if isinstance(data, FairnessReport):
        return render_ratio_chart(data, style)
    if isinstance(data, DetSeries):
        return render_det([data], style)
    if isinstance(data, DetCurvePoints):
        return render_det([DetSeries(data, data.name or "curve")], style)
    seq = list(data)
    if seq and all(isinstance(s, DetSeries) for s in seq):
        return render_det(seq, style)
    if seq and all(isinstance(s, tuple) and len(s) == 2 for s in seq):
        return render_distributions(seq, style)
    raise TypeError(f"cannot render {type(data).__name__}")
