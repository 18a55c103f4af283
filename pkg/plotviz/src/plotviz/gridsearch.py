"""Grid-search scatter: mean CRAL against flattened observation length.

One marker per result row, x on a log scale. Rows with the local patch
disabled (l = 0) feed the whole centered map to the network; they are
drawn as black stars so the no-processing baseline stands out.
"""

from __future__ import annotations

import math

from . import svg
from .inputs import GridRow, load_grid_csv

WIDTH, HEIGHT = 560, 400
PLOT_X0, PLOT_Y0 = 70, 46
PLOT_W, PLOT_H = 430, 300

AGENT_COLOR = "#1565c0"
FONT = "Helvetica, Arial, sans-serif"


def x_range(rows: list[GridRow]) -> tuple[float, float]:
    """Decade bounds around the data; padded when it spans < 1 decade."""
    lo = math.floor(math.log10(min(r.flatten_size for r in rows)))
    hi = math.ceil(math.log10(max(r.flatten_size for r in rows)))
    if lo == hi:
        lo, hi = lo - 1, hi + 1
    return float(lo), float(hi)


def x_pos(flatten_size: float, lo: float, hi: float) -> float:
    return PLOT_X0 + (math.log10(flatten_size) - lo) / (hi - lo) * PLOT_W


def y_pos(mean_cral: float) -> float:
    # CRAL lives in [0, 1]; a fixed axis keeps runs comparable
    return PLOT_Y0 + (1.0 - mean_cral) * PLOT_H


def _tick_label(value: float) -> str:
    if value < 1000:
        return f"{value:g}"
    return f"{value / 1000:g}k"


def _star(doc: svg.Svg, cx: float, cy: float, class_="marker marker-disabled"):
    pts = []
    for k in range(10):
        ang = -math.pi / 2 + k * math.pi / 5
        rad = 6.5 if k % 2 == 0 else 2.6
        pts.append((cx + rad * math.cos(ang), cy + rad * math.sin(ang)))
    doc.polygon(pts, fill="#111111", class_=class_)


def build_gridsearch_svg(rows: list[GridRow]) -> str:
    lo, hi = x_range(rows)
    doc = svg.Svg(WIDTH, HEIGHT, comment="plotviz grid-search renderer v1")
    doc.text(PLOT_X0, 24, "Mean CRAL vs flattened observation length",
             font_family=FONT, font_size=15, font_weight="bold", fill="#111",
             class_="title")
    doc.rect(PLOT_X0, PLOT_Y0, PLOT_W, PLOT_H, fill="#ffffff", stroke="#555",
             stroke_width=1, class_="plot-bg")

    for d in range(int(lo), int(hi) + 1):
        x = x_pos(10.0 ** d, lo, hi)
        if d not in (lo, hi):
            doc.line(x, PLOT_Y0, x, PLOT_Y0 + PLOT_H, stroke="#e0e0e0",
                     stroke_width=0.5)
        doc.line(x, PLOT_Y0 + PLOT_H, x, PLOT_Y0 + PLOT_H + 4, stroke="#555",
                 stroke_width=1)
        doc.text(x, PLOT_Y0 + PLOT_H + 16, _tick_label(10.0 ** d),
                 font_family=FONT, font_size=11, fill="#111",
                 text_anchor="middle", class_="x-tick")
    for i in range(6):
        v = i / 5.0
        y = y_pos(v)
        if 0 < i < 5:
            doc.line(PLOT_X0, y, PLOT_X0 + PLOT_W, y, stroke="#e0e0e0",
                     stroke_width=0.5)
        doc.line(PLOT_X0 - 4, y, PLOT_X0, y, stroke="#555", stroke_width=1)
        doc.text(PLOT_X0 - 8, y + 4, f"{v:.1f}", font_family=FONT,
                 font_size=11, fill="#111", text_anchor="end", class_="y-tick")

    doc.text(PLOT_X0 + PLOT_W / 2, PLOT_Y0 + PLOT_H + 34,
             "Flattened observation length", font_family=FONT, font_size=12,
             fill="#111", text_anchor="middle", class_="x-label")
    doc.text(16, PLOT_Y0 + PLOT_H / 2, "Mean CRAL", font_family=FONT,
             font_size=12, fill="#111", text_anchor="middle",
             transform=f"rotate(-90 16 {PLOT_Y0 + PLOT_H / 2})",
             class_="y-label")

    for row in rows:
        x, y = x_pos(row.flatten_size, lo, hi), y_pos(row.mean_cral)
        if row.disabled:
            _star(doc, x, y)
        else:
            doc.circle(x, y, 4, fill=AGENT_COLOR, fill_opacity=0.8,
                       stroke="#0d3c75", stroke_width=0.5,
                       class_="marker marker-agent")

    lx, ly = PLOT_X0 + 10, PLOT_Y0 + 10
    doc.circle(lx + 6, ly + 6, 4, fill=AGENT_COLOR, fill_opacity=0.8,
               stroke="#0d3c75", stroke_width=0.5, class_="legend-swatch")
    doc.text(lx + 18, ly + 10, "Local-global agent", font_family=FONT,
             font_size=11, fill="#111", class_="legend-label")
    _star(doc, lx + 6, ly + 24, class_="legend-swatch")
    doc.text(lx + 18, ly + 28, "Full-map agent (l = 0)", font_family=FONT,
             font_size=11, fill="#111", class_="legend-label")
    return doc.render()


def render_gridsearch(csv_path, out_path) -> str:
    """Render a grid-search result CSV as a scatter; returns the output path."""
    rows = load_grid_csv(csv_path)
    text = build_gridsearch_svg(rows)
    with open(out_path, "w", newline="") as f:
        f.write(text)
    return str(out_path)
