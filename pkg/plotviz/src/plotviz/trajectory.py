"""Trajectory plots: the flown path over the map with mission overlays.

Cell colors follow the simulator's map semantics (blue landing, red
no-fly zone, gray building). Coverage missions shade covered / remaining
target cells (yellow when the remaining target sits inside a no-fly
zone); harvesting missions draw the ground devices and color each move
by the device the link served that step.
"""

from __future__ import annotations

from . import svg
from .inputs import InputError, MapData, Trajectory, load_map, load_trajectory

CELL = 18
MARGIN = 10
TITLE_H = 34
LEGEND_W = 190

COLORS = {
    "landing": "#5b9bd5",
    "nfz": "#e06666",
    "obstacle": "#808080",
    "covered": "#b6d7a8",
    "uncovered": "#f6b26b",
    "uncovered_nfz": "#ffd966",
    "path": "#111111",
    "grid": "#d9d9d9",
}

# device color by color_id; index 0 deliberately green
DEVICE_PALETTE = ("#2e7d32", "#1565c0", "#c62828", "#6a1b9a", "#ef6c00",
                  "#00838f", "#ad1457", "#9e9d24", "#4527a0", "#5d4037")

FONT = "Helvetica, Arial, sans-serif"


def _cell_fill(code: str, covered: set, uncovered: set, cell) -> str | None:
    if code == "#":
        return COLORS["obstacle"]
    if cell in uncovered:
        return COLORS["uncovered_nfz"] if code == "N" else COLORS["uncovered"]
    if cell in covered:
        return COLORS["covered"]
    if code == "L":
        return COLORS["landing"]
    if code == "N":
        return COLORS["nfz"]
    return None  # free cells stay on the white background


def _arrow_marker(color: str) -> str:
    ident = "arrow-" + color.lstrip("#")
    return (f'<marker id="{ident}" viewBox="0 0 10 10" refX="9" refY="5" '
            f'markerWidth="5" markerHeight="5" orient="auto-start-reverse">'
            f'<path d="M 0 1 L 9 5 L 0 9 z" fill="{color}"/></marker>')


def _legend(doc: svg.Svg, x0: float, mission: str, has_drained: bool):
    def swatch_rect(y, color):
        doc.rect(x0, y, 12, 12, fill=color, stroke="#555", class_="legend-swatch")

    def label(y, text):
        doc.text(x0 + 18, y + 10, text, font_family=FONT, font_size=11,
                 fill="#111", class_="legend-label")

    items: list[tuple[str, str]] = [
        ("rect:" + COLORS["landing"], "Landing zone"),
        ("rect:" + COLORS["nfz"], "No-fly zone"),
        ("rect:" + COLORS["obstacle"], "Building"),
    ]
    if mission == "cpp":
        items += [
            ("rect:" + COLORS["uncovered"], "Remaining target"),
            ("rect:" + COLORS["uncovered_nfz"], "Remaining target in NFZ"),
            ("rect:" + COLORS["covered"], "Covered target"),
        ]
    else:
        items += [("device", "IoT device")]
        if has_drained:
            items += [("device-drained", "Device fully drained")]
        items += [("comm", "Move while communicating")]
    items += [
        ("path", "Flight path"),
        ("hover", "Hover step"),
        ("start", "Start"),
        ("end", "Final position"),
    ]

    y = TITLE_H + 4
    for kind, text in items:
        if kind.startswith("rect:"):
            swatch_rect(y, kind.split(":", 1)[1])
        elif kind == "device":
            doc.circle(x0 + 6, y + 6, 5, fill=DEVICE_PALETTE[0], stroke="#111",
                       class_="legend-swatch")
        elif kind == "device-drained":
            doc.circle(x0 + 6, y + 6, 5, fill="#ffffff",
                       stroke=DEVICE_PALETTE[0], stroke_width=1.5,
                       class_="legend-swatch")
        elif kind == "comm":
            doc.line(x0, y + 6, x0 + 12, y + 6, stroke=DEVICE_PALETTE[0],
                     stroke_width=2, class_="legend-swatch")
        elif kind == "path":
            doc.line(x0, y + 6, x0 + 12, y + 6, stroke=COLORS["path"],
                     stroke_width=2, class_="legend-swatch")
        elif kind == "hover":
            doc.circle(x0 + 6, y + 6, 3.5, fill="none", stroke=COLORS["path"],
                       stroke_width=1.5, class_="legend-swatch")
        elif kind == "start":
            doc.polygon([(x0 + 6, y + 1), (x0 + 11, y + 11), (x0 + 1, y + 11)],
                        fill="#ffffff", stroke="#111", stroke_width=1.5,
                        class_="legend-swatch")
        elif kind == "end":
            doc.rect(x0 + 2, y + 3, 8, 8, fill="#111", class_="legend-swatch")
        label(y, text)
        y += 18


def build_trajectory_svg(map_data: MapData, traj: Trajectory) -> str:
    header = traj.header
    if header.get("size") != map_data.size:
        raise InputError(f"trajectory is for a {header.get('size')}-cell map, "
                         f"map file has {map_data.size}")
    n = map_data.size
    map_w = n * CELL
    width = MARGIN + map_w + 14 + LEGEND_W + MARGIN
    height = TITLE_H + map_w + MARGIN
    mx, my = MARGIN, TITLE_H

    def center(cell):
        return mx + (cell[1] + 0.5) * CELL, my + (cell[0] + 0.5) * CELL

    mission = traj.mission
    covered, uncovered = set(), set()
    if mission == "cpp":
        initial = {tuple(c) for c in header.get("target_cells", [])}
        uncovered = {tuple(c) for c in header.get("uncovered_cells", [])}
        covered = initial - uncovered
    devices = header.get("devices", []) if mission == "dh" else []

    doc = svg.Svg(width, height, comment=f"plotviz trajectory renderer v1 "
                                         f"map={map_data.name}")
    used = [COLORS["path"]]
    used += [DEVICE_PALETTE[d.get("color_id", 0) % len(DEVICE_PALETTE)]
             for d in devices]
    seen = set()
    defs = [_arrow_marker(c) for c in used if not (c in seen or seen.add(c))]
    doc.raw("<defs>" + "".join(defs) + "</defs>")

    doc.text(MARGIN, 22, f"Movement {header['steps_used']}/{header['budget']}, "
                         f"CR={header['cr']:.2f}",
             font_family=FONT, font_size=15, font_weight="bold", fill="#111",
             class_="title")

    doc.rect(mx, my, map_w, map_w, fill="#ffffff", stroke="none",
             class_="map-bg")
    for r in range(n):
        for c in range(n):
            fill = _cell_fill(map_data.code(r, c), covered, uncovered, (r, c))
            if fill is None:
                continue
            kind = ("obstacle" if map_data.code(r, c) == "#" else
                    "uncovered-nfz" if (r, c) in uncovered and map_data.code(r, c) == "N" else
                    "uncovered" if (r, c) in uncovered else
                    "covered" if (r, c) in covered else
                    "landing" if map_data.code(r, c) == "L" else "nfz")
            doc.rect(mx + c * CELL, my + r * CELL, CELL, CELL, fill=fill,
                     class_=f"cell cell-{kind}")
    for i in range(n + 1):
        doc.line(mx, my + i * CELL, mx + map_w, my + i * CELL,
                 stroke=COLORS["grid"], stroke_width=0.5)
        doc.line(mx + i * CELL, my, mx + i * CELL, my + map_w,
                 stroke=COLORS["grid"], stroke_width=0.5)
    doc.rect(mx, my, map_w, map_w, fill="none", stroke="#555", stroke_width=1)

    has_drained = False
    for d in devices:
        color = DEVICE_PALETTE[d.get("color_id", 0) % len(DEVICE_PALETTE)]
        x, y = center(d["position"])
        if d.get("data_final", 0.0) <= 1e-9:
            has_drained = True
            doc.circle(x, y, 0.32 * CELL, fill="#ffffff", stroke=color,
                       stroke_width=2, class_="device device-drained")
        else:
            doc.circle(x, y, 0.32 * CELL, fill=color, stroke="#111",
                       stroke_width=1, class_="device")

    prev = tuple(header["start"])
    for rec in traj.records:
        cur = tuple(rec["position"])
        color = COLORS["path"]
        comm = rec.get("comm")
        if mission == "dh" and comm is not None:
            color = DEVICE_PALETTE[devices[comm].get("color_id", 0)
                                   % len(DEVICE_PALETTE)]
        if cur == prev:
            x, y = center(cur)
            doc.circle(x, y, 0.18 * CELL, fill="none", stroke=color,
                       stroke_width=1.5, class_="hover")
        else:
            (x1, y1), (x2, y2) = center(prev), center(cur)
            doc.line(x1, y1, x2, y2, stroke=color, stroke_width=2,
                     marker_end=f"url(#arrow-{color.lstrip('#')})",
                     class_="arrow")
        prev = cur

    sx, sy = center(header["start"])
    doc.polygon([(sx, sy - 0.3 * CELL), (sx + 0.3 * CELL, sy + 0.25 * CELL),
                 (sx - 0.3 * CELL, sy + 0.25 * CELL)],
                fill="#ffffff", stroke="#111", stroke_width=1.5,
                class_="start-mark")
    if traj.records:
        ex, ey = center(traj.records[-1]["position"])
        doc.rect(ex - 0.16 * CELL, ey - 0.16 * CELL, 0.32 * CELL, 0.32 * CELL,
                 fill="#111", class_="end-mark")

    _legend(doc, mx + map_w + 14, mission, has_drained)
    return doc.render()


def render_trajectory(traj_path, map_path, out_path) -> str:
    """Render one exported trajectory over its map; returns the output path."""
    map_data = load_map(map_path)
    traj = load_trajectory(traj_path, map_data.size)
    text = build_trajectory_svg(map_data, traj)
    with open(out_path, "w", newline="") as f:
        f.write(text)
    return str(out_path)
