"""Parsers for the simulator's exported files.

Three formats cross the boundary: map JSON (grid of cell codes),
trajectory JSONL (header line + one record per step), and the
grid-search CSV. Everything is validated on load so rendering can
assume well-formed data.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field


class InputError(ValueError):
    pass


CELL_CODES = (".", "L", "N", "#")
MISSIONS = ("cpp", "dh")


@dataclass
class MapData:
    name: str
    size: int
    grid: list[str]  # one code per cell, row-major rows

    def code(self, r: int, c: int) -> str:
        return self.grid[r][c]


@dataclass
class Trajectory:
    header: dict
    records: list[dict]

    @property
    def mission(self) -> str:
        return self.header["mission"]


@dataclass
class GridRow:
    l: int
    g: int
    flatten_size: int
    mean_cral: float

    @property
    def disabled(self) -> bool:
        return self.l == 0


def load_map(path) -> MapData:
    with open(path) as f:
        data = json.load(f)
    grid = data.get("grid")
    if not isinstance(grid, list) or not grid:
        raise InputError(f"{path}: map JSON needs a non-empty 'grid' array")
    size = data.get("size", len(grid))
    rows = []
    for r, row in enumerate(grid):
        if len(row) != size:
            raise InputError(f"{path}: row {r} has {len(row)} cells, want {size}")
        for c, code in enumerate(row):
            if code not in CELL_CODES:
                raise InputError(f"{path}: unknown cell code {code!r} at ({r}, {c})")
        rows.append("".join(row))
    if len(rows) != size:
        raise InputError(f"{path}: {len(rows)} rows, want {size}")
    return MapData(name=data.get("name", ""), size=size, grid=rows)


def load_trajectory(path, map_size: int) -> Trajectory:
    with open(path) as f:
        lines = [line for line in f.read().splitlines() if line.strip()]
    if not lines:
        raise InputError(f"{path}: empty trajectory file")
    try:
        parsed = [json.loads(line) for line in lines]
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not valid JSONL ({exc})") from exc
    header, records = parsed[0], parsed[1:]
    if header.get("type") != "header":
        raise InputError(f"{path}: first line must be the header record")
    mission = header.get("mission")
    if mission not in MISSIONS:
        raise InputError(f"{path}: unknown mission overlay {mission!r}")
    for key in ("start", "budget", "steps_used", "cr"):
        if key not in header:
            raise InputError(f"{path}: header misses {key!r}")
    for i, rec in enumerate(records):
        if rec.get("t") != i:
            raise InputError(f"{path}: step indices must run 0..{len(records) - 1}, "
                             f"got {rec.get('t')!r} at line {i + 2}")
        r, c = rec["position"]
        if not (0 <= r < map_size and 0 <= c < map_size):
            raise InputError(f"{path}: step {i} position {rec['position']} "
                             f"is off the {map_size}x{map_size} map")
    return Trajectory(header=header, records=records)


def load_grid_csv(path) -> list[GridRow]:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        raw = list(reader)
    rows = []
    for i, row in enumerate(raw):
        status = (row.get("status") or "").strip()
        if status != "ok":
            continue  # infeasible cells carry no agent, nothing to plot
        try:
            rows.append(GridRow(l=int(row["l"]), g=int(row["g"]),
                                flatten_size=int(row["flatten_size"]),
                                mean_cral=float(row["mean_cral"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"{path}: bad row {i + 2}: {exc}") from exc
    if not rows:
        raise InputError(f"{path}: no plottable result rows")
    return rows
